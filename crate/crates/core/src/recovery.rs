//! Pseudostress interpolations, the midpoint-averaging postprocessor `K_h`
//! and recovery of pseudostress, velocity gradient and pressure.
//!
//! Tensor data is stored row-major as `[t11, t12, t21, t22]`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::AnalyticTensor;
use crate::mesh::Triangulation;
use crate::spaces::{interpolate_rt, DiscreteField, SpaceKind};
use crate::{Mat2, Vec2};

pub fn mat_to_array(m: &Mat2) -> [f64; 4] {
    [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]
}

pub fn array_to_mat(a: &[f64; 4]) -> Mat2 {
    Mat2::new(a[0], a[1], a[2], a[3])
}

/// Discontinuous piecewise affine field: on element `k` the value is
/// `value[k] + gx[k] (x - M_K)_1 + gy[k] (x - M_K)_2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseP1<const N: usize> {
    pub centroids: Vec<Vec2>,
    pub value: Vec<[f64; N]>,
    pub gx: Vec<[f64; N]>,
    pub gy: Vec<[f64; N]>,
}

pub type PiecewiseScalar = PiecewiseP1<1>;
pub type PiecewiseTensor = PiecewiseP1<4>;

impl<const N: usize> PiecewiseP1<N> {
    /// Piecewise constant field.
    pub fn constant(mesh: &Triangulation, value: Vec<[f64; N]>) -> Self {
        let n = mesh.num_triangles();
        assert_eq!(value.len(), n);
        Self {
            centroids: (0..n).map(|k| mesh.geometry(k).centroid).collect(),
            value,
            gx: vec![[0.0; N]; n],
            gy: vec![[0.0; N]; n],
        }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn eval(&self, k: usize, x: Vec2) -> [f64; N] {
        let d = x - self.centroids[k];
        std::array::from_fn(|c| self.value[k][c] + self.gx[k][c] * d.x + self.gy[k][c] * d.y)
    }

    /// Element means.
    pub fn element_means(&self) -> Self {
        Self {
            centroids: self.centroids.clone(),
            value: self.value.clone(),
            gx: vec![[0.0; N]; self.len()],
            gy: vec![[0.0; N]; self.len()],
        }
    }

    pub fn linear_combination(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        let comb = |a: &Vec<[f64; N]>, b: &Vec<[f64; N]>| -> Vec<[f64; N]> {
            a.iter()
                .zip(b)
                .map(|(x, y)| std::array::from_fn(|c| alpha * x[c] + beta * y[c]))
                .collect()
        };
        Self {
            centroids: self.centroids.clone(),
            value: comb(&self.value, &other.value),
            gx: comb(&self.gx, &other.gx),
            gy: comb(&self.gy, &other.gy),
        }
    }

    fn check(&self, mesh: &Triangulation) -> Result<()> {
        if self.len() != mesh.num_triangles() {
            return Err(Error::DimensionMismatch(format!(
                "piecewise field has {} elements, mesh has {}",
                self.len(),
                mesh.num_triangles()
            )));
        }
        Ok(())
    }
}

impl PiecewiseTensor {
    pub fn eval_mat(&self, k: usize, x: Vec2) -> Mat2 {
        array_to_mat(&self.eval(k, x))
    }

    /// Row-wise RT field as a piecewise affine tensor.
    pub fn from_rt(mesh: &Triangulation, sigma: &DiscreteField) -> Result<Self> {
        if sigma.kind() != SpaceKind::RtTensor || !sigma.dofs().matches(mesh) {
            return Err(Error::DimensionMismatch(
                "expected an RT field on this mesh".into(),
            ));
        }
        let n = mesh.num_triangles();
        let mut out = Self::constant(mesh, vec![[0.0; 4]; n]);
        for k in 0..n {
            let t = sigma.local_tensor(mesh, k);
            out.value[k] = mat_to_array(&t.at_centroid);
            // Row r is a_r + b_r (x - M).
            out.gx[k] = [t.slope.x, 0.0, t.slope.y, 0.0];
            out.gy[k] = [0.0, t.slope.x, 0.0, t.slope.y];
        }
        Ok(out)
    }

    /// Piecewise gradient of a CR or ECR velocity.
    pub fn gradient_of(mesh: &Triangulation, u: &DiscreteField) -> Result<Self> {
        if !matches!(u.kind(), SpaceKind::Cr | SpaceKind::Ecr) || !u.dofs().matches(mesh) {
            return Err(Error::DimensionMismatch(
                "expected a CR or ECR velocity on this mesh".into(),
            ));
        }
        let n = mesh.num_triangles();
        let mut out = Self::constant(mesh, vec![[0.0; 4]; n]);
        for k in 0..n {
            let local = u.local_velocity(mesh, k);
            let g = local.element.geometry();
            let m = g.centroid;
            let h = g.diameter;
            // The gradient is affine: recover it from three evaluations.
            let g0 = local.gradient(m);
            let g1 = local.gradient(m + Vec2::new(h, 0.0));
            let g2 = local.gradient(m + Vec2::new(0.0, h));
            out.value[k] = mat_to_array(&g0);
            out.gx[k] = mat_to_array(&((g1 - g0) / h));
            out.gy[k] = mat_to_array(&((g2 - g0) / h));
        }
        Ok(out)
    }

    /// `tau + q I` elementwise.
    pub fn plus_scalar_identity(&self, q: &PiecewiseScalar) -> Self {
        let mut out = self.clone();
        for k in 0..self.len() {
            out.value[k][0] += q.value[k][0];
            out.value[k][3] += q.value[k][0];
            out.gx[k][0] += q.gx[k][0];
            out.gx[k][3] += q.gx[k][0];
            out.gy[k][0] += q.gy[k][0];
            out.gy[k][3] += q.gy[k][0];
        }
        out
    }
}

impl PiecewiseScalar {
    pub fn from_p0(mesh: &Triangulation, p: &DiscreteField) -> Result<Self> {
        if p.kind() != SpaceKind::P0 || !p.dofs().matches(mesh) {
            return Err(Error::DimensionMismatch(
                "expected a P0 scalar on this mesh".into(),
            ));
        }
        Ok(Self::constant(
            mesh,
            p.coeffs().iter().map(|&v| [v]).collect(),
        ))
    }
}

/// CR-type field given by its values at edge midpoints; on element `K` it
/// is the affine function `sum_i v_{e_i} (1 - 2 psi_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrLifted<const N: usize> {
    pub values: Vec<[f64; N]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MidpointRecord {
    pub edge: usize,
    pub values: Vec<f64>,
}

impl<const N: usize> CrLifted<N> {
    pub fn eval(&self, mesh: &Triangulation, k: usize, x: Vec2) -> [f64; N] {
        let psi = mesh.geometry(k).barycentric(x);
        self.eval_bary(mesh, k, psi)
    }

    /// Evaluation from barycentric coordinates of element `k`.
    pub fn eval_bary(&self, mesh: &Triangulation, k: usize, psi: [f64; 3]) -> [f64; N] {
        let edges = mesh.triangle_edges(k);
        std::array::from_fn(|c| {
            (0..3)
                .map(|i| self.values[edges[i]][c] * (1.0 - 2.0 * psi[i]))
                .sum()
        })
    }

    /// Midpoint values keyed by edge index, for JSON export.
    pub fn records(&self) -> Vec<MidpointRecord> {
        self.values
            .iter()
            .enumerate()
            .map(|(edge, v)| MidpointRecord {
                edge,
                values: v.to_vec(),
            })
            .collect()
    }
}

/// `Pi_h^p sigma = (1/2) Pi_h^0 tr Pi_RT sigma`.
pub fn interp_pressure(sigma: &AnalyticTensor, mesh: &Triangulation) -> DiscreteField {
    pressure_of_rt(mesh, &interpolate_rt(mesh, sigma)).expect("interpolant lives on this mesh")
}

/// `(1/2) Pi_h^0 tr tau` for an RT field `tau`.
pub fn pressure_of_rt(mesh: &Triangulation, tau: &DiscreteField) -> Result<DiscreteField> {
    let t = PiecewiseTensor::from_rt(mesh, tau)?;
    let dofs = crate::spaces::DofMap::new(SpaceKind::P0, mesh);
    DiscreteField::new(dofs, t.value.iter().map(|v| 0.5 * (v[0] + v[3])).collect())
}

/// `Pi_CR^u sigma = Pi_h^0 dev Pi_RT sigma`.
pub fn interp_velocity_cr(sigma: &AnalyticTensor, mesh: &Triangulation) -> PiecewiseTensor {
    let t = PiecewiseTensor::from_rt(mesh, &interpolate_rt(mesh, sigma))
        .expect("interpolant lives on this mesh");
    let value = t
        .value
        .iter()
        .map(|v| {
            let h = 0.5 * (v[0] + v[3]);
            [v[0] - h, v[1], v[2], v[3] - h]
        })
        .collect();
    PiecewiseTensor::constant(mesh, value)
}

/// `Pi_ECR^u sigma = Pi_RT sigma - (Pi_h^p sigma) I`.
pub fn interp_velocity_ecr(sigma: &AnalyticTensor, mesh: &Triangulation) -> PiecewiseTensor {
    let mut t = PiecewiseTensor::from_rt(mesh, &interpolate_rt(mesh, sigma))
        .expect("interpolant lives on this mesh");
    for v in t.value.iter_mut() {
        let h = 0.5 * (v[0] + v[3]);
        v[0] -= h;
        v[3] -= h;
    }
    t
}

/// Midpoint-averaging postprocessor.
///
/// Interior midpoints take the average of the two one-sided values; a
/// boundary midpoint `m` takes `2 K_h q(m') - K_h q(m'')` where `m'`, `m''`
/// are the midpoints of the interior and far edges of
/// [`Triangulation::boundary_companion`].
pub fn kh_apply<const N: usize>(q: &PiecewiseP1<N>, mesh: &Triangulation) -> Result<CrLifted<N>> {
    if mesh.level() < 2 {
        return Err(Error::LevelTooCoarse {
            level: mesh.level(),
            required: 2,
        });
    }
    q.check(mesh)?;
    let ne = mesh.num_edges();
    let mut values = vec![[0.0; N]; ne];
    for (e, slot) in values.iter_mut().enumerate() {
        let et = mesh.edge_triangles(e);
        if let Some(k2) = et.second {
            let m = mesh.edge_midpoint(e);
            let a = q.eval(et.first, m);
            let b = q.eval(k2, m);
            *slot = std::array::from_fn(|c| 0.5 * (a[c] + b[c]));
        }
    }
    for e in mesh.boundary_edges() {
        let comp = mesh.boundary_companion(e)?;
        if mesh.is_boundary_edge(comp.far_edge) || mesh.is_boundary_edge(comp.interior_edge) {
            return Err(Error::BoundaryCompanion {
                edge: e,
                companion: comp.far_edge,
            });
        }
        let a = values[comp.interior_edge];
        let b = values[comp.far_edge];
        values[e] = std::array::from_fn(|c| 2.0 * a[c] - b[c]);
    }
    Ok(CrLifted { values })
}

/// Which discretization produced the fields handed to [`recover_all`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    Cr,
    Ecr,
    Rt,
}

/// Recovered pseudostress, velocity gradient and pressure.
#[derive(Debug, Clone, PartialEq)]
pub struct Recovered {
    pub sigma: CrLifted<4>,
    pub grad_u: CrLifted<4>,
    pub pressure: CrLifted<1>,
}

/// Superconvergent recovery from a discrete solution.
///
/// CR/ECR: `primary` is the velocity and `secondary` the pressure;
/// `grad_u = K_h grad_h u_h`, `p = K_h p_h`, `sigma = K_h (grad_h u_h + p_h I)`.
/// RT: `primary` is the pseudostress; `sigma = K_h Pi_h^0 sigma_RT`, with
/// `grad_u` its deviatoric part and `p` half its trace.
pub fn recover_all(
    method: Method,
    mesh: &Triangulation,
    primary: &DiscreteField,
    secondary: Option<&DiscreteField>,
) -> Result<Recovered> {
    match method {
        Method::Cr | Method::Ecr => {
            let expected = if method == Method::Cr {
                SpaceKind::Cr
            } else {
                SpaceKind::Ecr
            };
            if primary.kind() != expected {
                return Err(Error::DimensionMismatch(format!(
                    "{method:?} recovery needs a {expected:?} velocity"
                )));
            }
            let p =
                secondary.ok_or_else(|| Error::InvalidArgument("pressure is required".into()))?;
            let grad = PiecewiseTensor::gradient_of(mesh, primary)?;
            let pp = PiecewiseScalar::from_p0(mesh, p)?;
            Ok(Recovered {
                sigma: kh_apply(&grad.plus_scalar_identity(&pp), mesh)?,
                grad_u: kh_apply(&grad, mesh)?,
                pressure: kh_apply(&pp, mesh)?,
            })
        }
        Method::Rt => {
            let sigma = kh_apply(
                &PiecewiseTensor::from_rt(mesh, primary)?.element_means(),
                mesh,
            )?;
            let pressure = CrLifted {
                values: sigma.values.iter().map(|v| [0.5 * (v[0] + v[3])]).collect(),
            };
            let grad_u = CrLifted {
                values: sigma
                    .values
                    .iter()
                    .map(|v| {
                        let h = 0.5 * (v[0] + v[3]);
                        [v[0] - h, v[1], v[2], v[3] - h]
                    })
                    .collect(),
            };
            Ok(Recovered {
                sigma,
                grad_u,
                pressure,
            })
        }
    }
}

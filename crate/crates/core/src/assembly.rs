//! Saddle-point systems for the nonconforming velocity-pressure methods and
//! the row-wise RT pseudostress method, and velocity mass matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fields::AnalyticVector;
use crate::mesh::Triangulation;
use crate::quadrature::tri_rule;
use crate::spaces::{rt_shape, DiscreteField, DofMap, ScalarElement, SpaceKind, VelocityElement};
use crate::sparse::{block, CsrMatrix};
use crate::Vec2;

/// Quadrature degree for bilinear forms (exact for every pairing used).
pub const FORM_DEGREE: usize = 4;
/// Quadrature degree for load vectors of analytic sources.
pub const LOAD_DEGREE: usize = 6;

/// Right-hand side of a source problem.
#[derive(Clone, Copy)]
pub enum Load<'a> {
    Zero,
    Analytic(&'a AnalyticVector),
    /// Piecewise constant source given as a P0 vector field.
    ElementMeans(&'a DiscreteField),
}

impl Load<'_> {
    fn check(&self, mesh: &Triangulation) -> Result<()> {
        if let Load::ElementMeans(f) = self {
            if f.kind() != SpaceKind::P0Vector || !f.dofs().matches(mesh) {
                return Err(Error::DimensionMismatch(
                    "source must be a P0 vector field on this mesh".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Map between all dofs of a space and the unconstrained ones.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeDofs {
    to_free: Vec<Option<usize>>,
    to_global: Vec<usize>,
}

impl FreeDofs {
    pub fn new(map: &DofMap, mesh: &Triangulation) -> Self {
        let mut to_free = vec![None; map.len()];
        let mut to_global = Vec::new();
        for (d, slot) in to_free.iter_mut().enumerate() {
            if !map.is_boundary_dof(mesh, d) {
                *slot = Some(to_global.len());
                to_global.push(d);
            }
        }
        Self { to_free, to_global }
    }

    pub fn len(&self) -> usize {
        self.to_global.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_global.is_empty()
    }

    pub fn global_len(&self) -> usize {
        self.to_free.len()
    }

    pub fn free(&self, global: usize) -> Option<usize> {
        self.to_free[global]
    }

    pub fn global(&self, free: usize) -> usize {
        self.to_global[free]
    }

    /// Free coefficients to all coefficients (constrained ones zero).
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.global_len()];
        for (i, &g) in self.to_global.iter().enumerate() {
            out[g] = free[i];
        }
        out
    }

    pub fn restrict(&self, global: &[f64]) -> Vec<f64> {
        self.to_global.iter().map(|&g| global[g]).collect()
    }
}

/// Which block carries the scalar mean constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanConstraint {
    /// `int q = 0` on the constraint (pressure) block.
    Constraint,
    /// `int tr tau = 0` on the primary (pseudostress) block.
    Primary,
}

/// Symmetric saddle-point system
/// `[[A, B^T, c_1], [B, 0, c_2], [c_1^T, c_2^T, 0]]`, where exactly one of
/// `c_1`, `c_2` is nonzero.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub mean: Vec<f64>,
    pub mean_on: MeanConstraint,
    pub rhs_primary: Vec<f64>,
    pub rhs_constraint: Vec<f64>,
    pub primary: DofMap,
    pub constraint: DofMap,
    pub free: FreeDofs,
}

impl SaddleSystem {
    pub fn n_primary(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_constraint(&self) -> usize {
        self.b.nrows()
    }

    pub fn dim(&self) -> usize {
        self.n_primary() + self.n_constraint() + 1
    }

    fn mean_column(&self) -> CsrMatrix {
        let t: Vec<_> = self
            .mean
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, &v)| (i, 0, v))
            .collect();
        CsrMatrix::from_triplets(self.mean.len(), 1, &t)
    }

    /// Full system matrix with the velocity block shifted by `-shift * mass`.
    pub fn matrix_shifted(&self, mass: Option<(&CsrMatrix, f64)>) -> Result<CsrMatrix> {
        let (n1, n2) = (self.n_primary(), self.n_constraint());
        let a = match mass {
            Some((m, s)) => self.a.add(1.0, m, -s)?,
            None => self.a.clone(),
        };
        let bt = self.b.transpose();
        let c = self.mean_column();
        let ct = c.transpose();
        let off = match self.mean_on {
            MeanConstraint::Primary => 0,
            MeanConstraint::Constraint => n1,
        };
        Ok(block(
            n1 + n2 + 1,
            n1 + n2 + 1,
            &[
                (0, 0, &a),
                (0, n1, &bt),
                (n1, 0, &self.b),
                (off, n1 + n2, &c),
                (n1 + n2, off, &ct),
            ],
        ))
    }

    pub fn matrix(&self) -> CsrMatrix {
        self.matrix_shifted(None).expect("blocks are consistent")
    }

    pub fn rhs(&self) -> Vec<f64> {
        let mut r = self.rhs_primary.clone();
        r.extend_from_slice(&self.rhs_constraint);
        r.push(0.0);
        r
    }
}

/// Velocity mass matrix on the free dofs.
#[derive(Debug, Clone)]
pub struct MassMatrix {
    pub matrix: CsrMatrix,
    pub free: FreeDofs,
}

fn check_mesh(mesh: &Triangulation) -> Result<()> {
    if mesh.num_triangles() == 0 {
        return Err(Error::EmptyMesh);
    }
    Ok(())
}

fn push_free(t: &mut Vec<(usize, usize, f64)>, free: &FreeDofs, gi: usize, gj: usize, v: f64) {
    if let (Some(i), Some(j)) = (free.free(gi), free.free(gj)) {
        t.push((i, j, v));
    }
}

/// Element means of the local velocity basis against the source, per
/// local dof `c * n + j`.
fn element_load(load: &Load, el: &ScalarElement, k: usize) -> Vec<f64> {
    let n = el.len();
    let g = el.geometry();
    let mut out = vec![0.0; 2 * n];
    match load {
        Load::Zero => {}
        Load::Analytic(f) => {
            let rule = tri_rule(LOAD_DEGREE).expect("static degree");
            for (x, w) in rule.on_element(g) {
                let fx = f.eval(x);
                let (vals, _) = el.eval(x);
                for j in 0..n {
                    out[j] += w * fx.x * vals[j];
                    out[n + j] += w * fx.y * vals[j];
                }
            }
        }
        Load::ElementMeans(f) => {
            let fk = f.vector_value(k);
            let rule = tri_rule(2).expect("static degree");
            for (x, w) in rule.on_element(g) {
                let (vals, _) = el.eval(x);
                for j in 0..n {
                    out[j] += w * fk.x * vals[j];
                    out[n + j] += w * fk.y * vals[j];
                }
            }
        }
    }
    out
}

/// `(grad_h u, grad_h v) + (div_h v, p) = (f, v)`, `(div_h u, q) = 0`,
/// `int p = 0`, with boundary edge dofs eliminated.
pub fn assemble_stokes(
    element: VelocityElement,
    mesh: &Triangulation,
    load: Load,
) -> Result<SaddleSystem> {
    check_mesh(mesh)?;
    load.check(mesh)?;
    let primary = DofMap::new(element.into(), mesh);
    let constraint = DofMap::new(SpaceKind::P0, mesh);
    let free = FreeDofs::new(&primary, mesh);
    let rule = tri_rule(FORM_DEGREE)?;
    let mut ta = Vec::new();
    let mut tb = Vec::new();
    let mut rhs = vec![0.0; free.len()];
    let mut mean = vec![0.0; mesh.num_triangles()];
    for k in 0..mesh.num_triangles() {
        let el = ScalarElement::new(element, mesh.geometry(k));
        let n = el.len();
        let dofs = primary.local_dofs(mesh, k);
        let mut stiff = DMatrix::<f64>::zeros(n, n);
        let mut grad_int = vec![Vec2::zeros(); n];
        for (x, w) in rule.on_element(el.geometry()) {
            let (_, g) = el.eval(x);
            for i in 0..n {
                grad_int[i] += w * g[i];
                for j in 0..n {
                    stiff[(i, j)] += w * g[i].dot(&g[j]);
                }
            }
        }
        for c in 0..2 {
            for i in 0..n {
                let gi = dofs[c * n + i];
                for j in 0..n {
                    push_free(&mut ta, &free, gi, dofs[c * n + j], stiff[(i, j)]);
                }
                if let Some(fi) = free.free(gi) {
                    tb.push((k, fi, grad_int[i][c]));
                }
            }
        }
        let f_loc = element_load(&load, &el, k);
        for (l, v) in f_loc.iter().enumerate() {
            if let Some(fi) = free.free(dofs[l]) {
                rhs[fi] += v;
            }
        }
        mean[k] = el.geometry().area;
    }
    Ok(SaddleSystem {
        a: CsrMatrix::from_triplets(free.len(), free.len(), &ta),
        b: CsrMatrix::from_triplets(mesh.num_triangles(), free.len(), &tb),
        mean,
        mean_on: MeanConstraint::Constraint,
        rhs_primary: rhs,
        rhs_constraint: vec![0.0; mesh.num_triangles()],
        primary,
        constraint,
        free,
    })
}

/// `(dev sigma, dev tau) + (div tau, u) = 0`, `(div sigma, v) = -(f, v)`,
/// `int tr sigma = 0`, for row-wise RT `sigma` and piecewise constant `u`.
pub fn assemble_rt_mixed(mesh: &Triangulation, load: Load) -> Result<SaddleSystem> {
    check_mesh(mesh)?;
    load.check(mesh)?;
    let primary = DofMap::new(SpaceKind::RtTensor, mesh);
    let constraint = DofMap::new(SpaceKind::P0Vector, mesh);
    let free = FreeDofs::new(&primary, mesh);
    let rule = tri_rule(FORM_DEGREE)?;
    let load_rule = tri_rule(LOAD_DEGREE)?;
    let mut ta = Vec::new();
    let mut tb = Vec::new();
    let mut mean = vec![0.0; primary.len()];
    let mut rhs_c = vec![0.0; constraint.len()];
    for k in 0..mesh.num_triangles() {
        let g = mesh.geometry(k);
        let signs = mesh.edge_signs(k);
        let edges = mesh.triangle_edges(k);
        // gram[i][j] = int a_i . a_j, outer[i][j] = int a_i (x) a_j
        let mut gram = [[0.0; 3]; 3];
        let mut outer = [[nalgebra::Matrix2::<f64>::zeros(); 3]; 3];
        let mut integral = [Vec2::zeros(); 3];
        for (x, w) in rule.on_element(&g) {
            let a: [Vec2; 3] = std::array::from_fn(|i| rt_shape(&g, &signs, i, x));
            for i in 0..3 {
                integral[i] += w * a[i];
                for j in 0..3 {
                    gram[i][j] += w * a[i].dot(&a[j]);
                    outer[i][j] += w * a[i] * a[j].transpose();
                }
            }
        }
        for r in 0..2 {
            for i in 0..3 {
                let gi = 2 * edges[i] + r;
                for s in 0..2 {
                    for j in 0..3 {
                        let gj = 2 * edges[j] + s;
                        let delta = if r == s { gram[i][j] } else { 0.0 };
                        ta.push((gi, gj, delta - 0.5 * outer[i][j][(r, s)]));
                    }
                }
                // int_K div a_i = s_i
                tb.push((2 * k + r, gi, signs[i]));
                mean[gi] += integral[i][r];
            }
        }
        let fk: Vec2 = match &load {
            Load::Zero => Vec2::zeros(),
            Load::Analytic(f) => load_rule.on_element(&g).map(|(x, w)| w * f.eval(x)).sum(),
            Load::ElementMeans(f) => f.vector_value(k) * g.area,
        };
        rhs_c[2 * k] = -fk.x;
        rhs_c[2 * k + 1] = -fk.y;
    }
    Ok(SaddleSystem {
        a: CsrMatrix::from_triplets(primary.len(), primary.len(), &ta),
        b: CsrMatrix::from_triplets(constraint.len(), primary.len(), &tb),
        mean,
        mean_on: MeanConstraint::Primary,
        rhs_primary: vec![0.0; primary.len()],
        rhs_constraint: rhs_c,
        primary,
        constraint,
        free,
    })
}

fn mass_triplets(
    element: VelocityElement,
    mesh: &Triangulation,
    free: &FreeDofs,
) -> Result<Vec<(usize, usize, f64)>> {
    let rule = tri_rule(FORM_DEGREE)?;
    let map = DofMap::new(element.into(), mesh);
    let mut t = Vec::new();
    for k in 0..mesh.num_triangles() {
        let el = ScalarElement::new(element, mesh.geometry(k));
        let n = el.len();
        let dofs = map.local_dofs(mesh, k);
        let mut local = DMatrix::<f64>::zeros(n, n);
        for (x, w) in rule.on_element(el.geometry()) {
            let (v, _) = el.eval(x);
            for i in 0..n {
                for j in 0..n {
                    local[(i, j)] += w * v[i] * v[j];
                }
            }
        }
        for c in 0..2 {
            for i in 0..n {
                for j in 0..n {
                    push_free(
                        &mut t,
                        free,
                        dofs[c * n + i],
                        dofs[c * n + j],
                        local[(i, j)],
                    );
                }
            }
        }
    }
    Ok(t)
}

/// `(u_h, v_h)` on the free velocity dofs.
pub fn assemble_mass(element: VelocityElement, mesh: &Triangulation) -> Result<MassMatrix> {
    check_mesh(mesh)?;
    let map = DofMap::new(element.into(), mesh);
    let free = FreeDofs::new(&map, mesh);
    let t = mass_triplets(element, mesh, &free)?;
    Ok(MassMatrix {
        matrix: CsrMatrix::from_triplets(free.len(), free.len(), &t),
        free,
    })
}

/// `(u_h, v_h)` on all velocity dofs, boundary dofs included.
pub fn assemble_mass_unconstrained(
    element: VelocityElement,
    mesh: &Triangulation,
) -> Result<CsrMatrix> {
    check_mesh(mesh)?;
    let map = DofMap::new(element.into(), mesh);
    let all = FreeDofs {
        to_free: (0..map.len()).map(Some).collect(),
        to_global: (0..map.len()).collect(),
    };
    let t = mass_triplets(element, mesh, &all)?;
    Ok(CsrMatrix::from_triplets(map.len(), map.len(), &t))
}

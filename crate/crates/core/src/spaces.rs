//! Degree-of-freedom maps, local shape functions and canonical
//! interpolations for the CR, ECR, piecewise-constant and row-wise RT spaces.
//!
//! Degrees of freedom:
//! - CR: edge means of each velocity component, `2e + c`;
//! - ECR: CR dofs plus element means, `2 n_edges + 2k + c`;
//! - P0 (scalar) `k`, P0 (vector) `2k + c`;
//! - RT (tensor): normal flux of row `r` through edge `e` along the global
//!   edge normal, `2e + r`.
//!
//! Local velocity dofs are numbered `c * n_local + j`, where `j` runs over
//! local edges (then the element mean for ECR). Local RT dofs are `3r + i`.

use nalgebra::Matrix4;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{AnalyticScalar, AnalyticTensor, AnalyticVector};
use crate::mesh::{ElementGeometry, Triangulation};
use crate::quadrature::{edge_rule, tri_rule};
use crate::{Mat2, Vec2};

/// Default quadrature degree for interpolation functionals of analytic fields.
pub const INTERPOLATION_DEGREE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum VelocityElement {
    Cr,
    Ecr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SpaceKind {
    Cr,
    Ecr,
    P0,
    P0Vector,
    RtTensor,
}

impl From<VelocityElement> for SpaceKind {
    fn from(v: VelocityElement) -> Self {
        match v {
            VelocityElement::Cr => SpaceKind::Cr,
            VelocityElement::Ecr => SpaceKind::Ecr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofMap {
    kind: SpaceKind,
    n_edges: usize,
    n_tris: usize,
}

impl DofMap {
    pub fn new(kind: SpaceKind, mesh: &Triangulation) -> Self {
        Self {
            kind,
            n_edges: mesh.num_edges(),
            n_tris: mesh.num_triangles(),
        }
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        match self.kind {
            SpaceKind::Cr | SpaceKind::RtTensor => 2 * self.n_edges,
            SpaceKind::Ecr => 2 * self.n_edges + 2 * self.n_tris,
            SpaceKind::P0 => self.n_tris,
            SpaceKind::P0Vector => 2 * self.n_tris,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn matches(&self, mesh: &Triangulation) -> bool {
        self.n_edges == mesh.num_edges() && self.n_tris == mesh.num_triangles()
    }

    /// Edge dof of component (or tensor row) `c`.
    pub fn edge_dof(&self, e: usize, c: usize) -> usize {
        debug_assert!(matches!(
            self.kind,
            SpaceKind::Cr | SpaceKind::Ecr | SpaceKind::RtTensor
        ));
        2 * e + c
    }

    /// Element dof of component `c`.
    pub fn cell_dof(&self, k: usize, c: usize) -> usize {
        match self.kind {
            SpaceKind::Ecr => 2 * self.n_edges + 2 * k + c,
            SpaceKind::P0 => k,
            SpaceKind::P0Vector => 2 * k + c,
            _ => panic!("{:?} has no element dofs", self.kind),
        }
    }

    /// Scalar local basis size per component.
    pub fn scalar_local_len(&self) -> usize {
        match self.kind {
            SpaceKind::Cr | SpaceKind::RtTensor => 3,
            SpaceKind::Ecr => 4,
            SpaceKind::P0 | SpaceKind::P0Vector => 1,
        }
    }

    /// Global dofs of element `k` in local order.
    pub fn local_dofs(&self, mesh: &Triangulation, k: usize) -> Vec<usize> {
        let edges = mesh.triangle_edges(k);
        match self.kind {
            SpaceKind::Cr | SpaceKind::RtTensor => (0..2)
                .flat_map(|c| edges.iter().map(move |&e| 2 * e + c))
                .collect(),
            SpaceKind::Ecr => (0..2)
                .flat_map(|c| {
                    edges
                        .iter()
                        .map(move |&e| 2 * e + c)
                        .chain(std::iter::once(self.cell_dof(k, c)))
                })
                .collect(),
            SpaceKind::P0 => vec![k],
            SpaceKind::P0Vector => vec![2 * k, 2 * k + 1],
        }
    }

    /// Dofs constrained to zero by the homogeneous velocity boundary condition.
    pub fn is_boundary_dof(&self, mesh: &Triangulation, dof: usize) -> bool {
        match self.kind {
            SpaceKind::Cr | SpaceKind::Ecr => {
                dof < 2 * self.n_edges && mesh.is_boundary_edge(dof / 2)
            }
            _ => false,
        }
    }
}

/// Scalar CR or ECR shape functions on one element.
#[derive(Debug, Clone)]
pub struct ScalarElement {
    kind: VelocityElement,
    geom: ElementGeometry,
    /// ECR: coefficients of the dual basis in the monomials
    /// `1, s_1, s_2, s_1^2 + s_2^2` with `s = (x - M_K) / diam K`; column `j`
    /// holds shape function `j`.
    ecr: Option<Matrix4<f64>>,
}

impl ScalarElement {
    pub fn new(kind: VelocityElement, geom: ElementGeometry) -> Self {
        let ecr = match kind {
            VelocityElement::Cr => None,
            VelocityElement::Ecr => Some(ecr_dual_coefficients(&geom)),
        };
        Self { kind, geom, ecr }
    }

    pub fn geometry(&self) -> &ElementGeometry {
        &self.geom
    }

    pub fn len(&self) -> usize {
        match self.kind {
            VelocityElement::Cr => 3,
            VelocityElement::Ecr => 4,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Values and gradients of the local shape functions at `x`; unused
    /// trailing slots are zero.
    pub fn eval(&self, x: Vec2) -> ([f64; 4], [Vec2; 4]) {
        let mut vals = [0.0; 4];
        let mut grads = [Vec2::zeros(); 4];
        match &self.ecr {
            None => {
                let psi = self.geom.barycentric(x);
                for i in 0..3 {
                    vals[i] = 1.0 - 2.0 * psi[i];
                    grads[i] = -2.0 * self.geom.bary_grads[i];
                }
            }
            Some(c) => {
                let d = self.geom.diameter;
                let s = (x - self.geom.centroid) / d;
                let mono = [1.0, s.x, s.y, s.norm_squared()];
                let mono_grad = [
                    Vec2::zeros(),
                    Vec2::new(1.0 / d, 0.0),
                    Vec2::new(0.0, 1.0 / d),
                    2.0 * s / d,
                ];
                for j in 0..4 {
                    for m in 0..4 {
                        vals[j] += c[(m, j)] * mono[m];
                        grads[j] += c[(m, j)] * mono_grad[m];
                    }
                }
            }
        }
        (vals, grads)
    }

    /// Like [`eval`](Self::eval) but rejects points outside the element.
    pub fn eval_checked(&self, x: Vec2, k: usize) -> Result<([f64; 4], [Vec2; 4])> {
        if !self.geom.contains(x, 1e-12) {
            return Err(Error::PointOutsideElement(x.x, x.y, k));
        }
        Ok(self.eval(x))
    }
}

fn ecr_dual_coefficients(g: &ElementGeometry) -> Matrix4<f64> {
    let d = g.diameter;
    let mono = |x: Vec2| {
        let s = (x - g.centroid) / d;
        [1.0, s.x, s.y, s.norm_squared()]
    };
    let erule = edge_rule(2).expect("static degree");
    let trule = tri_rule(2).expect("static degree");
    let mut dofs = Matrix4::zeros();
    for j in 0..3 {
        let a = g.vertices[(j + 1) % 3];
        let b = g.vertices[(j + 2) % 3];
        for (x, w) in erule.on_segment(a, b) {
            let m = mono(x);
            for c in 0..4 {
                dofs[(j, c)] += w * m[c] / g.edge_lengths[j];
            }
        }
    }
    for (x, w) in trule.on_element(g) {
        let m = mono(x);
        for c in 0..4 {
            dofs[(3, c)] += w * m[c] / g.area;
        }
    }
    dofs.try_inverse()
        .expect("ECR dof matrix is invertible on a nondegenerate triangle")
}

/// Local shape function values on element `k` (checked mode).
pub fn eval_local(kind: SpaceKind, mesh: &Triangulation, k: usize, x: Vec2) -> Result<Vec<f64>> {
    let geom = mesh.geometry(k);
    if !geom.contains(x, 1e-12) {
        return Err(Error::PointOutsideElement(x.x, x.y, k));
    }
    Ok(match kind {
        SpaceKind::Cr => ScalarElement::new(VelocityElement::Cr, geom).eval(x).0[..3].to_vec(),
        SpaceKind::Ecr => ScalarElement::new(VelocityElement::Ecr, geom)
            .eval(x)
            .0
            .to_vec(),
        SpaceKind::P0 | SpaceKind::P0Vector => vec![1.0],
        SpaceKind::RtTensor => {
            return Err(Error::InvalidArgument(
                "RT shape functions are vector valued; use rt_shape".into(),
            ))
        }
    })
}

/// Vector RT shape function of local edge `i` (unit flux along the global
/// edge normal), evaluated at `x`.
pub fn rt_shape(geom: &ElementGeometry, signs: &[f64; 3], i: usize, x: Vec2) -> Vec2 {
    (x - geom.vertices[i]) * (signs[i] / (2.0 * geom.area))
}

/// Coefficient vector attached to a dof map.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField {
    dofs: DofMap,
    coeffs: Vec<f64>,
}

/// CR or ECR velocity restricted to one element.
pub struct LocalVelocity {
    pub element: ScalarElement,
    /// `coeffs[c][j]`
    pub coeffs: [[f64; 4]; 2],
}

impl LocalVelocity {
    pub fn value(&self, x: Vec2) -> Vec2 {
        let (v, _) = self.element.eval(x);
        let n = self.element.len();
        Vec2::new(
            (0..n).map(|j| self.coeffs[0][j] * v[j]).sum(),
            (0..n).map(|j| self.coeffs[1][j] * v[j]).sum(),
        )
    }

    /// `grad[(c, j)] = d_j v_c`.
    pub fn gradient(&self, x: Vec2) -> Mat2 {
        let (_, g) = self.element.eval(x);
        let mut out = Mat2::zeros();
        for c in 0..2 {
            for j in 0..self.element.len() {
                out[(c, 0)] += self.coeffs[c][j] * g[j].x;
                out[(c, 1)] += self.coeffs[c][j] * g[j].y;
            }
        }
        out
    }
}

/// Row-wise RT tensor restricted to one element: row `r` is
/// `a_r + b_r (x - M_K)`.
#[derive(Debug, Clone, Copy)]
pub struct LocalTensor {
    pub at_centroid: Mat2,
    /// Per row divergence / 2.
    pub slope: Vec2,
    pub centroid: Vec2,
}

impl LocalTensor {
    pub fn value(&self, x: Vec2) -> Mat2 {
        let d = x - self.centroid;
        self.at_centroid + self.slope * d.transpose()
    }

    pub fn divergence(&self) -> Vec2 {
        2.0 * self.slope
    }
}

impl DiscreteField {
    pub fn new(dofs: DofMap, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != dofs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{:?} field needs {} coefficients, got {}",
                dofs.kind(),
                dofs.len(),
                coeffs.len()
            )));
        }
        Ok(Self { dofs, coeffs })
    }

    pub fn zeros(dofs: DofMap) -> Self {
        Self {
            coeffs: vec![0.0; dofs.len()],
            dofs,
        }
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn kind(&self) -> SpaceKind {
        self.dofs.kind()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    fn velocity_kind(&self) -> VelocityElement {
        match self.kind() {
            SpaceKind::Cr => VelocityElement::Cr,
            SpaceKind::Ecr => VelocityElement::Ecr,
            other => panic!("{other:?} is not a velocity space"),
        }
    }

    /// CR/ECR field on element `k`.
    pub fn local_velocity(&self, mesh: &Triangulation, k: usize) -> LocalVelocity {
        let element = ScalarElement::new(self.velocity_kind(), mesh.geometry(k));
        let dofs = self.dofs.local_dofs(mesh, k);
        let n = element.len();
        let mut coeffs = [[0.0; 4]; 2];
        for c in 0..2 {
            for j in 0..n {
                coeffs[c][j] = self.coeffs[dofs[c * n + j]];
            }
        }
        LocalVelocity { element, coeffs }
    }

    pub fn velocity_value(&self, mesh: &Triangulation, k: usize, x: Vec2) -> Vec2 {
        self.local_velocity(mesh, k).value(x)
    }

    pub fn velocity_gradient(&self, mesh: &Triangulation, k: usize, x: Vec2) -> Mat2 {
        self.local_velocity(mesh, k).gradient(x)
    }

    /// Value of a P0 scalar field on element `k`.
    pub fn scalar_value(&self, k: usize) -> f64 {
        assert_eq!(self.kind(), SpaceKind::P0);
        self.coeffs[k]
    }

    /// Value of a P0 vector field on element `k`.
    pub fn vector_value(&self, k: usize) -> Vec2 {
        assert_eq!(self.kind(), SpaceKind::P0Vector);
        Vec2::new(self.coeffs[2 * k], self.coeffs[2 * k + 1])
    }

    /// RT tensor field on element `k`.
    pub fn local_tensor(&self, mesh: &Triangulation, k: usize) -> LocalTensor {
        assert_eq!(self.kind(), SpaceKind::RtTensor);
        let g = mesh.geometry(k);
        let signs = mesh.edge_signs(k);
        let edges = mesh.triangle_edges(k);
        let mut at_centroid = Mat2::zeros();
        let mut slope = Vec2::zeros();
        for i in 0..3 {
            let phi = rt_shape(&g, &signs, i, g.centroid);
            let dphi = signs[i] / (2.0 * g.area);
            for r in 0..2 {
                let c = self.coeffs[2 * edges[i] + r];
                at_centroid[(r, 0)] += c * phi.x;
                at_centroid[(r, 1)] += c * phi.y;
                slope[r] += c * dphi;
            }
        }
        LocalTensor {
            at_centroid,
            slope,
            centroid: g.centroid,
        }
    }

    pub fn tensor_value(&self, mesh: &Triangulation, k: usize, x: Vec2) -> Mat2 {
        self.local_tensor(mesh, k).value(x)
    }

    /// Row-wise divergence of an RT field on element `k` (constant).
    pub fn tensor_divergence(&self, mesh: &Triangulation, k: usize) -> Vec2 {
        self.local_tensor(mesh, k).divergence()
    }

    pub fn linear_combination(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        if self.dofs != other.dofs {
            return Err(Error::DimensionMismatch(
                "fields live on different dof maps".into(),
            ));
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(Self {
            dofs: self.dofs,
            coeffs,
        })
    }
}

fn edge_mean_vector(
    mesh: &Triangulation,
    e: usize,
    v: &AnalyticVector,
    degree: usize,
) -> Result<Vec2> {
    let rule = edge_rule(degree)?;
    let [a, b] = mesh.edges()[e];
    let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
    let mut sum = Vec2::zeros();
    let mut len = 0.0;
    for (x, w) in rule.on_segment(pa, pb) {
        sum += w * v.eval(x);
        len += w;
    }
    Ok(sum / len)
}

/// Canonical CR interpolation: edge means of each component.
pub fn interpolate_cr(mesh: &Triangulation, v: &AnalyticVector) -> DiscreteField {
    interpolate_velocity_with_degree(VelocityElement::Cr, mesh, v, INTERPOLATION_DEGREE)
        .expect("static degree")
}

/// Canonical ECR interpolation: edge means and element means.
pub fn interpolate_ecr(mesh: &Triangulation, v: &AnalyticVector) -> DiscreteField {
    interpolate_velocity_with_degree(VelocityElement::Ecr, mesh, v, INTERPOLATION_DEGREE)
        .expect("static degree")
}

/// Canonical velocity interpolation with the functionals evaluated by
/// quadrature of the given degree.
pub fn interpolate_velocity_with_degree(
    kind: VelocityElement,
    mesh: &Triangulation,
    v: &AnalyticVector,
    degree: usize,
) -> Result<DiscreteField> {
    let dofs = DofMap::new(kind.into(), mesh);
    let mut coeffs = vec![0.0; dofs.len()];
    for e in 0..mesh.num_edges() {
        let m = edge_mean_vector(mesh, e, v, degree)?;
        coeffs[2 * e] = m.x;
        coeffs[2 * e + 1] = m.y;
    }
    if kind == VelocityElement::Cr {
        return Ok(DiscreteField { dofs, coeffs });
    }
    let rule = tri_rule(degree)?;
    for k in 0..mesh.num_triangles() {
        let g = mesh.geometry(k);
        let mean: Vec2 = rule
            .on_element(&g)
            .map(|(x, w)| w * v.eval(x))
            .sum::<Vec2>()
            / g.area;
        coeffs[dofs.cell_dof(k, 0)] = mean.x;
        coeffs[dofs.cell_dof(k, 1)] = mean.y;
    }
    Ok(DiscreteField { dofs, coeffs })
}

/// Canonical interpolation into the requested velocity space.
pub fn interpolate_velocity(
    kind: VelocityElement,
    mesh: &Triangulation,
    v: &AnalyticVector,
) -> DiscreteField {
    match kind {
        VelocityElement::Cr => interpolate_cr(mesh, v),
        VelocityElement::Ecr => interpolate_ecr(mesh, v),
    }
}

/// Canonical row-wise RT interpolation (normal fluxes through every edge).
pub fn interpolate_rt(mesh: &Triangulation, sigma: &AnalyticTensor) -> DiscreteField {
    interpolate_rt_with_degree(mesh, sigma, INTERPOLATION_DEGREE).expect("static degree")
}

pub fn interpolate_rt_with_degree(
    mesh: &Triangulation,
    sigma: &AnalyticTensor,
    degree: usize,
) -> Result<DiscreteField> {
    let rule = edge_rule(degree)?;
    let dofs = DofMap::new(SpaceKind::RtTensor, mesh);
    let mut coeffs = vec![0.0; dofs.len()];
    for e in 0..mesh.num_edges() {
        let n = mesh.edge_normal(e);
        let [a, b] = mesh.edges()[e];
        let flux: Vec2 = rule
            .on_segment(mesh.vertices()[a], mesh.vertices()[b])
            .map(|(x, w)| w * (sigma.eval(x) * n))
            .sum();
        coeffs[2 * e] = flux.x;
        coeffs[2 * e + 1] = flux.y;
    }
    Ok(DiscreteField { dofs, coeffs })
}

/// Element means of a scalar function.
pub fn project_p0_scalar(mesh: &Triangulation, f: &AnalyticScalar) -> DiscreteField {
    let rule = tri_rule(INTERPOLATION_DEGREE).expect("static degree");
    let dofs = DofMap::new(SpaceKind::P0, mesh);
    let coeffs = (0..mesh.num_triangles())
        .map(|k| {
            let g = mesh.geometry(k);
            rule.integrate(&g, |x| f.eval(x)) / g.area
        })
        .collect();
    DiscreteField { dofs, coeffs }
}

/// Element means of a vector function.
pub fn project_p0_vector(mesh: &Triangulation, f: &AnalyticVector) -> DiscreteField {
    let rule = tri_rule(INTERPOLATION_DEGREE).expect("static degree");
    let dofs = DofMap::new(SpaceKind::P0Vector, mesh);
    let mut coeffs = vec![0.0; dofs.len()];
    for k in 0..mesh.num_triangles() {
        let g = mesh.geometry(k);
        let mean: Vec2 = rule
            .on_element(&g)
            .map(|(x, w)| w * f.eval(x))
            .sum::<Vec2>()
            / g.area;
        coeffs[2 * k] = mean.x;
        coeffs[2 * k + 1] = mean.y;
    }
    DiscreteField { dofs, coeffs }
}

/// Element means of a discrete field: P0 fields are returned unchanged,
/// CR/ECR velocities map to P0 vectors.
pub fn project_p0(mesh: &Triangulation, f: &DiscreteField) -> Result<DiscreteField> {
    match f.kind() {
        SpaceKind::P0 | SpaceKind::P0Vector => Ok(f.clone()),
        SpaceKind::Cr | SpaceKind::Ecr => {
            let rule = tri_rule(4)?;
            let dofs = DofMap::new(SpaceKind::P0Vector, mesh);
            let mut coeffs = vec![0.0; dofs.len()];
            for k in 0..mesh.num_triangles() {
                let local = f.local_velocity(mesh, k);
                let g = local.element.geometry().clone();
                let mean: Vec2 = rule
                    .on_element(&g)
                    .map(|(x, w)| w * local.value(x))
                    .sum::<Vec2>()
                    / g.area;
                coeffs[2 * k] = mean.x;
                coeffs[2 * k + 1] = mean.y;
            }
            Ok(DiscreteField { dofs, coeffs })
        }
        SpaceKind::RtTensor => Err(Error::InvalidArgument(
            "tensor element means live in recovery::PiecewiseP1".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn edge_mean_of<F: Fn(Vec2) -> f64>(g: &ElementGeometry, j: usize, f: F) -> f64 {
        let rule = edge_rule(8).unwrap();
        rule.integrate(g.vertices[(j + 1) % 3], g.vertices[(j + 2) % 3], f) / g.edge_lengths[j]
    }

    #[test]
    fn cr_shapes_are_dual_to_edge_means() {
        let mesh = Triangulation::build_uniform(3).unwrap();
        for k in [0, 5, 17] {
            let el = ScalarElement::new(VelocityElement::Cr, mesh.geometry(k));
            for i in 0..3 {
                for j in 0..3 {
                    let m = edge_mean_of(el.geometry(), j, |x| el.eval(x).0[i]);
                    assert_relative_eq!(m, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn ecr_bubble_has_zero_edge_means_and_unit_element_mean() {
        let mesh = Triangulation::build_uniform(2).unwrap();
        let rule = tri_rule(8).unwrap();
        for k in 0..mesh.num_triangles() {
            let el = ScalarElement::new(VelocityElement::Ecr, mesh.geometry(k));
            let g = el.geometry().clone();
            for i in 0..4 {
                for j in 0..3 {
                    let m = edge_mean_of(&g, j, |x| el.eval(x).0[i]);
                    assert_relative_eq!(m, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
                }
                let mean = rule.integrate(&g, |x| el.eval(x).0[i]) / g.area;
                assert_relative_eq!(mean, if i == 3 { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
            // Gradients agree with finite differences.
            let x = g.centroid + Vec2::new(0.01, -0.02) * g.diameter;
            let (_, grads) = el.eval(x);
            let step = 1e-6 * g.diameter;
            for i in 0..4 {
                let dx = (el.eval(x + Vec2::new(step, 0.0)).0[i]
                    - el.eval(x - Vec2::new(step, 0.0)).0[i])
                    / (2.0 * step);
                assert_relative_eq!(grads[i].x, dx, max_relative = 1e-6, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn eval_local_rejects_outside_points_and_p0_is_one() {
        let mesh = Triangulation::build_uniform(2).unwrap();
        let g = mesh.geometry(0);
        assert!(matches!(
            eval_local(SpaceKind::Cr, &mesh, 0, Vec2::new(5.0, 5.0)),
            Err(Error::PointOutsideElement(..))
        ));
        assert_eq!(
            eval_local(SpaceKind::P0, &mesh, 0, g.centroid).unwrap(),
            vec![1.0]
        );
        let v = eval_local(SpaceKind::Ecr, &mesh, 0, g.centroid).unwrap();
        assert_eq!(v.len(), 4);
    }

    #[test]
    fn linear_fields_are_reproduced() {
        let mesh = Triangulation::build_uniform(3).unwrap();
        let gmat = Mat2::new(0.3, -1.2, 2.0, 0.7);
        let c = Vec2::new(0.5, -0.25);
        let v = AnalyticVector::affine(c, gmat);
        for kind in [VelocityElement::Cr, VelocityElement::Ecr] {
            let f = interpolate_velocity(kind, &mesh, &v);
            for k in 0..mesh.num_triangles() {
                let g = mesh.geometry(k);
                let x = g.point([0.2, 0.5, 0.3]);
                assert_relative_eq!(f.velocity_value(&mesh, k, x), v.eval(x), epsilon = 1e-13);
                assert_relative_eq!(f.velocity_gradient(&mesh, k, x), gmat, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn ecr_reproduces_radial_quadratic() {
        let mesh = Triangulation::build_uniform(3).unwrap();
        let v = AnalyticVector::new(|x| Vec2::new(x.norm_squared(), 0.0));
        let f = interpolate_ecr(&mesh, &v);
        for k in 0..mesh.num_triangles() {
            let x = mesh.geometry(k).point([0.6, 0.3, 0.1]);
            assert_relative_eq!(f.velocity_value(&mesh, k, x), v.eval(x), epsilon = 1e-12);
        }
    }

    #[test]
    fn cr_interpolant_matches_closed_form_edge_means() {
        let mesh = Triangulation::build_uniform(2).unwrap();
        let v = AnalyticVector::new(|x| Vec2::new(x.x * x.x, 0.0));
        let f = interpolate_cr(&mesh, &v);
        for e in 0..mesh.num_edges() {
            let [a, b] = mesh.edges()[e];
            let (pa, pb) = (mesh.vertices()[a].x, mesh.vertices()[b].x);
            // Mean of x^2 along a segment from pa to pb (in x).
            let exact = (pa * pa + pa * pb + pb * pb) / 3.0;
            assert_relative_eq!(f.coeffs()[2 * e], exact, epsilon = 1e-14);
            assert_eq!(f.coeffs()[2 * e + 1], 0.0);
        }
        // Interpolated edge means are the edge means of the interpolant.
        for k in 0..mesh.num_triangles() {
            let local = f.local_velocity(&mesh, k);
            let g = local.element.geometry().clone();
            for j in 0..3 {
                let m = edge_mean_of(&g, j, |x| local.value(x).x);
                let e = mesh.triangle_edges(k)[j];
                assert_relative_eq!(m, f.coeffs()[2 * e], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rt_interpolation_reproduces_constants_and_fluxes() {
        let mesh = Triangulation::build_uniform(3).unwrap();
        let c = Mat2::new(1.0, -2.0, 0.5, 3.0);
        let f = interpolate_rt(&mesh, &AnalyticTensor::constant(c));
        for k in 0..mesh.num_triangles() {
            let x = mesh.geometry(k).point([0.1, 0.1, 0.8]);
            assert_relative_eq!(f.tensor_value(&mesh, k, x), c, epsilon = 1e-13);
            assert!(f.tensor_divergence(&mesh, k).norm() < 1e-12);
        }
        // Affine field: fluxes of the interpolant equal those of the field.
        let a1 = Mat2::new(0.2, 1.0, -0.4, 0.3);
        let a2 = Mat2::new(-1.0, 0.6, 0.9, 0.1);
        let sigma = AnalyticTensor::affine(c, a1, a2);
        let f = interpolate_rt(&mesh, &sigma);
        let rule = edge_rule(4).unwrap();
        for k in 0..mesh.num_triangles() {
            let g = mesh.geometry(k);
            let local = f.local_tensor(&mesh, k);
            for i in 0..3 {
                let (a, b) = (g.vertices[(i + 1) % 3], g.vertices[(i + 2) % 3]);
                let lhs: Vec2 = rule
                    .on_segment(a, b)
                    .map(|(x, w)| w * (local.value(x) * g.normals[i]))
                    .sum();
                let rhs: Vec2 = rule
                    .on_segment(a, b)
                    .map(|(x, w)| w * (sigma.eval(x) * g.normals[i]))
                    .sum();
                assert_relative_eq!(lhs, rhs, epsilon = 1e-13);
            }
            // Divergence of the interpolant equals the element mean divergence.
            let div = Vec2::new(a1[(0, 0)] + a2[(0, 1)], a1[(1, 0)] + a2[(1, 1)]);
            assert_relative_eq!(local.divergence(), div, epsilon = 1e-11);
        }
    }

    #[test]
    fn rt_interpolant_has_exact_element_mean_divergence() {
        let mesh = Triangulation::build_uniform(3).unwrap();
        let sigma = AnalyticTensor::new(|x| {
            Mat2::new(x.x.sin() * x.y, x.y.exp(), (x.x * x.y).cos(), x.x.powi(3))
        })
        .with_partials(|x| {
            [
                Mat2::new(
                    x.x.cos() * x.y,
                    0.0,
                    -x.y * (x.x * x.y).sin(),
                    3.0 * x.x * x.x,
                ),
                Mat2::new(x.x.sin(), x.y.exp(), -x.x * (x.x * x.y).sin(), 0.0),
            ]
        });
        let f = interpolate_rt_with_degree(&mesh, &sigma, 12).unwrap();
        let rule = tri_rule(10).unwrap();
        let d = sigma.partials.as_ref().unwrap();
        for k in 0..mesh.num_triangles() {
            let g = mesh.geometry(k);
            let mean_div: Vec2 = rule
                .on_element(&g)
                .map(|(x, w)| {
                    let [d1, d2] = d(x);
                    w * Vec2::new(d1[(0, 0)] + d2[(0, 1)], d1[(1, 0)] + d2[(1, 1)])
                })
                .sum::<Vec2>()
                / g.area;
            assert_relative_eq!(f.tensor_divergence(&mesh, k), mean_div, epsilon = 1e-11);
        }
    }

    #[test]
    fn p0_projection_properties() {
        let mesh = Triangulation::build_uniform(3).unwrap();
        let c = project_p0_scalar(&mesh, &AnalyticScalar::new(|_| 2.5));
        assert!(c.coeffs().iter().all(|&v| (v - 2.5).abs() < 1e-14));
        assert_eq!(project_p0(&mesh, &c).unwrap(), c);
        let lin = project_p0_vector(
            &mesh,
            &AnalyticVector::affine(Vec2::new(1.0, 2.0), Mat2::new(1.0, 2.0, 3.0, 4.0)),
        );
        for k in 0..mesh.num_triangles() {
            let m = mesh.geometry(k).centroid;
            let expected = Vec2::new(1.0, 2.0) + Mat2::new(1.0, 2.0, 3.0, 4.0) * m;
            assert_relative_eq!(lin.vector_value(k), expected, epsilon = 1e-13);
            // Mean of x - M_K vanishes.
        }
        let centred: Vec<f64> = (0..mesh.num_triangles())
            .map(|k| {
                let g = mesh.geometry(k);
                tri_rule(2).unwrap().integrate(&g, |x| (x - g.centroid).x) / g.area
            })
            .collect();
        assert!(centred.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn dof_maps_are_bijective() {
        let mesh = Triangulation::build_uniform(3).unwrap();
        for kind in [
            SpaceKind::Cr,
            SpaceKind::Ecr,
            SpaceKind::P0,
            SpaceKind::P0Vector,
            SpaceKind::RtTensor,
        ] {
            let map = DofMap::new(kind, &mesh);
            let mut seen = vec![false; map.len()];
            for k in 0..mesh.num_triangles() {
                for d in map.local_dofs(&mesh, k) {
                    seen[d] = true;
                }
            }
            assert!(seen.iter().all(|&s| s), "{kind:?}");
        }
        let ecr = DofMap::new(SpaceKind::Ecr, &mesh);
        assert_eq!(ecr.len(), 2 * mesh.num_edges() + 2 * mesh.num_triangles());
        assert!(DiscreteField::new(ecr, vec![0.0; 3]).is_err());
    }
}

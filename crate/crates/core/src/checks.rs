//! Structural identities of the discretizations, evaluated numerically.
//! Each function returns a relative defect that vanishes up to rounding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{assemble_rt_mixed, assemble_stokes, Load};
use crate::error::Result;
use crate::fields::{AnalyticTensor, AnalyticVector};
use crate::mesh::{ElementGeometry, Triangulation};
use crate::quadrature::{tri_rule, MAX_TRIANGLE_DEGREE};
use crate::solver::solve_source;
use crate::spaces::{
    interpolate_rt, interpolate_velocity_with_degree, project_p0_vector, DiscreteField, DofMap,
    VelocityElement,
};
use crate::{Mat2, Vec2};

/// Uniformly distributed point of a triangle.
pub fn random_point(geom: &ElementGeometry, rng: &mut impl Rng) -> Vec2 {
    let (mut a, mut b) = (rng.random::<f64>(), rng.random::<f64>());
    if a + b > 1.0 {
        (a, b) = (1.0 - a, 1.0 - b);
    }
    geom.point([a, b, 1.0 - a - b])
}

/// Largest of `|(grad_h (v - Pi_h v), grad_h v_h)|` and
/// `|(div_h (v - Pi_h v), q_h)|` over `samples` random `v_h`, `q_h`,
/// relative to `||grad v|| ||grad_h v_h||` evaluated in the same quadrature.
pub fn commuting_defect(
    kind: VelocityElement,
    mesh: &Triangulation,
    v: &AnalyticVector,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let grad_v = v
        .gradient
        .as_ref()
        .ok_or(crate::Error::MissingDerivatives("velocity gradient"))?;
    let rule = tri_rule(MAX_TRIANGLE_DEGREE)?;
    let interp = interpolate_velocity_with_degree(kind, mesh, v, MAX_TRIANGLE_DEGREE)?;
    let map = DofMap::new(kind.into(), mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let coeffs: Vec<f64> = (0..map.len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let vh = DiscreteField::new(map, coeffs)?;
        let q: Vec<f64> = (0..mesh.num_triangles())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let (mut grad_term, mut div_term, mut scale) = (0.0, 0.0, 0.0);
        for k in 0..mesh.num_triangles() {
            let li = interp.local_velocity(mesh, k);
            let lv = vh.local_velocity(mesh, k);
            for (x, w) in rule.on_element(li.element.geometry()) {
                let diff = grad_v(x) - li.gradient(x);
                let gv = lv.gradient(x);
                grad_term += w * diff.component_mul(&gv).sum();
                div_term += w * diff.trace() * q[k];
                scale += w * grad_v(x).norm() * gv.norm();
            }
        }
        worst = worst.max(grad_term.abs().max(div_term.abs()) / scale.max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

/// Pointwise defects of the RT/CR and RT/ECR equivalences for a piecewise
/// constant source `f`:
/// `sigma_RT = grad_h u_CR + p_CR I - f/2 (x) (x - M_K)` and
/// `sigma_RT = grad_h u_ECR + p_ECR I`,
/// at `points` random points per element, relative to `max |sigma_RT|`.
pub fn equivalence_defects(
    mesh: &Triangulation,
    f: &DiscreteField,
    points: usize,
    seed: u64,
) -> Result<[f64; 2]> {
    let load = Load::ElementMeans(f);
    let rt = solve_source(&assemble_rt_mixed(mesh, load)?)?;
    let cr = solve_source(&assemble_stokes(VelocityElement::Cr, mesh, load)?)?;
    let ecr = solve_source(&assemble_stokes(VelocityElement::Ecr, mesh, load)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut d_cr, mut d_ecr, mut scale) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..mesh.num_triangles() {
        let g = mesh.geometry(k);
        let fk = f.vector_value(k);
        for _ in 0..points {
            let x = random_point(&g, &mut rng);
            let s = rt.primary.tensor_value(mesh, k, x);
            let s_cr = cr.primary.velocity_gradient(mesh, k, x)
                + Mat2::identity() * cr.constraint.scalar_value(k)
                - fk * (x - g.centroid).transpose() * 0.5;
            let s_ecr = ecr.primary.velocity_gradient(mesh, k, x)
                + Mat2::identity() * ecr.constraint.scalar_value(k);
            d_cr = d_cr.max((s - s_cr).amax());
            d_ecr = d_ecr.max((s - s_ecr).amax());
            scale = scale.max(s.amax());
        }
    }
    let scale = scale.max(f64::MIN_POSITIVE);
    Ok([d_cr / scale, d_ecr / scale])
}

/// Piecewise constant source with random element values.
pub fn random_p0_source(mesh: &Triangulation, seed: u64) -> DiscreteField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let map = DofMap::new(crate::spaces::SpaceKind::P0Vector, mesh);
    let coeffs = (0..map.len())
        .map(|_| rng.random_range(-10.0..10.0))
        .collect();
    DiscreteField::new(map, coeffs).expect("length matches")
}

/// Defects of `xi = Pi_RT sigma - sigma_RT` being elementwise constant and
/// divergence free, for `sigma` with `div sigma = -f`:
/// `[max_K h |slope_K|, max_K |div xi|_K]` relative to `max |xi|`.
pub fn xi_defects(
    mesh: &Triangulation,
    sigma: &AnalyticTensor,
    f: &AnalyticVector,
) -> Result<[f64; 2]> {
    let fh = project_p0_vector(mesh, f);
    let rt = solve_source(&assemble_rt_mixed(mesh, Load::ElementMeans(&fh))?)?;
    let xi = interpolate_rt(mesh, sigma).linear_combination(1.0, &rt.primary, -1.0)?;
    let (mut var, mut div, mut scale) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..mesh.num_triangles() {
        let t = xi.local_tensor(mesh, k);
        var = var.max(mesh.h() * t.slope.amax());
        div = div.max(t.divergence().amax());
        scale = scale.max(t.at_centroid.amax());
    }
    let scale = scale.max(f64::MIN_POSITIVE);
    Ok([var / scale, div / scale])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Example1;

    #[test]
    fn commuting_properties_hold_for_random_discrete_functions() {
        let mesh = Triangulation::build_uniform(3).unwrap();
        let v = Example1::new().velocity;
        for kind in [VelocityElement::Cr, VelocityElement::Ecr] {
            let d = commuting_defect(kind, &mesh, &v, 20, 7).unwrap();
            assert!(d < 1e-10, "{kind:?} {d:e}");
        }
    }

    #[test]
    fn equivalences_hold_for_piecewise_constant_sources() {
        let mesh = Triangulation::build_uniform(3).unwrap();
        let f = random_p0_source(&mesh, 1);
        let [cr, ecr] = equivalence_defects(&mesh, &f, 3, 2).unwrap();
        assert!(cr < 1e-9 && ecr < 1e-9, "{cr:e} {ecr:e}");
    }

    #[test]
    fn xi_is_constant_and_divergence_free() {
        let ex = Example1::new();
        let mesh = Triangulation::build_uniform(3).unwrap();
        let [var, div] = xi_defects(&mesh, &ex.pseudostress, &ex.source).unwrap();
        assert!(var < 1e-9 && div < 1e-9, "{var:e} {div:e}");
    }

    #[test]
    fn random_points_stay_inside() {
        let mesh = Triangulation::build_uniform(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for k in 0..mesh.num_triangles() {
            let g = mesh.geometry(k);
            for _ in 0..10 {
                assert!(g.contains(random_point(&g, &mut rng), 1e-14));
            }
        }
    }
}

use stokes_core::assembly::{assemble_mass, assemble_rt_mixed, assemble_stokes, Load};
use stokes_core::expansion::extrapolate;
use stokes_core::metrics::relative_eigen_error;
use stokes_core::recovery::{kh_apply, recover_all, Method, PiecewiseTensor};
use stokes_core::solver::{solve_eigs, solve_source};
use stokes_core::spaces::project_p0_vector;
use stokes_core::{Example1, Triangulation, VelocityElement};

const LAMBDA_1: f64 = 52.344691169;

fn first_eigenvalue(kind: VelocityElement, level: u32) -> f64 {
    let mesh = Triangulation::build_uniform(level).unwrap();
    let sys = assemble_stokes(kind, &mesh, Load::Zero).unwrap();
    let mass = assemble_mass(kind, &mesh).unwrap();
    solve_eigs(&sys, &mass, 1).unwrap()[0].lambda
}

#[test]
fn cr_eigenvalues_approach_from_below_and_extrapolation_helps() {
    let coarse = first_eigenvalue(VelocityElement::Cr, 3);
    let fine = first_eigenvalue(VelocityElement::Cr, 4);
    assert!(coarse < fine && fine < LAMBDA_1);
    assert!((relative_eigen_error(LAMBDA_1, fine) - 3.2962e-2).abs() < 1e-5);
    let exp = relative_eigen_error(LAMBDA_1, extrapolate(fine, coarse));
    assert!(exp < 0.2 * relative_eigen_error(LAMBDA_1, fine));
}

#[test]
fn ecr_eigenvalue_is_a_lower_bound() {
    for level in 2..=4 {
        assert!(first_eigenvalue(VelocityElement::Ecr, level) < LAMBDA_1);
    }
}

#[test]
fn ecr_recovery_equals_recovery_of_the_rt_pseudostress() {
    let ex = Example1::new();
    let mesh = Triangulation::build_uniform(4).unwrap();
    let fh = project_p0_vector(&mesh, &ex.source);
    let load = Load::ElementMeans(&fh);
    let ecr = solve_source(&assemble_stokes(VelocityElement::Ecr, &mesh, load).unwrap()).unwrap();
    let rt = solve_source(&assemble_rt_mixed(&mesh, load).unwrap()).unwrap();
    let a = recover_all(Method::Ecr, &mesh, &ecr.primary, Some(&ecr.constraint)).unwrap();
    let b = kh_apply(
        &PiecewiseTensor::from_rt(&mesh, &rt.primary).unwrap(),
        &mesh,
    )
    .unwrap();
    let worst = a
        .sigma
        .values
        .iter()
        .zip(&b.values)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst:e}");
}

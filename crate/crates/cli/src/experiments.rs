//! End-to-end experiment drivers. Levels run in ascending order and every
//! random choice is seeded, so reruns are bit-identical.

use anyhow::{Context, Result};
use serde::Serialize;
use stokes_core::assembly::{assemble_mass, assemble_rt_mixed, assemble_stokes, Load};
use stokes_core::expansion::{
    compute_constants, constants_difference, extrapolate, identity_terms, ExpansionConstants,
};
use stokes_core::metrics::{
    broken_norm, discrete_distance, rate_table, relative_eigen_error, Approx, ConvergenceTable,
    ErrorReport, Exact, Metric, NormKind,
};
use stokes_core::recovery::{
    interp_pressure, interp_velocity_cr, interp_velocity_ecr, pressure_of_rt, recover_all,
    PiecewiseTensor,
};
use stokes_core::solver::{solve_eigs, solve_source};
use stokes_core::spaces::{interpolate_rt, project_p0_vector};
use stokes_core::{AnalyticTensor, Example1, Triangulation, VelocityElement};

use crate::config::{Element, Experiment, RunConfig};

/// Tolerance on `|ratio - 1|` of successive `(lambda - lambda_h) / h^2`.
pub const PLATEAU_TOLERANCE: f64 = 0.05;
/// Minimal observed decay order of the identity residuals.
pub const IDENTITY_ORDER: f64 = 3.5;

fn mesh(level: u32) -> Result<Triangulation> {
    Triangulation::build_uniform(level).with_context(|| format!("building level {level}"))
}

fn grad_u_tensor(ex: &Example1) -> AnalyticTensor {
    let g = ex
        .velocity
        .gradient
        .clone()
        .expect("example velocity has a gradient");
    AnalyticTensor::new(move |x| g(x))
}

/// All source-problem metrics of one element on one level, normalized by
/// `||f||`.
pub fn source_report(element: Element, level: u32) -> Result<ErrorReport> {
    let ex = Example1::new();
    let mesh = mesh(level)?;
    let ctx = || format!("{element:?} source problem on level {level}");
    let fh = project_p0_vector(&mesh, &ex.source);
    let load = Load::ElementMeans(&fh);
    let f_norm = broken_norm(NormKind::L2, Approx::Zero, Exact::Vector(&ex.source), &mesh)?;
    let sigma = &ex.pseudostress;
    let pressure = Exact::Scalar(&ex.pressure);
    let grad_u = grad_u_tensor(&ex);
    let mut report = ErrorReport::new(level, mesh.h());
    let mut put = |m: Metric, v: f64| report.insert(m, v / f_norm);
    match element.velocity() {
        Some(kind) => {
            let sol = solve_source(&assemble_stokes(kind, &mesh, load)?).with_context(ctx)?;
            let (u, p) = (&sol.primary, &sol.constraint);
            put(
                Metric::Pressure,
                broken_norm(NormKind::L2, Approx::Field(p), pressure, &mesh)?,
            );
            put(
                Metric::VelocityGradient,
                broken_norm(
                    NormKind::H1Broken,
                    Approx::Field(u),
                    Exact::Vector(&ex.velocity),
                    &mesh,
                )?,
            );
            let pi_p = interp_pressure(sigma, &mesh);
            put(
                Metric::PressureSuperclose,
                discrete_distance(Approx::Field(p), Approx::Field(&pi_p), &mesh)?,
            );
            let pi_u = match kind {
                VelocityElement::Cr => interp_velocity_cr(sigma, &mesh),
                VelocityElement::Ecr => interp_velocity_ecr(sigma, &mesh),
            };
            let grad_h = PiecewiseTensor::gradient_of(&mesh, u)?;
            put(
                Metric::GradientSuperclose,
                discrete_distance(Approx::Tensor(&grad_h), Approx::Tensor(&pi_u), &mesh)?,
            );
            let rec = recover_all(element.method(), &mesh, u, Some(p))?;
            put(
                Metric::RecoveredPressure,
                broken_norm(
                    NormKind::L2,
                    Approx::LiftedScalar(&rec.pressure),
                    pressure,
                    &mesh,
                )?,
            );
            put(
                Metric::RecoveredGradient,
                broken_norm(
                    NormKind::L2,
                    Approx::LiftedTensor(&rec.grad_u),
                    Exact::Tensor(&grad_u),
                    &mesh,
                )?,
            );
        }
        None => {
            let sol = solve_source(&assemble_rt_mixed(&mesh, load)?).with_context(ctx)?;
            let s = &sol.primary;
            let p = pressure_of_rt(&mesh, s)?;
            put(
                Metric::Pressure,
                broken_norm(NormKind::L2, Approx::Field(&p), pressure, &mesh)?,
            );
            let pi_p = interp_pressure(sigma, &mesh);
            put(
                Metric::PressureSuperclose,
                discrete_distance(Approx::Field(&p), Approx::Field(&pi_p), &mesh)?,
            );
            put(
                Metric::Pseudostress,
                broken_norm(NormKind::L2, Approx::Field(s), Exact::Tensor(sigma), &mesh)?,
            );
            let pi_rt = interpolate_rt(&mesh, sigma);
            put(
                Metric::PseudostressSuperclose,
                discrete_distance(Approx::Field(&pi_rt), Approx::Field(s), &mesh)?,
            );
            let rec = recover_all(element.method(), &mesh, s, None)?;
            put(
                Metric::RecoveredPseudostress,
                broken_norm(
                    NormKind::L2,
                    Approx::LiftedTensor(&rec.sigma),
                    Exact::Tensor(sigma),
                    &mesh,
                )?,
            );
            put(
                Metric::RecoveredPressure,
                broken_norm(
                    NormKind::L2,
                    Approx::LiftedScalar(&rec.pressure),
                    pressure,
                    &mesh,
                )?,
            );
            put(
                Metric::RecoveredGradient,
                broken_norm(
                    NormKind::L2,
                    Approx::LiftedTensor(&rec.grad_u),
                    Exact::Tensor(&grad_u),
                    &mesh,
                )?,
            );
        }
    }
    Ok(report)
}

pub fn run_source(cfg: &RunConfig) -> Result<ConvergenceTable> {
    let reports = cfg
        .levels
        .iter()
        .map(|l| source_report(cfg.element, l))
        .collect::<Result<Vec<_>>>()?;
    single_or_table(reports)
}

fn single_or_table(reports: Vec<ErrorReport>) -> Result<ConvergenceTable> {
    if reports.len() == 1 {
        let r = &reports[0];
        let rows = r
            .metrics
            .iter()
            .map(|(&metric, &value)| stokes_core::metrics::TableRow {
                level: r.level,
                h: r.h,
                metric,
                value,
                rate: None,
            })
            .collect();
        return Ok(ConvergenceTable { rows });
    }
    Ok(rate_table(&reports)?)
}

/// The `k` smallest eigenvalues on one level.
pub fn eigenvalues(kind: VelocityElement, level: u32, k: usize) -> Result<Vec<f64>> {
    let mesh = mesh(level)?;
    let sys = assemble_stokes(kind, &mesh, Load::Zero)?;
    let mass = assemble_mass(kind, &mesh)?;
    let pairs = solve_eigs(&sys, &mass, k)
        .with_context(|| format!("{kind:?} eigenproblem on level {level}"))?;
    Ok(pairs.into_iter().map(|p| p.lambda).collect())
}

/// Eigenvalues per level with relative errors and extrapolation from
/// consecutive levels; eigenvalues are matched by sorted index.
pub fn eigen_reports(levels: &[(u32, f64, Vec<f64>)], refs: &[f64]) -> Vec<ErrorReport> {
    let mut out: Vec<ErrorReport> = Vec::new();
    for (idx, (level, h, values)) in levels.iter().enumerate() {
        let mut r = ErrorReport::new(*level, *h);
        let coarser = idx
            .checked_sub(1)
            .map(|j| &levels[j])
            .filter(|c| c.0 + 1 == *level);
        for (i, &lam) in values.iter().enumerate() {
            r.insert(Metric::EigenvalueValue(i + 1), lam);
            if let Some(&reference) = refs.get(i) {
                r.insert(
                    Metric::Eigenvalue(i + 1),
                    relative_eigen_error(reference, lam),
                );
            }
            if let Some(&coarse) = coarser.and_then(|c| c.2.get(i)) {
                let e = extrapolate(lam, coarse);
                r.insert(Metric::ExtrapolatedValue(i + 1), e);
                if let Some(&reference) = refs.get(i) {
                    r.insert(
                        Metric::Extrapolated(i + 1),
                        relative_eigen_error(reference, e),
                    );
                }
            }
        }
        out.push(r);
    }
    out
}

pub fn run_eigs(cfg: &RunConfig) -> Result<ConvergenceTable> {
    let kind = cfg
        .element
        .velocity()
        .context("the eigenvalue experiment supports cr and ecr only")?;
    let mut levels = Vec::new();
    for level in cfg.levels.iter() {
        let h = mesh(level)?.h();
        levels.push((level, h, eigenvalues(kind, level, cfg.k)?));
    }
    single_or_table(eigen_reports(&levels, &cfg.ref_eigs))
}

/// Constants on the finest level, checked against every coarser level.
pub fn run_constants(cfg: &RunConfig) -> Result<ExpansionConstants> {
    let finest = compute_constants(&mesh(cfg.levels.last)?)?;
    for level in cfg.levels.iter() {
        let c = compute_constants(&mesh(level)?)?;
        let d = constants_difference(&c, &finest);
        anyhow::ensure!(
            d < 1e-12,
            "constants on level {level} differ from level {} by {d:e}",
            cfg.levels.last
        );
    }
    Ok(finest)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionReport {
    pub table: ConvergenceTable,
    pub checks: Vec<Check>,
}

/// Identity residuals on every level, and the `(lambda - lambda_h) / h^2`
/// plateau of the first CR and ECR eigenvalues.
pub fn run_expansion_check(cfg: &RunConfig) -> Result<ExpansionReport> {
    let ex = Example1::new();
    let reference = cfg.ref_eigs[0];
    let mut reports = Vec::new();
    for level in cfg.levels.iter() {
        let mesh = mesh(level)?;
        let c = compute_constants(&mesh)?;
        let terms = identity_terms(&mesh, &ex.velocity, &ex.pseudostress, &c)?;
        let mut r = ErrorReport::new(level, mesh.h());
        for (i, res) in terms.residuals().iter().enumerate() {
            r.insert(Metric::IdentityResidual(i + 1), res.abs());
        }
        let h2 = mesh.h() * mesh.h();
        let cr = eigenvalues(VelocityElement::Cr, level, 1)?[0];
        let ecr = eigenvalues(VelocityElement::Ecr, level, 1)?[0];
        r.insert(Metric::CrCoefficient, (reference - cr) / h2);
        r.insert(Metric::EcrCoefficient, (reference - ecr) / h2);
        reports.push(r);
    }
    let table = single_or_table(reports.clone())?;
    let mut checks = Vec::new();
    if let [.., coarse, fine] = reports.as_slice() {
        for i in 1..=3 {
            let m = Metric::IdentityResidual(i);
            let order = table.rate(fine.level, m).unwrap_or(f64::NAN);
            checks.push(Check {
                name: format!("identity_{i}_order"),
                value: order,
                threshold: IDENTITY_ORDER,
                pass: order >= IDENTITY_ORDER,
            });
        }
        for m in [Metric::CrCoefficient, Metric::EcrCoefficient] {
            let ratio = fine.get(m).unwrap_or(f64::NAN) / coarse.get(m).unwrap_or(f64::NAN);
            checks.push(Check {
                name: format!("{}_ratio", m.name()),
                value: ratio,
                threshold: PLATEAU_TOLERANCE,
                pass: (ratio - 1.0).abs() <= PLATEAU_TOLERANCE,
            });
        }
    }
    Ok(ExpansionReport { table, checks })
}

/// Result of one CLI run.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Table(ConvergenceTable),
    Constants {
        level: u32,
        h: f64,
        constants: ExpansionConstants,
    },
    Expansion(ExpansionReport),
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    if let Some(path) = &cfg.mesh_dump {
        let dump = mesh(cfg.levels.last)?.dump();
        std::fs::write(path, serde_json::to_string(&dump)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(match cfg.experiment {
        Experiment::Source => Outcome::Table(run_source(cfg)?),
        Experiment::Eigs => Outcome::Table(run_eigs(cfg)?),
        Experiment::Constants => {
            let h = mesh(cfg.levels.last)?.h();
            Outcome::Constants {
                level: cfg.levels.last,
                h,
                constants: run_constants(cfg)?,
            }
        }
        Experiment::ExpansionCheck => Outcome::Expansion(run_expansion_check(cfg)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::LevelRange;

    #[test]
    fn eigen_reports_extrapolate_consecutive_levels() {
        let levels = vec![
            (3, 0.5, vec![60.0, 100.0]),
            (4, 0.25, vec![54.0, 95.0]),
            (6, 0.0625, vec![52.5, 92.2]),
        ];
        let r = eigen_reports(&levels, &[52.0]);
        assert_eq!(r[0].get(Metric::ExtrapolatedValue(1)), None);
        assert_eq!(r[1].get(Metric::ExtrapolatedValue(1)), Some(52.0));
        assert_eq!(r[1].get(Metric::Extrapolated(1)), Some(0.0));
        assert_eq!(
            r[1].get(Metric::ExtrapolatedValue(2)),
            Some(93.0 + 1.0 / 3.0)
        );
        assert_eq!(r[1].get(Metric::Extrapolated(2)), None);
        assert_eq!(r[2].get(Metric::ExtrapolatedValue(1)), None);
    }

    #[test]
    fn source_run_reports_all_metrics() {
        let cfg = RunConfig::new(Experiment::Source, Element::Cr, LevelRange::new(2, 3));
        let t = run_source(&cfg).unwrap();
        assert_eq!(t.rows.len(), 12);
        assert!(t.rows.iter().all(|r| r.value >= 0.0));
        let cfg = RunConfig::new(Experiment::Source, Element::Rt, LevelRange::new(3, 3));
        let t = run_source(&cfg).unwrap();
        assert!(t.value(3, Metric::RecoveredPseudostress).is_some());
    }

    #[test]
    fn constants_run_is_level_invariant() {
        let cfg = RunConfig::new(Experiment::Constants, Element::Cr, LevelRange::new(2, 4));
        let c = run_constants(&cfg).unwrap();
        assert!((c.gamma[(0, 0)] - 1.0 / 16.0).abs() < 1e-14);
    }
}

//! Broken norms, error reports and convergence-rate tables.

use std::collections::BTreeMap;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fields::{AnalyticScalar, AnalyticTensor, AnalyticVector};
use crate::mesh::Triangulation;
use crate::quadrature::tri_rule;
use crate::recovery::{CrLifted, PiecewiseP1};
use crate::spaces::{DiscreteField, SpaceKind};
use crate::Vec2;

pub const NORM_DEGREE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    /// Elementwise gradient of a CR or ECR velocity.
    H1Broken,
}

/// Approximate side of an error norm.
#[derive(Clone, Copy)]
pub enum Approx<'a> {
    Field(&'a DiscreteField),
    Scalar(&'a PiecewiseP1<1>),
    Tensor(&'a PiecewiseP1<4>),
    LiftedScalar(&'a CrLifted<1>),
    LiftedTensor(&'a CrLifted<4>),
    Zero,
}

/// Exact side of an error norm.
#[derive(Clone, Copy)]
pub enum Exact<'a> {
    Scalar(&'a AnalyticScalar),
    Vector(&'a AnalyticVector),
    Tensor(&'a AnalyticTensor),
    Zero,
}

/// Up to four components; unused slots stay zero.
type Values = ([f64; 4], usize);

fn mismatch(msg: &str) -> Error {
    Error::DimensionMismatch(msg.to_string())
}

fn mat(m: crate::Mat2) -> Values {
    ([m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]], 4)
}

fn vec2(v: Vec2) -> Values {
    ([v.x, v.y, 0.0, 0.0], 2)
}

impl Approx<'_> {
    fn check(&self, mesh: &Triangulation) -> Result<()> {
        let n = mesh.num_triangles();
        let ok = match self {
            Approx::Field(f) => f.dofs().matches(mesh),
            Approx::Scalar(f) => f.len() == n,
            Approx::Tensor(f) => f.len() == n,
            Approx::LiftedScalar(f) => f.values.len() == mesh.num_edges(),
            Approx::LiftedTensor(f) => f.values.len() == mesh.num_edges(),
            Approx::Zero => true,
        };
        if ok {
            Ok(())
        } else {
            Err(mismatch("approximation does not live on this mesh"))
        }
    }

    fn sample(
        &self,
        kind: NormKind,
        mesh: &Triangulation,
        k: usize,
        x: Vec2,
    ) -> Result<Option<Values>> {
        if kind == NormKind::H1Broken {
            return match self {
                Approx::Field(f) if matches!(f.kind(), SpaceKind::Cr | SpaceKind::Ecr) => {
                    Ok(Some(mat(f.velocity_gradient(mesh, k, x))))
                }
                Approx::Zero => Ok(None),
                _ => Err(mismatch("broken H1 norm needs a CR or ECR velocity")),
            };
        }
        Ok(Some(match self {
            Approx::Field(f) => match f.kind() {
                SpaceKind::P0 => ([f.scalar_value(k), 0.0, 0.0, 0.0], 1),
                SpaceKind::P0Vector => vec2(f.vector_value(k)),
                SpaceKind::Cr | SpaceKind::Ecr => vec2(f.velocity_value(mesh, k, x)),
                SpaceKind::RtTensor => mat(f.tensor_value(mesh, k, x)),
            },
            Approx::Scalar(f) => ([f.eval(k, x)[0], 0.0, 0.0, 0.0], 1),
            Approx::Tensor(f) => (f.eval(k, x), 4),
            Approx::LiftedScalar(f) => ([f.eval(mesh, k, x)[0], 0.0, 0.0, 0.0], 1),
            Approx::LiftedTensor(f) => (f.eval(mesh, k, x), 4),
            Approx::Zero => return Ok(None),
        }))
    }
}

impl Exact<'_> {
    fn sample(&self, kind: NormKind, x: Vec2) -> Result<Option<Values>> {
        if kind == NormKind::H1Broken {
            return match self {
                Exact::Vector(v) => {
                    let g = v
                        .gradient
                        .as_ref()
                        .ok_or(Error::MissingDerivatives("velocity gradient"))?;
                    Ok(Some(mat(g(x))))
                }
                Exact::Zero => Ok(None),
                _ => Err(mismatch("broken H1 norm needs an exact velocity")),
            };
        }
        Ok(Some(match self {
            Exact::Scalar(s) => ([s.eval(x), 0.0, 0.0, 0.0], 1),
            Exact::Vector(v) => vec2(v.eval(x)),
            Exact::Tensor(t) => mat(t.eval(x)),
            Exact::Zero => return Ok(None),
        }))
    }
}

/// `|| a - b ||` over the mesh, elementwise quadrature of degree 8.
pub fn broken_norm(
    kind: NormKind,
    a: Approx<'_>,
    b: Exact<'_>,
    mesh: &Triangulation,
) -> Result<f64> {
    a.check(mesh)?;
    let rule = tri_rule(NORM_DEGREE)?;
    let mut total = 0.0;
    for k in 0..mesh.num_triangles() {
        for (x, w) in rule.on_element(&mesh.geometry(k)) {
            let diff = match (a.sample(kind, mesh, k, x)?, b.sample(kind, x)?) {
                (Some((va, na)), Some((vb, nb))) => {
                    if na != nb {
                        return Err(mismatch(&format!("{na} components against {nb}")));
                    }
                    std::array::from_fn::<f64, 4, _>(|c| va[c] - vb[c])
                }
                (Some((v, _)), None) | (None, Some((v, _))) => v,
                (None, None) => [0.0; 4],
            };
            total += w * diff.iter().map(|d| d * d).sum::<f64>();
        }
    }
    Ok(total.sqrt())
}

/// `|| a - b ||` for two fields of the same kind, both elementwise
/// polynomial; uses the same quadrature as [`broken_norm`].
pub fn discrete_distance(a: Approx<'_>, b: Approx<'_>, mesh: &Triangulation) -> Result<f64> {
    a.check(mesh)?;
    b.check(mesh)?;
    let rule = tri_rule(NORM_DEGREE)?;
    let mut total = 0.0;
    for k in 0..mesh.num_triangles() {
        for (x, w) in rule.on_element(&mesh.geometry(k)) {
            let va = a.sample(NormKind::L2, mesh, k, x)?;
            let vb = b.sample(NormKind::L2, mesh, k, x)?;
            let diff = match (va, vb) {
                (Some((va, na)), Some((vb, nb))) => {
                    if na != nb {
                        return Err(mismatch(&format!("{na} components against {nb}")));
                    }
                    std::array::from_fn::<f64, 4, _>(|c| va[c] - vb[c])
                }
                (Some((v, _)), None) | (None, Some((v, _))) => v,
                (None, None) => [0.0; 4],
            };
            total += w * diff.iter().map(|d| d * d).sum::<f64>();
        }
    }
    Ok(total.sqrt())
}

/// `|lambda_ref - lambda_h| / lambda_ref`
pub fn relative_eigen_error(reference: f64, approx: f64) -> f64 {
    (reference - approx).abs() / reference
}

/// Named quantity tracked across levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    /// `||p - p_h||`
    Pressure,
    /// `||grad_h (u - u_h)||`
    VelocityGradient,
    /// `||p_h - Pi_h^p sigma||`
    PressureSuperclose,
    /// `||grad_h u_h - Pi^u sigma||`
    GradientSuperclose,
    /// `||p - K_h p_h||`
    RecoveredPressure,
    /// `||grad u - K_h grad_h u_h||`
    RecoveredGradient,
    /// `||sigma - sigma_RT||`
    Pseudostress,
    /// `||Pi_RT sigma - sigma_RT||`
    PseudostressSuperclose,
    /// `||sigma - K_h Pi_h^0 sigma_RT||`
    RecoveredPseudostress,
    /// Relative error of the i-th eigenvalue (1-based).
    Eigenvalue(usize),
    /// Relative error of the i-th extrapolated eigenvalue (1-based).
    Extrapolated(usize),
    /// Raw i-th eigenvalue (1-based).
    EigenvalueValue(usize),
    /// Raw i-th extrapolated eigenvalue (1-based).
    ExtrapolatedValue(usize),
    /// Residual of one of the three interpolation-error identities.
    IdentityResidual(usize),
    /// `(lambda - lambda_CR) / h^2` for the first eigenvalue.
    CrCoefficient,
    /// `(lambda - lambda_ECR) / h^2` for the first eigenvalue.
    EcrCoefficient,
}

impl Metric {
    pub fn name(&self) -> String {
        match self {
            Metric::Pressure => "p-p_h".into(),
            Metric::VelocityGradient => "grad(u-u_h)".into(),
            Metric::PressureSuperclose => "p_h-Pi_p(sigma)".into(),
            Metric::GradientSuperclose => "grad(u_h)-Pi_u(sigma)".into(),
            Metric::RecoveredPressure => "p-K_h(p_h)".into(),
            Metric::RecoveredGradient => "grad(u)-K_h(grad(u_h))".into(),
            Metric::Pseudostress => "sigma-sigma_RT".into(),
            Metric::PseudostressSuperclose => "Pi_RT(sigma)-sigma_RT".into(),
            Metric::RecoveredPseudostress => "sigma-K_h(Pi_0(sigma_RT))".into(),
            Metric::Eigenvalue(i) => format!("lambda_{i}_rel_err"),
            Metric::Extrapolated(i) => format!("lambda_{i}_exp_rel_err"),
            Metric::EigenvalueValue(i) => format!("lambda_{i}"),
            Metric::ExtrapolatedValue(i) => format!("lambda_{i}_exp"),
            Metric::IdentityResidual(i) => format!("identity_{i}_residual"),
            Metric::CrCoefficient => "cr_h2_coefficient".into(),
            Metric::EcrCoefficient => "ecr_h2_coefficient".into(),
        }
    }

    /// Whether a convergence rate is meaningful for this quantity.
    pub fn has_rate(&self) -> bool {
        !matches!(
            self,
            Metric::EigenvalueValue(_)
                | Metric::ExtrapolatedValue(_)
                | Metric::CrCoefficient
                | Metric::EcrCoefficient
        )
    }
}

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub level: u32,
    pub h: f64,
    pub metrics: BTreeMap<Metric, f64>,
}

impl ErrorReport {
    pub fn new(level: u32, h: f64) -> Self {
        Self {
            level,
            h,
            metrics: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, metric: Metric, value: f64) {
        self.metrics.insert(metric, value);
    }

    pub fn get(&self, metric: Metric) -> Option<f64> {
        self.metrics.get(&metric).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub level: u32,
    pub h: f64,
    pub metric: Metric,
    pub value: f64,
    /// `log2(e_2h / e_h)` against the next coarser level, when defined.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct ConvergenceTable {
    pub rows: Vec<TableRow>,
}

impl ConvergenceTable {
    pub fn rate(&self, level: u32, metric: Metric) -> Option<f64> {
        self.row(level, metric).and_then(|r| r.rate)
    }

    pub fn value(&self, level: u32, metric: Metric) -> Option<f64> {
        self.row(level, metric).map(|r| r.value)
    }

    pub fn row(&self, level: u32, metric: Metric) -> Option<&TableRow> {
        self.rows
            .iter()
            .find(|r| r.level == level && r.metric == metric)
    }
}

/// `log2(coarse / fine)`, absent when either error is zero or not finite.
pub fn observed_rate(coarse: f64, fine: f64) -> Option<f64> {
    let r = (coarse / fine).log2();
    (coarse > 0.0 && fine > 0.0 && r.is_finite()).then_some(r)
}

/// Rows ordered by level, then metric; rates against the immediately
/// coarser level only.
pub fn rate_table(reports: &[ErrorReport]) -> Result<ConvergenceTable> {
    if reports.len() < 2 {
        return Err(Error::InvalidArgument(
            "a rate table needs at least two levels".into(),
        ));
    }
    let mut sorted: Vec<&ErrorReport> = reports.iter().collect();
    sorted.sort_by_key(|r| r.level);
    let mut rows = Vec::new();
    for (i, rep) in sorted.iter().enumerate() {
        let coarser = i
            .checked_sub(1)
            .map(|j| sorted[j])
            .filter(|c| c.level + 1 == rep.level);
        for (&metric, &value) in &rep.metrics {
            let rate = coarser
                .filter(|_| metric.has_rate())
                .and_then(|c| c.get(metric))
                .and_then(|coarse| observed_rate(coarse.abs(), value.abs()));
            rows.push(TableRow {
                level: rep.level,
                h: rep.h,
                metric,
                value,
                rate,
            });
        }
    }
    Ok(ConvergenceTable { rows })
}

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use stokes_core::recovery::Method;
use stokes_core::VelocityElement;

/// Reference eigenvalues of the unit square (first three).
pub const REFERENCE_EIGENVALUES: [f64; 3] = [52.344691169, 92.124393972, 92.124393972];

pub const MAX_LEVEL: u32 = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Source,
    Eigs,
    Constants,
    ExpansionCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Element {
    Cr,
    Ecr,
    Rt,
}

impl Element {
    pub fn velocity(self) -> Option<VelocityElement> {
        match self {
            Element::Cr => Some(VelocityElement::Cr),
            Element::Ecr => Some(VelocityElement::Ecr),
            Element::Rt => None,
        }
    }

    pub fn method(self) -> Method {
        match self {
            Element::Cr => Method::Cr,
            Element::Ecr => Method::Ecr,
            Element::Rt => Method::Rt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Inclusive level range written `A..B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LevelRange {
    pub first: u32,
    pub last: u32,
}

impl LevelRange {
    pub fn new(first: u32, last: u32) -> Self {
        Self { first, last }
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> {
        self.first..=self.last
    }

    pub fn len(&self) -> usize {
        (self.last + 1).saturating_sub(self.first) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl FromStr for LevelRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |t: &str| {
            t.trim()
                .parse::<u32>()
                .map_err(|e| format!("bad level `{t}`: {e}"))
        };
        match s.split_once("..") {
            Some((a, b)) => Ok(Self::new(parse(a)?, parse(b.trim_start_matches('='))?)),
            None => {
                let l = parse(s)?;
                Ok(Self::new(l, l))
            }
        }
    }
}

impl fmt::Display for LevelRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.first, self.last)
    }
}

#[derive(Debug, Clone, PartialEq, Parser, Serialize)]
#[command(
    name = "stokes",
    version,
    about = "Stokes finite element experiments on uniform meshes of the unit square"
)]
pub struct RunConfig {
    #[arg(long, value_enum, default_value_t = Experiment::Source)]
    pub experiment: Experiment,
    #[arg(long, value_enum, default_value_t = Element::Cr)]
    pub element: Element,
    /// Inclusive range of refinement levels, e.g. `3..6`.
    #[arg(long, default_value = "3..6")]
    pub levels: LevelRange,
    /// Number of eigenvalues.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, value_delimiter = ',', default_values_t = REFERENCE_EIGENVALUES.to_vec())]
    pub ref_eigs: Vec<f64>,
    /// Writes the finest mesh as JSON to this path.
    #[arg(long)]
    pub mesh_dump: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(experiment: Experiment, element: Element, levels: LevelRange) -> Self {
        Self {
            experiment,
            element,
            levels,
            k: 1,
            out: None,
            format: Format::Csv,
            ref_eigs: REFERENCE_EIGENVALUES.to_vec(),
            mesh_dump: None,
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let LevelRange { first, last } = self.levels;
        anyhow::ensure!(
            (1..=MAX_LEVEL).contains(&first) && (1..=MAX_LEVEL).contains(&last),
            "levels must lie in 1..{MAX_LEVEL}, got {}",
            self.levels
        );
        anyhow::ensure!(first <= last, "level range {} is empty", self.levels);
        anyhow::ensure!(self.k >= 1, "k must be at least 1");
        anyhow::ensure!(
            self.ref_eigs.iter().all(|v| v.is_finite() && *v > 0.0),
            "reference eigenvalues must be positive"
        );
        if self.experiment == Experiment::Eigs {
            anyhow::ensure!(
                self.element != Element::Rt,
                "the eigenvalue experiment supports cr and ecr only"
            );
        }
        if matches!(self.experiment, Experiment::ExpansionCheck) {
            anyhow::ensure!(first >= 2, "the expansion check needs levels >= 2");
        }
        Ok(())
    }
}

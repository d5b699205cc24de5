//! CSV and JSON serialization. Every number is rounded to 12 significant
//! digits once, so both formats carry identical values.

use std::io::Write;

use anyhow::Result;
use serde::Serialize;
use serde_json::{json, Value};
use stokes_core::expansion::Mat8;
use stokes_core::metrics::ConvergenceTable;

use crate::config::{Format, RunConfig};
use crate::experiments::Outcome;

pub const CSV_HEADER: [&str; 5] = ["level", "h", "metric", "value", "rate"];

/// `x` in scientific notation with 12 significant digits.
pub fn sig12(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn round12(x: f64) -> f64 {
    sig12(x).parse().unwrap_or(x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub level: u32,
    pub h: f64,
    pub metric: String,
    pub value: f64,
    pub rate: Option<f64>,
}

impl Record {
    fn new(level: u32, h: f64, metric: String, value: f64, rate: Option<f64>) -> Self {
        Self {
            level,
            h: round12(h),
            metric,
            value: round12(value),
            rate: rate.map(round12),
        }
    }
}

fn table_records(t: &ConvergenceTable) -> Vec<Record> {
    t.rows
        .iter()
        .map(|r| Record::new(r.level, r.h, r.metric.name(), r.value, r.rate))
        .collect()
}

fn matrix_records(level: u32, h: f64, name: &str, m: &Mat8) -> Vec<Record> {
    (0..8)
        .flat_map(|i| (0..8).map(move |j| (i, j)))
        .map(|(i, j)| {
            Record::new(
                level,
                h,
                format!("{name}_{}_{}", i + 1, j + 1),
                m[(i, j)],
                None,
            )
        })
        .collect()
}

pub fn records(outcome: &Outcome) -> Vec<Record> {
    match outcome {
        Outcome::Table(t) => table_records(t),
        Outcome::Expansion(e) => table_records(&e.table),
        Outcome::Constants {
            level,
            h,
            constants,
        } => {
            let mut out = matrix_records(*level, *h, "gamma", &constants.gamma);
            out.extend(matrix_records(*level, *h, "eta", &constants.eta));
            out.extend(
                constants
                    .zeta
                    .iter()
                    .enumerate()
                    .map(|(i, z)| Record::new(*level, *h, format!("zeta_{}", i + 1), *z, None)),
            );
            out
        }
    }
}

pub fn write_csv<W: Write>(outcome: &Outcome, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CSV_HEADER)?;
    for r in records(outcome) {
        wr.write_record([
            r.level.to_string(),
            sig12(r.h),
            r.metric,
            sig12(r.value),
            r.rate.map(sig12).unwrap_or_default(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

fn rows_of(m: &Mat8) -> Vec<Vec<f64>> {
    (0..8)
        .map(|i| (0..8).map(|j| round12(m[(i, j)])).collect())
        .collect()
}

pub fn to_json(cfg: &RunConfig, outcome: &Outcome) -> Result<Value> {
    let mut v = json!({ "config": cfg, "records": records(outcome) });
    match outcome {
        Outcome::Table(_) => {}
        Outcome::Expansion(e) => {
            let checks: Vec<Value> = e
                .checks
                .iter()
                .map(|c| json!({"name": c.name, "value": round12(c.value), "threshold": c.threshold, "pass": c.pass}))
                .collect();
            v["checks"] = Value::Array(checks);
        }
        Outcome::Constants { constants, .. } => {
            v["constants"] = json!({
                "gamma": rows_of(&constants.gamma),
                "eta": rows_of(&constants.eta),
                "zeta": constants.zeta.map(round12),
                "signature": constants.signature.map(round12),
            });
        }
    }
    Ok(v)
}

pub fn write_json<W: Write>(cfg: &RunConfig, outcome: &Outcome, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, &to_json(cfg, outcome)?)?;
    writeln!(w)?;
    Ok(())
}

pub fn write_outcome<W: Write>(cfg: &RunConfig, outcome: &Outcome, w: W) -> Result<()> {
    match cfg.format {
        Format::Csv => write_csv(outcome, w),
        Format::Json => write_json(cfg, outcome, w),
    }
}

/// Machine-readable error document.
pub fn error_json(err: &anyhow::Error) -> Value {
    json!({ "error": format!("{err:#}") })
}

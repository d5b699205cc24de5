//! Experiment drivers and result serialization for the `stokes` binary.

pub mod config;
pub mod experiments;
pub mod output;

pub use config::{Element, Experiment, Format, LevelRange, RunConfig};
pub use experiments::{run, Outcome};

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use stokes_cli::output::{error_json, write_outcome};
use stokes_cli::{run, Format, RunConfig};

fn execute(cfg: &RunConfig) -> anyhow::Result<()> {
    let outcome = run(cfg)?;
    match &cfg.out {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            write_outcome(cfg, &outcome, &mut w)?;
            w.flush()?;
        }
        None => write_outcome(cfg, &outcome, io::stdout().lock())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cfg = RunConfig::parse();
    match execute(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if cfg.format == Format::Json {
                println!("{}", error_json(&err));
            } else {
                eprintln!("error: {err:#}");
            }
            ExitCode::FAILURE
        }
    }
}

//! Experiment runner behind the `gptt-audit` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod table;

use std::io::Write;
use std::path::PathBuf;

use clap::Parser;

use config::{Config, Experiment, Format, Overrides};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "gptt-audit", version, about = "Privacy audits and reconstruction attacks for threshold-testing mechanisms")]
pub struct Args {
    /// Experiment to run; overrides the `experiment` key of the config file.
    #[arg(long, value_enum)]
    pub experiment: Option<Experiment>,

    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

/// Validates, runs and writes one experiment.
pub fn execute(args: &Args) -> Result<(), CliError> {
    let cfg = match &args.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let overrides = Overrides {
        experiment: args.experiment,
        seed: args.seed,
        out: args.out.clone(),
        format: args.format,
    };
    let resolved = config::resolve(&cfg, &overrides)?;
    let table = experiments::run(&resolved)?;
    let text = table.render(resolved.format);
    match &resolved.output_path {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io(format!("stdout: {e}"))),
    }
}

use std::process::ExitCode;

use clap::Parser;
use gptt_audit_cli::{execute, Args};

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gptt-audit: {e}");
            ExitCode::from(e.code)
        }
    }
}

//! `rapm` — command-line front end of the RAPM finite element pricer.
//!
//! Exit status: 0 on success, 2 on configuration errors (the message names
//! the offending flag), 3 on numerical failure (with a diagnostics dump),
//! 1 when an output file cannot be written.

// `!(x > 0.0)` is used on purpose: unlike `x <= 0.0` it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod settings;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::Failure;
use settings::Settings;

fn settings(command: &Command) -> Result<Settings, Failure> {
    let common = command.common();
    let mut s = Settings::default();
    if let Some(path) = &common.config {
        s.apply_file(path)?;
    }
    for (key, value) in common.flags().into_iter().chain(command.extra_flags()) {
        s.apply(key, value)?;
    }
    Ok(s)
}

fn run(command: &Command, s: &Settings) -> Result<(), Failure> {
    match command {
        Command::Price(_) => commands::run_price(s),
        Command::Surface { .. } => commands::run_surface(s),
        Command::Converge { .. } => commands::run_converge(s),
        Command::Compare { .. } => commands::run_compare(s),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, prefix) = match settings(&cli.command) {
        Ok(s) => (run(&cli.command, &s), s.out),
        Err(f) => (Err(f), String::new()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            commands::dump_failure(&prefix, &f);
            ExitCode::from(f.exit_code())
        }
    }
}

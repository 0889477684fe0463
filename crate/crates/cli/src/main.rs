// Copyright 2026 The qbattery Authors
// SPDX-License-Identifier: Apache-2.0

//! `qbattery` command-line harness.
//!
//! Exit codes: 0 success, 1 config error, 2 validation failure, 3 runtime error.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Experiment;
pub use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "qbattery", version, about = "Measurement-charged quantum battery simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct CommonArgs {
    /// JSON run configuration; omitted fields take their defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (config key `output_path`).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Override a config field by its dotted key, e.g. `params.beta=0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Single-round n̄/n̄_th over charger population q and measurement angle θ.
    SweepThetaQ(CommonArgs),
    /// n̄ and success probability against a fixed measurement interval.
    IntervalSweep(CommonArgs),
    /// Power-on charging protocol.
    PowerOn(CommonArgs),
    /// Power-off charging protocol.
    PowerOff(CommonArgs),
    /// Population histograms with matched Gaussian references.
    Histograms(CommonArgs),
    /// Charging under damping, against the closed protocol.
    Lindblad(CommonArgs),
    /// Oracle and consistency checks; exit code 2 on failure.
    Validate(CommonArgs),
}

impl Command {
    fn split(self) -> (Experiment, CommonArgs) {
        match self {
            Command::SweepThetaQ(a) => (Experiment::SweepThetaQ, a),
            Command::IntervalSweep(a) => (Experiment::IntervalSweep, a),
            Command::PowerOn(a) => (Experiment::PowerOn, a),
            Command::PowerOff(a) => (Experiment::PowerOff, a),
            Command::Histograms(a) => (Experiment::Histograms, a),
            Command::Lindblad(a) => (Experiment::Lindblad, a),
            Command::Validate(a) => (Experiment::Validate, a),
        }
    }
}

fn execute(experiment: Experiment, args: CommonArgs) -> Result<(), CliError> {
    let mut config = config::load(args.config.as_deref(), &args.set)?;
    if let Some(declared) = config.experiment {
        if declared != experiment {
            return Err(CliError::Config(format!(
                "config declares experiment {declared:?} but the command is {experiment:?}"
            )));
        }
    }
    config.experiment = Some(experiment);
    if let Some(out) = args.out {
        config.output_path = out;
    }
    for path in commands::run(experiment, &config)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (experiment, args) = cli.command.split();
    match execute(experiment, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qbattery: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

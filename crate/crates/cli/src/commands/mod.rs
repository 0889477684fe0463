// Copyright 2026 The qbattery Authors
// SPDX-License-Identifier: Apache-2.0

mod open;
mod protocol;
mod sweep;
pub mod validate;

use std::path::PathBuf;

use crate::config::{Experiment, RunConfig};
use crate::CliError;

/// Runs one experiment and returns the artifacts it wrote.
pub fn run(experiment: Experiment, config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    match experiment {
        Experiment::SweepThetaQ => sweep::sweep_theta_q(config),
        Experiment::IntervalSweep => sweep::interval_sweep(config),
        Experiment::PowerOn | Experiment::PowerOff | Experiment::Histograms => protocol::run(config, experiment),
        Experiment::Lindblad => open::lindblad(config),
        Experiment::Validate => validate::validate(config).map(|()| Vec::new()),
    }
}

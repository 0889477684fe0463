// Copyright 2026 The qbattery Authors
// SPDX-License-Identifier: Apache-2.0

//! Multi-round charging protocols: per-round thermodynamics, population
//! histograms and trajectory metadata.

use std::path::PathBuf;

use qbattery::scheduler::{run_protocol, run_sampled};
use qbattery::states::{diagonal_fidelity, gaussian_reference};
use qbattery::{BatteryState, Scheme, Trajectory};
use serde_json::json;

use crate::config::{Experiment, RunConfig};
use crate::output::{artifact, num, write_json, CsvOut};
use crate::CliError;

pub const ROUND_HEADER: [&str; 11] =
    ["m", "tau", "probability", "cumulative", "energy", "ergotropy", "ratio", "power", "mean", "variance", "fano"];

fn simulate(config: &RunConfig, scheme: Scheme) -> Result<(Trajectory, serde_json::Value), CliError> {
    let params = &config.params;
    let initial = BatteryState::thermal(params);
    let policy = config.policy(scheme);
    let s = &config.schedule;
    match s.seed {
        None => Ok((run_protocol(&initial, params, scheme, s.n_rounds, policy)?, serde_json::Value::Null)),
        Some(seed) => {
            let run = run_sampled(&initial, params, scheme, s.n_rounds, policy, seed, s.max_restarts)?;
            let meta = json!({
                "seed": seed,
                "completed": run.completed,
                "restarts": run.restarts,
                "total_rounds": run.total_rounds,
            });
            Ok((run.trajectory, meta))
        }
    }
}

/// Matched-moment Gaussian and its fidelity with `state`, when both exist.
fn gaussian_match(state: &BatteryState) -> Option<(BatteryState, f64)> {
    let reference = gaussian_reference(state.mean_occupation(), state.occupation_variance(), state.n_levels()).ok()?;
    let f = diagonal_fidelity(state, &reference).ok()?;
    Some((reference, f))
}

fn write_rounds(config: &RunConfig, traj: &Trajectory, stem: &str) -> Result<PathBuf, CliError> {
    let mut csv = CsvOut::create(artifact(&config.output_path, &format!("{stem}.csv"))?, &ROUND_HEADER)?;
    for (m, snap) in traj.snapshots().iter().enumerate() {
        let state = traj.state(m)?;
        let rec = m.checked_sub(1).map(|i| &traj.rounds[i]);
        csv.row([
            m.to_string(),
            num(rec.map(|r| r.tau)),
            num(rec.map(|r| r.probability)),
            num(Some(if m == 0 { 1.0 } else { traj.cumulative[m - 1] })),
            num(Some(snap.energy)),
            num(Some(snap.ergotropy)),
            num(Some(snap.ratio)),
            num(snap.power),
            num(Some(state.mean_occupation())),
            num(Some(state.occupation_variance())),
            num(state.fano_ratio().ok()),
        ])?;
    }
    csv.finish()
}

fn write_histograms(config: &RunConfig, traj: &Trajectory, stem: &str) -> Result<(PathBuf, Vec<serde_json::Value>), CliError> {
    let mut csv = CsvOut::create(
        artifact(&config.output_path, &format!("{stem}_histograms.csv"))?,
        &["m", "n", "population", "gaussian"],
    )?;
    let mut summary = Vec::new();
    for &m in &config.schedule.histogram_rounds {
        let Ok(state) = traj.state(m) else {
            log::warn!("histogram round {m} is beyond the {} completed rounds", traj.len());
            continue;
        };
        let matched = gaussian_match(state);
        for (n, p) in state.populations().iter().enumerate() {
            csv.row([m.to_string(), n.to_string(), num(Some(*p)), num(matched.as_ref().map(|(g, _)| g.populations()[n]))])?;
        }
        summary.push(json!({
            "m": m,
            "mean": state.mean_occupation(),
            "variance": state.occupation_variance(),
            "fano": state.fano_ratio().ok(),
            "gaussian_fidelity": matched.map(|(_, f)| f),
        }));
    }
    Ok((csv.finish()?, summary))
}

pub fn run(config: &RunConfig, experiment: Experiment) -> Result<Vec<PathBuf>, CliError> {
    let scheme = match experiment {
        Experiment::PowerOn => Scheme::PowerOn,
        Experiment::PowerOff => Scheme::PowerOff,
        _ => config.scheme(config.schedule.scheme),
    };
    let stem = experiment.file_stem();
    let (traj, sampling) = simulate(config, scheme)?;
    let mut written = Vec::new();
    if experiment != Experiment::Histograms {
        written.push(write_rounds(config, &traj, stem)?);
    }
    let (hist_path, histograms) = write_histograms(config, &traj, stem)?;
    written.push(hist_path);

    let last = traj.state(traj.len())?;
    let snap = qbattery::thermo::ThermoSnapshot::of(last, &traj.params);
    let meta = json!({
        "schema": crate::config::SCHEMA_VERSION,
        "experiment": experiment,
        "scheme": scheme.name(),
        "requested_rounds": config.schedule.n_rounds,
        "completed_rounds": traj.len(),
        "truncated": traj.truncated.as_ref().map(|t| json!({ "round": t.round, "error": t.error.to_string() })),
        "cumulative_probability": traj.cumulative_probability(),
        "final": {
            "energy": snap.energy,
            "ergotropy": snap.ergotropy,
            "ratio": snap.ratio,
            "mean": last.mean_occupation(),
            "variance": last.occupation_variance(),
        },
        "histograms": histograms,
        "sampling": sampling,
        "config": config,
    });
    written.push(write_json(artifact(&config.output_path, &format!("{stem}.json"))?, &meta)?);
    Ok(written)
}

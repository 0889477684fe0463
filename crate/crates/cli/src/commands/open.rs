// Copyright 2026 The qbattery Authors
// SPDX-License-Identifier: Apache-2.0

//! Charging under battery and charger damping, compared round by round
//! with the closed protocol.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use qbattery::lindblad::{dissipative_round, DissipationParams, LindbladGenerator};
use qbattery::scheduler::{choose_tau, run_protocol};
use qbattery::thermo::{energy, ergotropy};
use qbattery::{BatteryState, Error, RoundRecord};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::output::{artifact, num, CsvOut};
use crate::CliError;

fn dissipation(config: &RunConfig, gamma: f64) -> Result<DissipationParams, CliError> {
    let d = &config.dissipation;
    let base = DissipationParams::thermal(&config.params, gamma, gamma)?;
    Ok(DissipationParams::new(gamma, gamma, d.nbar_th.unwrap_or(base.nbar_th), d.nbar_th_c.unwrap_or(base.nbar_th_c))?)
}

/// Open-system rounds until done, a round after the first that cannot run,
/// or the deadline.
fn open_run(config: &RunConfig, diss: &DissipationParams, deadline: Instant) -> Result<Vec<RoundRecord>, CliError> {
    let params = &config.params;
    let scheme = config.scheme(config.schedule.scheme);
    let policy = config.policy(scheme);
    let generator = LindbladGenerator::new(params, diss);
    let ode = config.ode();
    let initial = BatteryState::thermal(params);
    let mut rounds: Vec<RoundRecord> = Vec::new();
    let mut cumulative = 1.0;
    for m in 1..=config.schedule.n_rounds {
        if Instant::now() > deadline {
            return Err(CliError::Runtime(format!(
                "lindblad budget of {} s exhausted at γ = {} before round {m}",
                config.dissipation.budget_seconds, diss.gamma_b
            )));
        }
        let state = rounds.last().map_or(&initial, |r| &r.post_state);
        let step = choose_tau(state, params, scheme, policy, cumulative)
            .and_then(|tau| dissipative_round(state, params, &generator, scheme, tau, &ode));
        match step {
            Ok(rec) => {
                cumulative *= rec.probability;
                rounds.push(rec);
            }
            Err(Error::ZeroProbability { .. } | Error::NoCharging) if m > 1 => {
                log::info!("γ = {}: truncated at round {m}", diss.gamma_b);
                break;
            }
            Err(e) => return Err(Error::Round { round: m, source: Box::new(e) }.into()),
        }
    }
    Ok(rounds)
}

pub fn lindblad(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let params = &config.params;
    let started = Instant::now();
    let deadline = started + Duration::from_secs_f64(config.dissipation.budget_seconds);
    let scheme = config.scheme(config.schedule.scheme);
    let initial = BatteryState::thermal(params);
    let closed = run_protocol(&initial, params, scheme, config.schedule.n_rounds, config.policy(scheme))?;
    let closed_energy = closed.energies();

    let runs = config
        .dissipation
        .gammas
        .par_iter()
        .map(|&gamma| {
            let diss = dissipation(config, gamma)?;
            open_run(config, &diss, deadline).map(|r| (gamma, r))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut csv = CsvOut::create(
        artifact(&config.output_path, "lindblad.csv")?,
        &["gamma", "m", "tau", "probability", "cumulative", "energy", "ergotropy", "closed_energy", "relative_deviation"],
    )?;
    for (gamma, rounds) in &runs {
        let mut cumulative = 1.0;
        for (i, rec) in rounds.iter().enumerate() {
            let m = i + 1;
            cumulative *= rec.probability;
            let e = energy(&rec.post_state, params);
            let reference = closed_energy.get(m).copied();
            let deviation = reference.filter(|r| *r != 0.0).map(|r| (e - r).abs() / r);
            csv.row([
                num(Some(*gamma)),
                m.to_string(),
                num(Some(rec.tau)),
                num(Some(rec.probability)),
                num(Some(cumulative)),
                num(Some(e)),
                num(Some(ergotropy(&rec.post_state, params))),
                num(reference),
                num(deviation),
            ])?;
        }
    }
    log::info!("lindblad runs took {:.1} s", started.elapsed().as_secs_f64());
    Ok(vec![csv.finish()?])
}

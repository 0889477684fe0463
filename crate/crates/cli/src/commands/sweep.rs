// Copyright 2026 The qbattery Authors
// SPDX-License-Identifier: Apache-2.0

//! Single-round heat map over the charger preparation and measurement
//! basis, and multi-round curves over a fixed measurement interval.

use std::f64::consts::PI;
use std::path::PathBuf;

use qbattery::round::population_update;
use qbattery::scheduler::{choose_tau, execute_round};
use qbattery::{BatteryState, ChargerSpec, Error, IntervalPolicy, Scheme};
use rayon::prelude::*;

use crate::config::{PolicyName, RunConfig};
use crate::output::{artifact, num, CsvOut};
use crate::CliError;

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let last = (points - 1) as f64;
    (0..points).map(|k| if k + 1 == points { hi } else { lo + (hi - lo) * k as f64 / last }).collect()
}

pub fn sweep_theta_q(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let params = &config.params;
    let sweep = &config.sweep;
    let thermal = BatteryState::thermal(params);
    let before = thermal.mean_occupation();
    if !(before > 0.0) {
        return Err(CliError::Config("the θ–q sweep needs a thermal battery with n̄ > 0 (finite β)".into()));
    }
    let thetas = linspace(0.0, PI, sweep.theta_points);
    let qs = linspace(0.0, 1.0, sweep.q_points);
    let mut cells = Vec::with_capacity(sweep.coherences.len() * thetas.len() * qs.len());
    for &c in &sweep.coherences {
        for &theta in &thetas {
            cells.extend(qs.iter().map(|&q| (c, theta, q)));
        }
    }
    let rows = cells
        .par_iter()
        .map(|&(c, theta, q)| {
            let charger = ChargerSpec::new(q, theta, c)?;
            match population_update(&thermal, charger, params, sweep.tau) {
                Ok((post, p)) => Ok((Some(post.mean_occupation() / before), Some(p))),
                Err(Error::ZeroProbability { .. }) => Ok((None, Some(0.0))),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let mut csv = CsvOut::create(artifact(&config.output_path, "sweep_theta_q.csv")?, &["c", "theta", "q", "ratio", "probability"])?;
    for (&(c, theta, q), (ratio, p)) in cells.iter().zip(rows) {
        csv.row([num(Some(c)), num(Some(theta)), num(Some(q)), num(ratio), num(p)])?;
    }
    Ok(vec![csv.finish()?])
}

/// Mean, probability and cumulative probability after one round.
type RoundPoint = (f64, f64, f64);

/// Per-round (mean, probability, cumulative) for `rounds` rounds at a fixed τ;
/// `None` once an outcome has zero probability.
fn fixed_tau_run(state: &BatteryState, config: &RunConfig, scheme: Scheme, tau: f64, rounds: usize) -> Result<Vec<Option<RoundPoint>>, Error> {
    let mut out = Vec::with_capacity(rounds);
    let mut state = state.clone();
    let mut cumulative = 1.0;
    for _ in 0..rounds {
        match execute_round(&state, &config.params, scheme, tau) {
            Ok(rec) => {
                cumulative *= rec.probability;
                out.push(Some((rec.post_state.mean_occupation(), rec.probability, cumulative)));
                state = rec.post_state;
            }
            Err(Error::ZeroProbability { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    out.resize(rounds, None);
    Ok(out)
}

pub fn interval_sweep(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let params = &config.params;
    let iv = &config.interval;
    let thermal = BatteryState::thermal(params);
    let taus = linspace(iv.tau_min, iv.tau_max, iv.points);
    let max_round = *iv.rounds.iter().max().expect("validated non-empty");

    let mut curves = CsvOut::create(
        artifact(&config.output_path, "interval_sweep.csv")?,
        &["scheme", "m", "tau", "mean", "probability", "cumulative", "mean_initial"],
    )?;
    let mut markers = CsvOut::create(
        artifact(&config.output_path, "interval_markers.csv")?,
        &["scheme", "policy", "tau", "mean", "probability"],
    )?;
    let initial_mean = num(Some(thermal.mean_occupation()));
    for &name in &iv.schemes {
        let scheme = config.scheme(name);
        let runs = taus
            .par_iter()
            .map(|&tau| fixed_tau_run(&thermal, config, scheme, tau, max_round))
            .collect::<Result<Vec<_>, Error>>()?;
        for &m in &iv.rounds {
            for (tau, run) in taus.iter().zip(&runs) {
                let cell = run[m - 1];
                curves.row([
                    scheme.name().to_owned(),
                    m.to_string(),
                    num(Some(*tau)),
                    num(cell.map(|c| c.0)),
                    num(cell.map(|c| c.1)),
                    num(cell.map(|c| c.2)),
                    initial_mean.clone(),
                ])?;
            }
        }

        let mut policies = vec![(PolicyName::Numeric, IntervalPolicy::Numeric(config.grid()))];
        match scheme {
            Scheme::PowerOff => policies.push((PolicyName::PowerOffCompromise, config.policy(Scheme::PowerOff))),
            _ => policies.insert(0, (PolicyName::Analytic, IntervalPolicy::Analytic)),
        }
        for (pname, policy) in policies {
            let label = serde_json::to_value(pname)?.as_str().unwrap_or_default().to_owned();
            let chosen = match choose_tau(&thermal, params, scheme, policy, 1.0) {
                Ok(tau) => Some(tau),
                Err(Error::NoCharging) => None,
                Err(e) => return Err(e.into()),
            };
            let outcome = match chosen {
                Some(tau) => match execute_round(&thermal, params, scheme, tau) {
                    Ok(rec) => Some((rec.post_state.mean_occupation(), rec.probability)),
                    Err(Error::ZeroProbability { .. }) => None,
                    Err(e) => return Err(e.into()),
                },
                None => None,
            };
            markers.row([scheme.name().to_owned(), label, num(chosen), num(outcome.map(|o| o.0)), num(outcome.map(|o| o.1))])?;
        }
    }
    Ok(vec![curves.finish()?, markers.finish()?])
}

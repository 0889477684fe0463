// Copyright 2026 The qbattery Authors
// SPDX-License-Identifier: Apache-2.0

//! Self-check gate: the closed-form propagator against two oracles, the
//! Kraus channel's completeness, and the master equation's closed limit.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use qbattery::lindblad::{dissipative_protocol, DissipationParams};
use qbattery::ode::OdeOptions;
use qbattery::propagator::{
    block_coefficients, joint_hamiltonian, joint_index, joint_unitary, povm_apply, KrausKind, KrausSet, Qubit,
};
use qbattery::scheduler::run_protocol;
use qbattery::{BatteryState, IntervalPolicy, Scheme, SystemParams};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value < self.limit
    }
}

fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Full-size parameter sets: N = 100, g = 0.04, detuned and resonant.
fn standard_sets() -> Result<Vec<SystemParams>, CliError> {
    Ok(vec![SystemParams::new(100, 0.02, 0.04, 0.05)?, SystemParams::new(100, 0.0, 0.04, 0.05)?])
}

fn tau_grid(params: &SystemParams, points: usize) -> Vec<f64> {
    let span = 4.0 * PI / params.g();
    (1..=points).map(|k| span * k as f64 / points as f64).collect()
}

fn block_unitarity() -> Result<f64, CliError> {
    let mut worst: f64 = 0.0;
    for params in standard_sets()? {
        for tau in tau_grid(&params, 200) {
            for n in 1..=params.dim() {
                worst = worst.max((block_coefficients(&params, n, tau).norm_sqr() - 1.0).abs());
            }
        }
    }
    Ok(worst)
}

fn kraus_completeness(lambda_scale: f64) -> Result<f64, CliError> {
    let mut worst: f64 = 0.0;
    for params in standard_sets()? {
        for tau in tau_grid(&params, 20) {
            let kraus = KrausSet::new(&params, tau).with_scaled_lambda(lambda_scale);
            for q in [Qubit::Ground, Qubit::Excited] {
                worst = worst.max(kraus.completeness_residual(q));
            }
        }
    }
    Ok(worst)
}

/// Dense matrix exponential against the block-assembled unitary and the
/// Kraus operators read off it.
fn oracle_agreement(levels: usize) -> Result<f64, CliError> {
    let mut worst: f64 = 0.0;
    for g in [0.01, 0.04, 0.2] {
        for delta in [-0.05, 0.0, 0.02, 0.3] {
            let params = SystemParams::new(levels, delta, g, 0.1)?;
            for tau in [0.5, 3.0, 8.7, 40.0] {
                let dense = (joint_hamiltonian(&params) * Complex64::new(0.0, -tau)).exp();
                worst = worst.max(max_abs_diff(&dense, &joint_unitary(&params, tau)));
                let kraus = KrausSet::new(&params, tau);
                for kind in KrausKind::ALL {
                    let op = kraus.operator(kind);
                    let block = DMatrix::from_fn(params.dim(), params.dim(), |row, col| {
                        dense[(joint_index(&params, kind.measured(), row), joint_index(&params, kind.initial(), col))]
                    });
                    worst = worst.max(max_abs_diff(&op, &block));
                }
            }
        }
    }
    Ok(worst)
}

fn probability_normalization() -> Result<f64, CliError> {
    let mut worst: f64 = 0.0;
    for params in standard_sets()? {
        let state = BatteryState::thermal(&params);
        for tau in tau_grid(&params, 20) {
            let kraus = KrausSet::new(&params, tau);
            for initial in [Qubit::Ground, Qubit::Excited] {
                let mut total = 0.0;
                for measured in [Qubit::Ground, Qubit::Excited] {
                    total += match povm_apply(KrausKind::from_states(initial, measured), &state, &kraus) {
                        Ok((_, p)) => p,
                        Err(qbattery::Error::ZeroProbability { .. }) => 0.0,
                        Err(e) => return Err(e.into()),
                    };
                }
                worst = worst.max((total - 1.0).abs());
            }
        }
    }
    Ok(worst)
}

/// Largest |E_open − E_closed| over a short protocol with every rate at zero.
fn gamma_zero_reduction() -> Result<f64, CliError> {
    let params = SystemParams::new(10, 0.02, 0.04, 0.1)?;
    let initial = BatteryState::thermal(&params);
    let closed_diss = DissipationParams::new(0.0, 0.0, 0.0, 0.0)?;
    let opts = OdeOptions::with_tolerances(1e-12, 1e-10);
    let mut worst: f64 = 0.0;
    for scheme in [Scheme::PowerOn, Scheme::PowerOff] {
        let policy = IntervalPolicy::Fixed(if scheme == Scheme::PowerOn { 8.0 } else { 3.0 });
        let closed = run_protocol(&initial, &params, scheme, 5, policy)?;
        let open = dissipative_protocol(&initial, &params, &closed_diss, scheme, 5, policy, &opts)?;
        if open.len() != closed.len() {
            return Ok(f64::INFINITY);
        }
        for (a, b) in closed.energies().iter().zip(open.energies()) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

pub fn checks(config: &RunConfig) -> Result<Vec<Check>, CliError> {
    Ok(vec![
        Check { name: "block_unitarity", value: block_unitarity()?, limit: 1e-12 },
        Check { name: "kraus_completeness", value: kraus_completeness(config.validate.lambda_scale)?, limit: 1e-12 },
        Check { name: "oracle_agreement", value: oracle_agreement(config.validate.oracle_levels)?, limit: 1e-10 },
        Check { name: "probability_normalization", value: probability_normalization()?, limit: 1e-12 },
        Check { name: "gamma_zero_reduction", value: gamma_zero_reduction()?, limit: 1e-8 },
    ])
}

/// Prints one line per check and fails if any check does.
pub fn validate(config: &RunConfig) -> Result<(), CliError> {
    let results = checks(config)?;
    for c in &results {
        println!("{} {} max_deviation={:e} limit={:e}", if c.passed() { "PASS" } else { "FAIL" }, c.name, c.value, c.limit);
    }
    let failed: Vec<&str> = results.iter().filter(|c| !c.passed()).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(failed.join(", ")))
    }
}

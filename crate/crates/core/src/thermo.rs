// Copyright 2026 The qbattery Authors
// SPDX-License-Identifier: Apache-2.0

//! Energy, ergotropy and charging power of the battery.
//!
//! All energies are in absolute units: ω_b times an occupation.

use crate::error::{Error, Result};
use crate::states::{BatteryState, SystemParams};

/// E = ω_b Σ n p_n.
pub fn energy(state: &BatteryState, params: &SystemParams) -> f64 {
    params.omega_b() * state.mean_occupation()
}

/// Eigenvalues of ρ in decreasing order, placed on the levels 0, 1, 2, ….
/// Ties keep their original order.
pub fn passive_populations(state: &BatteryState) -> Vec<f64> {
    let mut eig: Vec<f64> = match state.matrix() {
        None => state.populations().to_vec(),
        Some(m) => m.symmetric_eigenvalues().iter().map(|x| x.max(0.0)).collect(),
    };
    eig.sort_by(|a, b| b.total_cmp(a));
    eig
}

pub fn passive_state(state: &BatteryState) -> BatteryState {
    let p = passive_populations(state);
    let sum: f64 = p.iter().sum();
    BatteryState::from_populations(p.into_iter().map(|x| x / sum).collect())
        .expect("eigenvalues of a valid state form a distribution")
}

/// W = E(ρ) − E(ρ_passive).
pub fn ergotropy(state: &BatteryState, params: &SystemParams) -> f64 {
    let passive = passive_state(state);
    (energy(state, params) - energy(&passive, params)).max(0.0)
}

/// Thermodynamic summary of one state. `power` is only known once the
/// state is placed in a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoSnapshot {
    pub energy: f64,
    pub ergotropy: f64,
    /// W/E, reported as 0 for an empty battery.
    pub ratio: f64,
    pub power: Option<f64>,
}

impl ThermoSnapshot {
    pub fn of(state: &BatteryState, params: &SystemParams) -> Self {
        let energy = energy(state, params);
        let ergotropy = ergotropy(state, params).min(energy);
        let ratio = if energy > 0.0 { ergotropy / energy } else { 0.0 };
        ThermoSnapshot { energy, ergotropy, ratio, power: None }
    }
}

/// P_m = (E_m − E_{m−1}) / τ_m. `energies[0]` is the initial energy and
/// `taus[m − 1]` the interval of round m.
pub fn charging_power(energies: &[f64], taus: &[f64], m: usize) -> Result<f64> {
    if m == 0 || m > taus.len() || m >= energies.len() {
        return Err(Error::IndexOutOfRange { index: m, len: taus.len().min(energies.len().saturating_sub(1)) });
    }
    let tau = taus[m - 1];
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("round {m} has non-positive interval {tau}")));
    }
    Ok((energies[m] - energies[m - 1]) / tau)
}

// Copyright 2026 The qbattery Authors
// SPDX-License-Identifier: Apache-2.0

//! One evolution-and-measurement round.
//!
//! [`general_round`] is the reference path: it embeds ρ_B ⊗ ρ_C, applies
//! the joint unitary, projects the qubit on |φ⟩ and traces it out. The
//! other functions are the fast analytic maps for diagonal batteries and
//! are checked against it.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::propagator::{block_coefficients, joint_index, joint_unitary, rabi_frequency, sin_ratio};
use crate::propagator::{KrausKind, KrausSet, Qubit};
use crate::states::{BatteryState, ChargerSpec, SystemParams};

/// Which charger preparation and measurement a round uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    /// Excited charger, measured on |g⟩ (`M_eg`).
    PowerOn,
    /// Ground-state charger, measured on |e⟩ (`M_ge`).
    PowerOff,
    General(ChargerSpec),
}

impl Scheme {
    pub fn charger(&self) -> ChargerSpec {
        match *self {
            Scheme::PowerOn => ChargerSpec::power_on(),
            Scheme::PowerOff => ChargerSpec::power_off(),
            Scheme::General(c) => c,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::PowerOn => "power_on",
            Scheme::PowerOff => "power_off",
            Scheme::General(_) => "general",
        }
    }
}

/// Outcome of a successful round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub post_state: BatteryState,
    /// Probability of the desired measurement outcome, in (0, 1].
    pub probability: f64,
    pub tau: f64,
    pub scheme: Scheme,
}

fn require_diagonal(state: &BatteryState, params: &SystemParams) -> Result<()> {
    if state.dim() != params.dim() {
        return Err(Error::DimensionMismatch { expected: params.dim(), found: state.dim() });
    }
    if !state.is_diagonal() {
        return Err(Error::NotDiagonal);
    }
    Ok(())
}

/// p_n ← |λ_n(τ)|² p_{n−1}, normalised by P_g.
pub fn power_on_round(state: &BatteryState, params: &SystemParams, tau: f64) -> Result<RoundRecord> {
    require_diagonal(state, params)?;
    let weights = KrausSet::new(params, tau).map_populations(KrausKind::Eg, state.populations());
    let (post_state, probability) = BatteryState::from_weights(weights)?;
    Ok(RoundRecord { post_state, probability, tau, scheme: Scheme::PowerOn })
}

/// p_n ← |λ_{n+1}(τ)|² p_{n+1}, normalised by P_e.
pub fn power_off_round(state: &BatteryState, params: &SystemParams, tau: f64) -> Result<RoundRecord> {
    require_diagonal(state, params)?;
    let weights = KrausSet::new(params, tau).map_populations(KrausKind::Ge, state.populations());
    let (post_state, probability) = BatteryState::from_weights(weights)?;
    Ok(RoundRecord { post_state, probability, tau, scheme: Scheme::PowerOff })
}

/// ρ_B ⊗ ρ_C in the qubit-major joint basis.
pub fn embed_joint(state: &BatteryState, charger: ChargerSpec) -> DMatrix<Complex64> {
    let dim = state.dim();
    let rho_b = state.density_matrix();
    let mut joint = DMatrix::<Complex64>::zeros(2 * dim, 2 * dim);
    for (s, row) in charger.density_matrix().iter().enumerate() {
        for (t, &c) in row.iter().enumerate() {
            if c != 0.0 {
                joint.view_mut((s * dim, t * dim), (dim, dim)).copy_from(&rho_b.scale(c));
            }
        }
    }
    joint
}

/// Unnormalised battery state ⟨φ|ρ|φ⟩ after projecting the qubit on the
/// charger's measured state.
pub fn project_measured(joint: &DMatrix<Complex64>, charger: ChargerSpec, params: &SystemParams) -> DMatrix<Complex64> {
    let dim = params.dim();
    let phi = charger.measured_amplitudes();
    let qubits = [Qubit::Ground, Qubit::Excited];
    let mut projected = DMatrix::<Complex64>::zeros(dim, dim);
    for &s in &qubits {
        for &t in &qubits {
            let w = phi[s.index()] * phi[t.index()];
            if w == 0.0 {
                continue;
            }
            let block = joint.view((joint_index(params, s, 0), joint_index(params, t, 0)), (dim, dim));
            projected += block.scale(w);
        }
    }
    projected
}

/// Full density-matrix round through the joint unitary. Works for any
/// battery state and any charger, including initial charger coherence.
pub fn general_round(
    state: &BatteryState,
    charger: ChargerSpec,
    params: &SystemParams,
    tau: f64,
) -> Result<RoundRecord> {
    if state.dim() != params.dim() {
        return Err(Error::DimensionMismatch { expected: params.dim(), found: state.dim() });
    }
    let u = joint_unitary(params, tau);
    let evolved = &u * embed_joint(state, charger) * u.adjoint();
    let projected = project_measured(&evolved, charger, params);
    let (post_state, probability) = BatteryState::from_unnormalized_matrix(projected)?;
    Ok(RoundRecord { post_state, probability, tau, scheme: Scheme::General(charger) })
}

/// Population D_c contributed by the initial charger coherence:
///
/// c√(q(1−q)) sinθ Σ_n [cos Ω_nτ cos Ω_{n+1}τ − Δ²/(4Ω_nΩ_{n+1}) sin Ω_nτ sin Ω_{n+1}τ] p_n.
///
/// The top level has no `n + 1` partner; its coefficient is
/// Re(α_N e^{iΔτ/2}) from the uncoupled `|e,N⟩` block.
pub fn coherence_population(
    state: &BatteryState,
    charger: ChargerSpec,
    params: &SystemParams,
    tau: f64,
) -> Result<Vec<f64>> {
    require_diagonal(state, params)?;
    let prefactor = charger.coherence() * charger.theta().sin();
    let p = state.populations();
    let top = params.n_levels();
    let half_delta = params.delta() / 2.0;
    if prefactor == 0.0 {
        return Ok(vec![0.0; p.len()]);
    }
    let omega: Vec<f64> = (0..=top + 1).map(|n| rabi_frequency(params, n)).collect();
    let out = (0..=top)
        .map(|n| {
            let coeff = if n < top {
                (omega[n] * tau).cos() * (omega[n + 1] * tau).cos()
                    - half_delta.powi(2)
                        * sin_ratio(omega[n], tau)
                        * sin_ratio(omega[n + 1], tau)
            } else {
                (omega[n] * tau).cos() * (half_delta * tau).cos()
                    - half_delta * sin_ratio(omega[n], tau) * (half_delta * tau).sin()
            };
            prefactor * coeff * p[n]
        })
        .collect();
    Ok(out)
}

/// Unnormalised 𝒟 = 𝒟_charge + 𝒟_discharge (+ D_c when the charger carries
/// coherence) for a diagonal battery.
pub fn population_weights(
    state: &BatteryState,
    charger: ChargerSpec,
    params: &SystemParams,
    tau: f64,
) -> Result<Vec<f64>> {
    require_diagonal(state, params)?;
    let kraus = KrausSet::new(params, tau);
    let p = state.populations();
    let q = charger.q();
    let cos2 = (charger.theta() / 2.0).cos().powi(2);
    let sin2 = (charger.theta() / 2.0).sin().powi(2);
    let terms = [
        (KrausKind::Eg, (1.0 - q) * cos2),
        (KrausKind::Ge, q * sin2),
        (KrausKind::Gg, q * cos2),
        (KrausKind::Ee, (1.0 - q) * sin2),
    ];
    let mut weights = coherence_population(state, charger, params, tau)?;
    for (kind, w) in terms {
        if w == 0.0 {
            continue;
        }
        for (acc, m) in weights.iter_mut().zip(kraus.map_populations(kind, p)) {
            *acc += w * m;
        }
    }
    Ok(weights)
}

/// Normalised populations after one round with an arbitrary charger, from
/// the analytic population maps. Only the diagonal of the post-state is
/// produced; see [`dynamical_coherence`] for the off-diagonal part.
pub fn population_update(
    state: &BatteryState,
    charger: ChargerSpec,
    params: &SystemParams,
    tau: f64,
) -> Result<(BatteryState, f64)> {
    BatteryState::from_weights(population_weights(state, charger, params, tau)?)
}

/// n̄ after one round divided by n̄ before it, for a diagonal battery.
pub fn mean_ratio(state: &BatteryState, charger: ChargerSpec, params: &SystemParams, tau: f64) -> Result<f64> {
    let before = state.mean_occupation();
    if !(before > 0.0) {
        return Err(Error::UndefinedRatio);
    }
    let (post, _) = population_update(state, charger, params, tau)?;
    Ok(post.mean_occupation() / before)
}

/// Unnormalised off-diagonal part 𝒞 of the post-measurement battery for a
/// diagonal battery and an incoherent charger (c = 0):
///
/// 𝒞_{n−1,n} = (sinθ/2) α_n* [q e^{iΔτ/2} λ_n p_n + (1−q) e^{−iΔτ/2} λ_n* p_{n−1}], plus H.c.
pub fn dynamical_coherence(
    state: &BatteryState,
    charger: ChargerSpec,
    params: &SystemParams,
    tau: f64,
) -> Result<DMatrix<Complex64>> {
    require_diagonal(state, params)?;
    if charger.c() != 0.0 {
        return Err(Error::InvalidParameter(
            "dynamical_coherence covers incoherent chargers only (c = 0)".into(),
        ));
    }
    let dim = params.dim();
    let p = state.populations();
    let q = charger.q();
    let half_sin = charger.theta().sin() / 2.0;
    let phase = Complex64::from_polar(1.0, params.delta() * tau / 2.0);
    let mut m = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        let b = block_coefficients(params, n, tau);
        let v = b.alpha.conj()
            * (phase * b.lambda * (q * p[n]) + phase.conj() * b.lambda.conj() * ((1.0 - q) * p[n - 1]))
            * half_sin;
        m[(n - 1, n)] = v;
        m[(n, n - 1)] = v.conj();
    }
    Ok(m)
}

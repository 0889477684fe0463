// Copyright 2026 The qbattery Authors
// SPDX-License-Identifier: Apache-2.0

//! Physical parameters, charger specifications and battery states.
//!
//! Units throughout: ħ = k_B = 1 and the charger gap ω_c sets the energy
//! scale (ω_c = 1 by default). Times are in 1/ω_c.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries above this (in magnitude) are real negative populations, not rounding dust.
pub const NEGATIVE_DUST: f64 = 1e-14;

/// Allowed deviation of the trace from one when a caller hands in a state.
const TRACE_TOLERANCE: f64 = 1e-10;

/// Traces below this are reported as a zero-probability measurement outcome.
pub const PROBABILITY_FLOOR: f64 = 1e-15;

/// Inverse temperature β, with the zero-temperature limit kept exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InverseTemperature {
    Finite(f64),
    Infinite,
}

impl InverseTemperature {
    pub fn is_infinite(&self) -> bool {
        matches!(self, InverseTemperature::Infinite)
    }

    pub fn value(&self) -> f64 {
        match *self {
            InverseTemperature::Finite(b) => b,
            InverseTemperature::Infinite => f64::INFINITY,
        }
    }
}

impl From<f64> for InverseTemperature {
    fn from(beta: f64) -> Self {
        if beta.is_infinite() && beta > 0.0 {
            InverseTemperature::Infinite
        } else {
            InverseTemperature::Finite(beta)
        }
    }
}

impl fmt::Display for InverseTemperature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InverseTemperature::Finite(b) => write!(f, "{b}"),
            InverseTemperature::Infinite => f.write_str("inf"),
        }
    }
}

// JSON has no infinity, so β = ∞ travels as the string "inf".
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BetaRepr {
    Number(f64),
    Text(String),
}

impl Serialize for InverseTemperature {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            InverseTemperature::Finite(b) => BetaRepr::Number(b),
            InverseTemperature::Infinite => BetaRepr::Text("inf".to_owned()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for InverseTemperature {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match BetaRepr::deserialize(d)? {
            BetaRepr::Number(b) => Ok(b.into()),
            BetaRepr::Text(t) => match t.trim().to_ascii_lowercase().as_str() {
                "inf" | "+inf" | "infinity" => Ok(InverseTemperature::Infinite),
                other => other
                    .parse::<f64>()
                    .map(InverseTemperature::from)
                    .map_err(|_| serde::de::Error::custom(format!("invalid beta {t:?}"))),
            },
        }
    }
}

/// Physical configuration of the battery–charger pair.
///
/// The detuning is derived, `delta = omega_c - omega_b`, so it cannot drift
/// out of sync with the two energies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct SystemParams {
    n_levels: usize,
    omega_c: f64,
    omega_b: f64,
    g: f64,
    beta: InverseTemperature,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawParams {
    n_levels: usize,
    omega_c: f64,
    delta: f64,
    g: f64,
    beta: InverseTemperature,
}

impl Default for RawParams {
    fn default() -> Self {
        SystemParams::default().into()
    }
}

impl From<SystemParams> for RawParams {
    fn from(p: SystemParams) -> Self {
        RawParams {
            n_levels: p.n_levels,
            omega_c: p.omega_c,
            delta: p.delta(),
            g: p.g,
            beta: p.beta,
        }
    }
}

impl TryFrom<RawParams> for SystemParams {
    type Error = Error;

    fn try_from(r: RawParams) -> Result<Self> {
        SystemParams::with_energies(r.n_levels, r.omega_c, r.delta, r.g, r.beta)
    }
}

impl Default for SystemParams {
    /// N = 100, ω_c = 1, Δ = 0.02, g = 0.04, β = 0.05.
    fn default() -> Self {
        SystemParams {
            n_levels: 100,
            omega_c: 1.0,
            omega_b: 0.98,
            g: 0.04,
            beta: InverseTemperature::Finite(0.05),
        }
    }
}

impl SystemParams {
    /// Parameters with ω_c = 1.
    pub fn new(
        n_levels: usize,
        delta: f64,
        g: f64,
        beta: impl Into<InverseTemperature>,
    ) -> Result<Self> {
        Self::with_energies(n_levels, 1.0, delta, g, beta)
    }

    pub fn with_energies(
        n_levels: usize,
        omega_c: f64,
        delta: f64,
        g: f64,
        beta: impl Into<InverseTemperature>,
    ) -> Result<Self> {
        let beta = beta.into();
        if n_levels < 1 {
            return Err(Error::InvalidParameter("n_levels must be >= 1".into()));
        }
        if !(omega_c.is_finite() && omega_c > 0.0) {
            return Err(Error::InvalidParameter(format!("omega_c must be > 0, got {omega_c}")));
        }
        if !delta.is_finite() || omega_c - delta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "delta must leave omega_b = omega_c - delta > 0, got delta = {delta}"
            )));
        }
        if !(g.is_finite() && g >= 0.0) {
            return Err(Error::InvalidParameter(format!("g must be ≥ 0, got {g}")));
        }
        if let InverseTemperature::Finite(b) = beta {
            if !(b >= 0.0) || b.is_infinite() {
                return Err(Error::InvalidParameter(format!("beta must be >= 0, got {b}")));
            }
        }
        Ok(SystemParams { n_levels, omega_c, omega_b: omega_c - delta, g, beta })
    }

    /// Highest battery level N; the battery has N + 1 levels.
    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn dim(&self) -> usize {
        self.n_levels + 1
    }

    pub fn omega_c(&self) -> f64 {
        self.omega_c
    }

    pub fn omega_b(&self) -> f64 {
        self.omega_b
    }

    pub fn delta(&self) -> f64 {
        self.omega_c - self.omega_b
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn beta(&self) -> InverseTemperature {
        self.beta
    }

    pub fn with_beta(mut self, beta: impl Into<InverseTemperature>) -> Result<Self> {
        self.beta = beta.into();
        Self::with_energies(self.n_levels, self.omega_c, self.delta(), self.g, self.beta)
    }

    pub fn with_n_levels(self, n_levels: usize) -> Result<Self> {
        Self::with_energies(n_levels, self.omega_c, self.delta(), self.g, self.beta)
    }

    pub fn with_g(self, g: f64) -> Result<Self> {
        Self::with_energies(self.n_levels, self.omega_c, self.delta(), g, self.beta)
    }

    pub fn with_delta(self, delta: f64) -> Result<Self> {
        Self::with_energies(self.n_levels, self.omega_c, delta, self.g, self.beta)
    }
}

/// State of the ancillary charger qubit before it couples to the battery,
/// together with the state it is projected on afterwards.
///
/// ρ_C = q|g⟩⟨g| + (1−q)|e⟩⟨e| + c√(q(1−q))(|e⟩⟨g| + |g⟩⟨e|),
/// measured on |φ⟩ = cos(θ/2)|g⟩ + sin(θ/2)|e⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCharger")]
pub struct ChargerSpec {
    q: f64,
    theta: f64,
    c: f64,
}

#[derive(Deserialize)]
struct RawCharger {
    q: f64,
    theta: f64,
    #[serde(default)]
    c: f64,
}

impl TryFrom<RawCharger> for ChargerSpec {
    type Error = Error;

    fn try_from(r: RawCharger) -> Result<Self> {
        ChargerSpec::new(r.q, r.theta, r.c)
    }
}

impl ChargerSpec {
    pub fn new(q: f64, theta: f64, c: f64) -> Result<Self> {
        let unit = 0.0..=1.0;
        if !unit.contains(&q) {
            return Err(Error::InvalidParameter(format!("q must lie in [0, 1], got {q}")));
        }
        if !(0.0..=std::f64::consts::PI).contains(&theta) {
            return Err(Error::InvalidParameter(format!("theta must lie in [0, pi], got {theta}")));
        }
        if !unit.contains(&c) {
            return Err(Error::InvalidParameter(format!("c must lie in [0, 1], got {c}")));
        }
        Ok(ChargerSpec { q, theta, c })
    }

    /// Excited charger measured on the ground state.
    pub fn power_on() -> Self {
        ChargerSpec { q: 0.0, theta: 0.0, c: 0.0 }
    }

    /// Ground-state charger measured on the excited state.
    pub fn power_off() -> Self {
        ChargerSpec { q: 1.0, theta: std::f64::consts::PI, c: 0.0 }
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Off-diagonal element c√(q(1−q)) of ρ_C.
    pub fn coherence(&self) -> f64 {
        self.c * (self.q * (1.0 - self.q)).sqrt()
    }

    /// ρ_C in the (g, e) basis.
    pub fn density_matrix(&self) -> [[f64; 2]; 2] {
        let x = self.coherence();
        [[self.q, x], [x, 1.0 - self.q]]
    }

    /// Amplitudes (⟨g|φ⟩, ⟨e|φ⟩) of the measured state.
    pub fn measured_amplitudes(&self) -> [f64; 2] {
        [(self.theta / 2.0).cos(), (self.theta / 2.0).sin()]
    }
}

/// Thermal populations p_n = [e^{−βω_b n} − e^{−βω_b(n+1)}] / [1 − e^{−βω_b(N+1)}].
pub fn thermal_populations(params: &SystemParams) -> Vec<f64> {
    let dim = params.dim();
    let mut p = vec![0.0; dim];
    match params.beta() {
        InverseTemperature::Infinite => p[0] = 1.0,
        InverseTemperature::Finite(0.0) => p.fill(1.0 / dim as f64),
        InverseTemperature::Finite(b) => {
            let x = b * params.omega_b();
            let norm = -(-x).exp_m1() / -(-x * dim as f64).exp_m1();
            for (n, pn) in p.iter_mut().enumerate() {
                *pn = (-x * n as f64).exp() * norm;
            }
        }
    }
    p
}

/// Density matrix of the (N+1)-level battery.
///
/// Diagonal states keep only their populations; general states also carry
/// the full Hermitian matrix, whose diagonal agrees with `populations`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryState {
    populations: Vec<f64>,
    matrix: Option<DMatrix<Complex64>>,
}

impl BatteryState {
    /// Validates a probability vector, clamps rounding dust and renormalises.
    pub fn from_populations(populations: Vec<f64>) -> Result<Self> {
        if populations.len() < 2 {
            return Err(Error::InvalidState("need at least two levels".into()));
        }
        let sum: f64 = populations.iter().sum();
        if !sum.is_finite() || (sum - 1.0).abs() > TRACE_TOLERANCE {
            return Err(Error::InvalidState(format!("populations sum to {sum}, expected 1")));
        }
        let (state, _) = Self::from_weights(populations)?;
        Ok(state)
    }

    /// Normalises non-negative weights, returning the state and the original trace.
    pub fn from_weights(mut weights: Vec<f64>) -> Result<(Self, f64)> {
        if weights.len() < 2 {
            return Err(Error::InvalidState("need at least two levels".into()));
        }
        for (n, w) in weights.iter_mut().enumerate() {
            if !w.is_finite() || *w < -NEGATIVE_DUST {
                return Err(Error::InvalidState(format!("weight {w} at level {n}")));
            }
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let trace: f64 = weights.iter().sum();
        if trace < PROBABILITY_FLOOR {
            return Err(Error::ZeroProbability { probability: trace });
        }
        weights.iter_mut().for_each(|w| *w /= trace);
        Ok((BatteryState { populations: weights, matrix: None }, trace))
    }

    /// Validates a full density matrix: Hermitian, unit trace and positive
    /// semidefinite (smallest eigenvalue ≥ −1e-10).
    pub fn from_density_matrix(rho: DMatrix<Complex64>) -> Result<Self> {
        let dim = rho.nrows();
        if dim != rho.ncols() || dim < 2 {
            return Err(Error::InvalidState(format!("matrix is {}x{}", rho.nrows(), rho.ncols())));
        }
        let herm_err = (&rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm_err > TRACE_TOLERANCE {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm_err:e})")));
        }
        let trace = rho.trace();
        if (trace.re - 1.0).abs() > TRACE_TOLERANCE || trace.im.abs() > TRACE_TOLERANCE {
            return Err(Error::InvalidState(format!("trace {trace}, expected 1")));
        }
        let min_eig = min_eigenvalue(&rho);
        if min_eig < -TRACE_TOLERANCE {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:e}")));
        }
        let (state, _) = Self::from_unnormalized_matrix(rho)?;
        Ok(state)
    }

    /// Normalises the output of a (completely positive) map, returning the
    /// state and the pre-normalisation trace.
    ///
    /// Positivity is inherited from the map and not re-checked here.
    pub fn from_unnormalized_matrix(rho: DMatrix<Complex64>) -> Result<(Self, f64)> {
        let dim = rho.nrows();
        if dim != rho.ncols() || dim < 2 {
            return Err(Error::InvalidState(format!("matrix is {}x{}", rho.nrows(), rho.ncols())));
        }
        let trace = rho.trace().re;
        if !(trace >= PROBABILITY_FLOOR) {
            return Err(Error::ZeroProbability { probability: trace.max(0.0) });
        }
        let mut m = (&rho + rho.adjoint()).unscale(2.0 * trace);
        let mut populations = Vec::with_capacity(dim);
        for n in 0..dim {
            let p = m[(n, n)].re;
            if p < -NEGATIVE_DUST {
                return Err(Error::InvalidState(format!("negative population {p} at level {n}")));
            }
            let p = p.max(0.0);
            m[(n, n)] = Complex64::new(p, 0.0);
            populations.push(p);
        }
        let sum: f64 = populations.iter().sum();
        populations.iter_mut().for_each(|p| *p /= sum);
        m.unscale_mut(sum);
        Ok((BatteryState { populations, matrix: Some(m) }, trace))
    }

    pub fn vacuum(n_levels: usize) -> Self {
        Self::fock(n_levels, 0)
    }

    /// Number state |m⟩. Panics if `m > n_levels`.
    pub fn fock(n_levels: usize, m: usize) -> Self {
        assert!(m <= n_levels, "Fock level {m} above top level {n_levels}");
        let mut p = vec![0.0; n_levels + 1];
        p[m] = 1.0;
        BatteryState { populations: p, matrix: None }
    }

    pub fn thermal(params: &SystemParams) -> Self {
        BatteryState { populations: thermal_populations(params), matrix: None }
    }

    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    pub fn n_levels(&self) -> usize {
        self.populations.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.populations.len()
    }

    pub fn is_diagonal(&self) -> bool {
        self.matrix.is_none()
    }

    /// The full matrix, if this state carries coherences.
    pub fn matrix(&self) -> Option<&DMatrix<Complex64>> {
        self.matrix.as_ref()
    }

    pub fn density_matrix(&self) -> DMatrix<Complex64> {
        match &self.matrix {
            Some(m) => m.clone(),
            None => DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                self.dim(),
                self.populations.iter().map(|&p| Complex64::new(p, 0.0)),
            )),
        }
    }

    /// Same populations, coherences dropped.
    pub fn diagonal_part(&self) -> BatteryState {
        BatteryState { populations: self.populations.clone(), matrix: None }
    }

    /// Largest off-diagonal modulus (0 for diagonal states).
    pub fn max_coherence(&self) -> f64 {
        let Some(m) = &self.matrix else { return 0.0 };
        let mut max = 0.0f64;
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if i != j {
                    max = max.max(m[(i, j)].norm());
                }
            }
        }
        max
    }

    /// n̄ = Σ n p_n.
    pub fn mean_occupation(&self) -> f64 {
        self.populations.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// Δn = Σ n² p_n − n̄².
    pub fn occupation_variance(&self) -> f64 {
        let mean = self.mean_occupation();
        let var: f64 = self
            .populations
            .iter()
            .enumerate()
            .map(|(n, p)| (n as f64 - mean).powi(2) * p)
            .sum();
        var.max(0.0)
    }

    /// Variance-to-mean ratio f = Δn / n̄.
    pub fn fano_ratio(&self) -> Result<f64> {
        let mean = self.mean_occupation();
        if mean <= 0.0 {
            return Err(Error::UndefinedRatio);
        }
        Ok(self.occupation_variance() / mean)
    }
}

/// Fidelity Σ_n √(p_n q_n) between two commuting (diagonal) states.
pub fn diagonal_fidelity(a: &BatteryState, b: &BatteryState) -> Result<f64> {
    if !a.is_diagonal() || !b.is_diagonal() {
        return Err(Error::NotDiagonal);
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    let f: f64 = a.populations.iter().zip(&b.populations).map(|(p, q)| (p * q).sqrt()).sum();
    Ok(f.min(1.0))
}

/// Discrete Gaussian p_n ∝ exp(−(n − mean)² / (2 variance)) on 0..=N,
/// renormalised after truncation. Moments of the result are not re-fitted,
/// so they may differ from the targets when the tails are cut.
pub fn gaussian_reference(mean: f64, variance: f64, n_levels: usize) -> Result<BatteryState> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::InvalidParameter(format!("variance must be > 0, got {variance}")));
    }
    if !(0.0..=n_levels as f64).contains(&mean) {
        return Err(Error::InvalidParameter(format!("mean {mean} outside [0, {n_levels}]")));
    }
    // Shift exponents by the smallest one so the peak never underflows.
    let offsets: Vec<f64> = (0..=n_levels).map(|n| (n as f64 - mean).powi(2)).collect();
    let min = offsets.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights = offsets.iter().map(|d| (-(d - min) / (2.0 * variance)).exp()).collect();
    let (state, _) = BatteryState::from_weights(weights)?;
    Ok(state)
}

pub(crate) fn min_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    let h = (m + m.adjoint()).scale(0.5);
    h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

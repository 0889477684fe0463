// Copyright 2026 The qbattery Authors
// SPDX-License-Identifier: Apache-2.0

//! Open-system rounds: the joint charger–battery state follows a
//! Lindblad master equation with thermal damping of both parts.
//!
//! 𝒟[o]ρ = oρo† − ½{o†o, ρ}; jump operators A, A†, σ₋, σ₊.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ode::{dopri5, OdeOptions, OdeStats};
use crate::propagator::{joint_index, Qubit};
use crate::round::{embed_joint, project_measured, RoundRecord, Scheme};
use crate::scheduler::{choose_tau, run_with, IntervalPolicy, Trajectory};
use crate::states::{min_eigenvalue, BatteryState, InverseTemperature, SystemParams};

/// Smallest eigenvalue tolerated before a positivity warning.
pub const POSITIVITY_TOLERANCE: f64 = 1e-8;

/// Battery coherences below this are treated as integration noise.
const COHERENCE_DUST: f64 = 1e-10;

/// Negative populations down to this multiple of the absolute integrator
/// tolerance are rounded to zero.
const NEGATIVE_NOISE_FACTOR: f64 = 100.0;

/// Damping rates and bath occupations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipationParams {
    pub gamma_b: f64,
    pub gamma_c: f64,
    pub nbar_th: f64,
    pub nbar_th_c: f64,
}

impl DissipationParams {
    pub fn new(gamma_b: f64, gamma_c: f64, nbar_th: f64, nbar_th_c: f64) -> Result<Self> {
        for (name, v) in [("gamma_b", gamma_b), ("gamma_c", gamma_c), ("nbar_th", nbar_th), ("nbar_th_c", nbar_th_c)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and ≥ 0, got {v}")));
            }
        }
        Ok(DissipationParams { gamma_b, gamma_c, nbar_th, nbar_th_c })
    }

    /// Occupations from the system temperature: n̄_th is the initial
    /// thermal battery mean, n̄_th^c = 1 − q_th with q_th = 1/(e^{βω_b} + 1).
    pub fn thermal(params: &SystemParams, gamma_b: f64, gamma_c: f64) -> Result<Self> {
        let nbar_th = BatteryState::thermal(params).mean_occupation();
        let q_th = match params.beta() {
            InverseTemperature::Infinite => 0.0,
            InverseTemperature::Finite(b) => 1.0 / ((b * params.omega_b()).exp() + 1.0),
        };
        Self::new(gamma_b, gamma_c, nbar_th, 1.0 - q_th)
    }

    /// Same rate γ for battery and charger.
    pub fn with_gamma(self, gamma: f64) -> Result<Self> {
        Self::new(gamma, gamma, self.nbar_th, self.nbar_th_c)
    }

    pub fn is_closed(&self) -> bool {
        self.gamma_b == 0.0 && self.gamma_c == 0.0
    }
}

/// Sparse operator as (row, col, value) triples.
#[derive(Debug, Clone, Default)]
struct Sparse(Vec<(usize, usize, Complex64)>);

impl Sparse {
    /// out += O·ρ
    fn left_mul_add(&self, rho: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        let dim = rho.nrows();
        let src = rho.as_slice();
        let dst = out.as_mut_slice();
        for &(r, k, v) in &self.0 {
            for j in 0..dim {
                dst[j * dim + r] += v * src[j * dim + k];
            }
        }
    }

    /// out += X·O†
    fn right_adjoint_mul_add(&self, x: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        let dim = x.nrows();
        let src = x.as_slice();
        let dst = out.as_mut_slice();
        for &(c, k, v) in &self.0 {
            let v = v.conj();
            for i in 0..dim {
                dst[c * dim + i] += v * src[k * dim + i];
            }
        }
    }
}

/// Precomputed pieces of the generator for one parameter set.
#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    dim: usize,
    /// G = −i(H − (i/2) Σ_k L_k†L_k).
    g: Sparse,
    /// √rate · L_k.
    jumps: Vec<Sparse>,
}

impl LindbladGenerator {
    pub fn new(params: &SystemParams, diss: &DissipationParams) -> Self {
        let top = params.n_levels();
        let dim = 2 * params.dim();
        let idx = |q, n| joint_index(params, q, n);
        let qubits = [Qubit::Ground, Qubit::Excited];

        let rates = [
            diss.gamma_b * (diss.nbar_th + 1.0),
            diss.gamma_b * diss.nbar_th,
            diss.gamma_c * (diss.nbar_th_c + 1.0),
            diss.gamma_c * diss.nbar_th_c,
        ];
        let mut diag = vec![Complex64::new(0.0, 0.0); dim];
        for n in 0..=top {
            diag[idx(Qubit::Excited, n)] += params.delta();
        }
        // Σ γ_k L_k†L_k is diagonal for all four jump operators.
        for &q in &qubits {
            for n in 0..=top {
                let i = idx(q, n);
                let mut decay = rates[0] * n as f64;
                if n < top {
                    decay += rates[1] * (n + 1) as f64;
                }
                decay += match q {
                    Qubit::Excited => rates[2],
                    Qubit::Ground => rates[3],
                };
                diag[i] -= Complex64::new(0.0, 0.5 * decay);
            }
        }
        let minus_i = Complex64::new(0.0, -1.0);
        let mut g = Sparse(diag.into_iter().enumerate().map(|(i, h)| (i, i, minus_i * h)).collect());
        for n in 1..=top {
            let c = minus_i * params.g() * (n as f64).sqrt();
            g.0.push((idx(Qubit::Ground, n), idx(Qubit::Excited, n - 1), c));
            g.0.push((idx(Qubit::Excited, n - 1), idx(Qubit::Ground, n), c));
        }

        let mut jumps = Vec::new();
        let mut push = |rate: f64, entries: Vec<(usize, usize, f64)>| {
            if rate > 0.0 {
                let s = rate.sqrt();
                jumps.push(Sparse(entries.into_iter().map(|(r, c, v)| (r, c, Complex64::new(s * v, 0.0))).collect()));
            }
        };
        let lower: Vec<_> = qubits
            .iter()
            .flat_map(|&q| (1..=top).map(move |n| (q, n)))
            .map(|(q, n)| (idx(q, n - 1), idx(q, n), (n as f64).sqrt()))
            .collect();
        let raise = lower.iter().map(|&(r, c, v)| (c, r, v)).collect();
        push(rates[0], lower);
        push(rates[1], raise);
        push(rates[2], (0..=top).map(|n| (idx(Qubit::Ground, n), idx(Qubit::Excited, n), 1.0)).collect());
        push(rates[3], (0..=top).map(|n| (idx(Qubit::Excited, n), idx(Qubit::Ground, n), 1.0)).collect());

        LindbladGenerator { dim, g, jumps }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// dρ/dt = Gρ + ρG† + Σ_k L_kρL_k†.
    ///
    /// The map is kept linear on all matrices, not just Hermitian ones, so
    /// rounding noise outside the Hermitian subspace decays instead of
    /// being fed by the jump terms.
    pub fn apply(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        self.g.left_mul_add(rho, &mut out);
        self.g.right_adjoint_mul_add(rho, &mut out);
        let mut tmp = DMatrix::zeros(self.dim, self.dim);
        for jump in &self.jumps {
            tmp.fill(Complex64::new(0.0, 0.0));
            jump.left_mul_add(rho, &mut tmp);
            jump.right_adjoint_mul_add(&tmp, &mut out);
        }
        out
    }
}

/// Right-hand side of the master equation.
pub fn lindblad_rhs(rho: &DMatrix<Complex64>, params: &SystemParams, diss: &DissipationParams) -> Result<DMatrix<Complex64>> {
    let dim = 2 * params.dim();
    if rho.nrows() != dim || rho.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: rho.nrows() });
    }
    Ok(LindbladGenerator::new(params, diss).apply(rho))
}

/// Propagates a joint state over τ. The result is re-Hermitised; a
/// smallest eigenvalue below −[`POSITIVITY_TOLERANCE`], or below the
/// integration noise floor when that is larger, is logged as a warning.
pub fn integrate(
    rho0: &DMatrix<Complex64>,
    tau: f64,
    params: &SystemParams,
    diss: &DissipationParams,
    opts: &OdeOptions,
) -> Result<DMatrix<Complex64>> {
    integrate_with_stats(rho0, tau, &LindbladGenerator::new(params, diss), opts).map(|(rho, _)| rho)
}

pub fn integrate_with_stats(
    rho0: &DMatrix<Complex64>,
    tau: f64,
    generator: &LindbladGenerator,
    opts: &OdeOptions,
) -> Result<(DMatrix<Complex64>, OdeStats)> {
    let dim = generator.dim();
    if rho0.nrows() != dim || rho0.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: rho0.nrows() });
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("interval must be finite and ≥ 0, got {tau}")));
    }
    let (rho, stats) = dopri5(|_, y| generator.apply(y), rho0, 0.0, tau, opts)?;
    let rho = (&rho + rho.adjoint()).scale(0.5);
    let min = min_eigenvalue(&rho);
    let floor = POSITIVITY_TOLERANCE.max(NEGATIVE_NOISE_FACTOR * opts.atol);
    if min < -floor {
        log::warn!("integrated state has eigenvalue {min:e} below -{floor:e}");
    }
    Ok((rho, stats))
}

/// One open-system round: couple a fresh charger, integrate for τ,
/// project the charger and trace it out.
pub fn dissipative_round(
    state: &BatteryState,
    params: &SystemParams,
    generator: &LindbladGenerator,
    scheme: Scheme,
    tau: f64,
    opts: &OdeOptions,
) -> Result<RoundRecord> {
    if state.dim() != params.dim() {
        return Err(Error::DimensionMismatch { expected: params.dim(), found: state.dim() });
    }
    let charger = scheme.charger();
    let (evolved, _) = integrate_with_stats(&embed_joint(state, charger), tau, generator, opts)?;
    let mut projected = project_measured(&evolved, charger, params);
    let floor = -NEGATIVE_NOISE_FACTOR * opts.atol;
    for n in 0..projected.nrows() {
        let p = projected[(n, n)].re;
        if (floor..0.0).contains(&p) {
            projected[(n, n)] = Complex64::new(0.0, 0.0);
        }
    }
    let (post, probability) = BatteryState::from_unnormalized_matrix(projected)?;
    // The power schemes conserve excitation number, so a diagonal battery
    // stays diagonal; strip the integration noise.
    let post_state = if post.max_coherence() < COHERENCE_DUST { post.diagonal_part() } else { post };
    Ok(RoundRecord { post_state, probability, tau, scheme })
}

/// Multi-round protocol under the master equation. Each round's τ comes
/// from `policy` evaluated with the closed-system maps on the current
/// battery state.
pub fn dissipative_protocol(
    initial: &BatteryState,
    params: &SystemParams,
    diss: &DissipationParams,
    scheme: Scheme,
    n_rounds: usize,
    policy: IntervalPolicy,
    opts: &OdeOptions,
) -> Result<Trajectory> {
    let generator = LindbladGenerator::new(params, diss);
    run_with(initial, params, scheme, n_rounds, |state, cumulative| {
        let tau = choose_tau(state, params, scheme, policy, cumulative)?;
        dissipative_round(state, params, &generator, scheme, tau, opts)
    })
}

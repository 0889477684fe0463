// Copyright 2026 The qbattery Authors
// SPDX-License-Identifier: Apache-2.0

//! Exact joint propagation of one charger qubit and the battery.
//!
//! In the rotating frame the Hamiltonian is
//! `H = Δ|e⟩⟨e| + g(σ₋A† + σ₊A)`, which conserves the total excitation
//! number. The joint space splits into the 1×1 block `|g,0⟩`, the 2×2
//! blocks `{|e,n−1⟩, |g,n⟩}` for `n = 1..=N`, and the uncoupled top state
//! `|e,N⟩` of the truncated ladder. Everything here is built from that
//! block structure.
//!
//! Joint basis ordering is qubit-major: index `s·(N+1) + n` with `s = 0`
//! for `|g⟩` and `s = 1` for `|e⟩`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::states::{BatteryState, SystemParams};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Ω_n = √(g²n + Δ²/4).
pub fn rabi_frequency(params: &SystemParams, n: usize) -> f64 {
    let g = params.g();
    let d = params.delta();
    (g * g * n as f64 + d * d / 4.0).sqrt()
}

/// sin(Ωτ)/Ω, continuous through Ω = 0.
pub(crate) fn sin_ratio(omega: f64, tau: f64) -> f64 {
    if omega * tau < 1e-8 {
        tau * (1.0 - (omega * tau).powi(2) / 6.0)
    } else {
        (omega * tau).sin() / omega
    }
}

/// Coefficients of the `n`-excitation block after an interval τ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockCoefficients {
    pub n: usize,
    pub omega_n: f64,
    /// α_n = cos Ω_nτ + iΔ sin(Ω_nτ)/(2Ω_n)
    pub alpha: Complex64,
    /// λ_n = −i e^{−iΔτ/2} g√n sin(Ω_nτ)/Ω_n
    pub lambda: Complex64,
}

impl BlockCoefficients {
    /// |α_n|² + |λ_n|², which is one for a unitary block.
    pub fn norm_sqr(&self) -> f64 {
        self.alpha.norm_sqr() + self.lambda.norm_sqr()
    }
}

pub fn block_coefficients(params: &SystemParams, n: usize, tau: f64) -> BlockCoefficients {
    let omega_n = rabi_frequency(params, n);
    let delta = params.delta();
    let s = sin_ratio(omega_n, tau);
    let alpha = Complex64::new((omega_n * tau).cos(), delta * s / 2.0);
    let phase = Complex64::from_polar(1.0, -delta * tau / 2.0);
    let lambda = -I * phase * params.g() * (n as f64).sqrt() * s;
    BlockCoefficients { n, omega_n, alpha, lambda }
}

/// Initial / measured state of the charger qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Qubit {
    Ground,
    Excited,
}

impl Qubit {
    pub fn index(self) -> usize {
        match self {
            Qubit::Ground => 0,
            Qubit::Excited => 1,
        }
    }
}

/// Label `ij` of the Kraus operator `R_ij = ⟨j|U|i⟩`: initial qubit state
/// `i`, measured qubit state `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KrausKind {
    Eg,
    Ge,
    Gg,
    Ee,
}

impl KrausKind {
    pub const ALL: [KrausKind; 4] = [KrausKind::Eg, KrausKind::Ge, KrausKind::Gg, KrausKind::Ee];

    pub fn initial(self) -> Qubit {
        match self {
            KrausKind::Eg | KrausKind::Ee => Qubit::Excited,
            KrausKind::Ge | KrausKind::Gg => Qubit::Ground,
        }
    }

    pub fn measured(self) -> Qubit {
        match self {
            KrausKind::Eg | KrausKind::Gg => Qubit::Ground,
            KrausKind::Ge | KrausKind::Ee => Qubit::Excited,
        }
    }

    pub fn from_states(initial: Qubit, measured: Qubit) -> Self {
        match (initial, measured) {
            (Qubit::Excited, Qubit::Ground) => KrausKind::Eg,
            (Qubit::Ground, Qubit::Excited) => KrausKind::Ge,
            (Qubit::Ground, Qubit::Ground) => KrausKind::Gg,
            (Qubit::Excited, Qubit::Excited) => KrausKind::Ee,
        }
    }
}

/// The four Kraus operators `R_ij = ⟨j|U(τ)|i⟩` on the battery.
///
/// They are stored by their nonzero bands: `R_gg` and `R_ee` are diagonal,
/// `R_eg|n−1⟩ = λ_n|n⟩` and `R_ge|n⟩ = λ_n|n−1⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    tau: f64,
    gg: Vec<Complex64>,
    ee: Vec<Complex64>,
    /// `lambda[n] = λ_n`, with `lambda[0] = 0`.
    lambda: Vec<Complex64>,
}

impl KrausSet {
    pub fn new(params: &SystemParams, tau: f64) -> Self {
        let dim = params.dim();
        let top = params.n_levels();
        let phase = Complex64::from_polar(1.0, -params.delta() * tau / 2.0);
        let blocks: Vec<BlockCoefficients> =
            (0..=dim).map(|n| block_coefficients(params, n, tau)).collect();

        let mut gg = Vec::with_capacity(dim);
        let mut ee = Vec::with_capacity(dim);
        let mut lambda = Vec::with_capacity(dim);
        for n in 0..dim {
            // |g,0⟩ does not evolve; its formula value e^{−iΔτ/2}α_0 is 1 up to rounding.
            gg.push(if n == 0 { Complex64::new(1.0, 0.0) } else { phase * blocks[n].alpha });
            ee.push(if n == top {
                // |e,N⟩ has no partner |g,N+1⟩ and only picks up the detuning phase.
                Complex64::from_polar(1.0, -params.delta() * tau)
            } else {
                phase * blocks[n + 1].alpha.conj()
            });
            lambda.push(if n == 0 { Complex64::new(0.0, 0.0) } else { blocks[n].lambda });
        }
        KrausSet { tau, gg, ee, lambda }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dim(&self) -> usize {
        self.gg.len()
    }

    pub fn gg_diagonal(&self) -> &[Complex64] {
        &self.gg
    }

    pub fn ee_diagonal(&self) -> &[Complex64] {
        &self.ee
    }

    /// `λ_n` indexed by `n`, with a zero placeholder at `n = 0`.
    pub fn lambdas(&self) -> &[Complex64] {
        &self.lambda
    }

    /// Copy with every λ_n multiplied by `factor`; breaks completeness
    /// unless `factor` has unit modulus. Used for fault injection.
    pub fn with_scaled_lambda(&self, factor: f64) -> KrausSet {
        let mut k = self.clone();
        k.lambda.iter_mut().for_each(|l| *l *= factor);
        k
    }

    /// Dense (N+1)×(N+1) matrix of `R_kind`.
    pub fn operator(&self, kind: KrausKind) -> DMatrix<Complex64> {
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        match kind {
            KrausKind::Gg => (0..dim).for_each(|n| m[(n, n)] = self.gg[n]),
            KrausKind::Ee => (0..dim).for_each(|n| m[(n, n)] = self.ee[n]),
            KrausKind::Eg => (1..dim).for_each(|n| m[(n, n - 1)] = self.lambda[n]),
            KrausKind::Ge => (1..dim).for_each(|n| m[(n - 1, n)] = self.lambda[n]),
        }
        m
    }

    /// max |Σ_j R_ij† R_ij − 1| for a fixed initial qubit state `i`.
    pub fn completeness_residual(&self, initial: Qubit) -> f64 {
        let sum = [Qubit::Ground, Qubit::Excited]
            .iter()
            .map(|&j| {
                let r = self.operator(KrausKind::from_states(initial, j));
                r.adjoint() * r
            })
            .fold(DMatrix::zeros(self.dim(), self.dim()), |acc, m| acc + m);
        let id = DMatrix::<Complex64>::identity(self.dim(), self.dim());
        (sum - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Unnormalised populations of `M_kind[ρ]` for a diagonal ρ with
    /// populations `p`.
    pub fn map_populations(&self, kind: KrausKind, p: &[f64]) -> Vec<f64> {
        let dim = self.dim();
        let mut out = vec![0.0; dim];
        match kind {
            KrausKind::Eg => {
                for n in 1..dim {
                    out[n] = self.lambda[n].norm_sqr() * p[n - 1];
                }
            }
            KrausKind::Ge => {
                for n in 0..dim - 1 {
                    out[n] = self.lambda[n + 1].norm_sqr() * p[n + 1];
                }
            }
            KrausKind::Gg => {
                for n in 0..dim {
                    out[n] = self.gg[n].norm_sqr() * p[n];
                }
            }
            KrausKind::Ee => {
                for n in 0..dim {
                    out[n] = self.ee[n].norm_sqr() * p[n];
                }
            }
        }
        out
    }
}

/// Applies `M_kind[ρ] = R ρ R†` and normalises.
///
/// Returns the normalised post-state and the trace of `M_kind[ρ]`, which is
/// the probability of the outcome. Diagonal inputs stay diagonal.
pub fn povm_apply(
    kind: KrausKind,
    state: &BatteryState,
    kraus: &KrausSet,
) -> Result<(BatteryState, f64)> {
    if state.dim() != kraus.dim() {
        return Err(Error::DimensionMismatch { expected: kraus.dim(), found: state.dim() });
    }
    match state.matrix() {
        None => BatteryState::from_weights(kraus.map_populations(kind, state.populations())),
        Some(rho) => {
            let r = kraus.operator(kind);
            BatteryState::from_unnormalized_matrix(&r * rho * r.adjoint())
        }
    }
}

/// Joint basis index of `|qubit, n⟩`.
pub fn joint_index(params: &SystemParams, qubit: Qubit, n: usize) -> usize {
    qubit.index() * params.dim() + n
}

/// Dense rotating-frame Hamiltonian on the 2(N+1)-dimensional joint space.
pub fn joint_hamiltonian(params: &SystemParams) -> DMatrix<Complex64> {
    let dim = params.dim();
    let mut h = DMatrix::zeros(2 * dim, 2 * dim);
    for n in 0..dim {
        let e = joint_index(params, Qubit::Excited, n);
        h[(e, e)] = Complex64::new(params.delta(), 0.0);
    }
    for n in 1..dim {
        let e = joint_index(params, Qubit::Excited, n - 1);
        let g = joint_index(params, Qubit::Ground, n);
        let c = Complex64::new(params.g() * (n as f64).sqrt(), 0.0);
        h[(e, g)] = c;
        h[(g, e)] = c;
    }
    h
}

/// U = exp(−iHτ) assembled from the closed-form eigendecomposition of each
/// conserved-excitation block.
///
/// This is independent of [`block_coefficients`] and serves as its oracle.
pub fn joint_unitary(params: &SystemParams, tau: f64) -> DMatrix<Complex64> {
    let dim = params.dim();
    let delta = params.delta();
    let mut u = DMatrix::zeros(2 * dim, 2 * dim);

    let g0 = joint_index(params, Qubit::Ground, 0);
    u[(g0, g0)] = Complex64::new(1.0, 0.0);
    let top = joint_index(params, Qubit::Excited, params.n_levels());
    u[(top, top)] = Complex64::from_polar(1.0, -delta * tau);

    for n in 1..dim {
        // Block [[Δ, c], [c, 0]] in the basis (|e,n−1⟩, |g,n⟩).
        let c = params.g() * (n as f64).sqrt();
        let half_gap = ((delta / 2.0).powi(2) + c * c).sqrt();
        let angle = 0.5 * (2.0 * c).atan2(delta);
        let (s, co) = angle.sin_cos();
        let upper = [co, s];
        let lower = [-s, co];
        let e_up = Complex64::from_polar(1.0, -(delta / 2.0 + half_gap) * tau);
        let e_lo = Complex64::from_polar(1.0, -(delta / 2.0 - half_gap) * tau);
        let idx = [
            joint_index(params, Qubit::Excited, n - 1),
            joint_index(params, Qubit::Ground, n),
        ];
        for a in 0..2 {
            for b in 0..2 {
                u[(idx[a], idx[b])] = e_up * upper[a] * upper[b] + e_lo * lower[a] * lower[b];
            }
        }
    }
    u
}

// Copyright 2026 The qbattery Authors
// SPDX-License-Identifier: Apache-2.0

//! Measurement-interval policies and multi-round protocols.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::optimize::{grid_then_golden, uniform_grid};
use crate::propagator::{KrausKind, KrausSet};
use crate::round::{general_round, population_weights, power_off_round, power_on_round, RoundRecord, Scheme};
use crate::states::{BatteryState, SystemParams};
use crate::thermo::{self, ThermoSnapshot};

/// Relative x-tolerance of the golden-section refinement.
pub const REFINE_TOLERANCE: f64 = 1e-6;

/// Grid lobes within this fraction of the best grid value are refined.
const LOBE_SLACK: f64 = 1e-3;

/// Uniform interval grid `τ_k = k · τ_max / points`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub points: usize,
    /// Upper end of the grid; `None` means 2π/g.
    pub tau_max: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { points: 400, tau_max: None }
    }
}

impl GridSpec {
    pub fn tau_max(&self, params: &SystemParams) -> f64 {
        self.tau_max.unwrap_or(2.0 * PI / params.g())
    }

    pub fn taus(&self, params: &SystemParams) -> Vec<f64> {
        uniform_grid(self.tau_max(params), self.points.max(1))
    }
}

/// Which success probability enters exp(x·P) in the power-off objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerOffObjective {
    /// Product of all earlier rounds times the candidate round.
    Cumulative,
    /// The candidate round alone.
    PerRound,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompromiseConfig {
    /// Balancing index, x > 1.
    pub x: f64,
    pub objective: PowerOffObjective,
    /// Search only (0, τ_peak], where τ_peak maximises the round's
    /// probability. With `false` the whole grid is searched.
    pub pre_peak: bool,
}

impl Default for CompromiseConfig {
    fn default() -> Self {
        CompromiseConfig { x: 10.0, objective: PowerOffObjective::Cumulative, pre_peak: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntervalPolicy {
    /// τ = π/(2g√(n̄+1)).
    Analytic,
    /// Maximise the round's success probability.
    Numeric(GridSpec),
    /// Maximise exp(x·P)·log_x(r).
    PowerOffCompromise(CompromiseConfig, GridSpec),
    Fixed(f64),
}

/// τ = π/(2g√(n̄+1)) from the current mean occupation.
pub fn tau_opt_analytic(state: &BatteryState, params: &SystemParams) -> f64 {
    PI / (2.0 * params.g() * (state.mean_occupation() + 1.0).sqrt())
}

/// Success probability and post-selected mean occupation of one round,
/// without building the post-state. The mean is NaN when the probability
/// vanishes.
pub fn round_outcome(state: &BatteryState, params: &SystemParams, scheme: Scheme, tau: f64) -> Result<(f64, f64)> {
    let weights = if state.is_diagonal() {
        match scheme {
            Scheme::PowerOn => KrausSet::new(params, tau).map_populations(KrausKind::Eg, state.populations()),
            Scheme::PowerOff => KrausSet::new(params, tau).map_populations(KrausKind::Ge, state.populations()),
            Scheme::General(c) => population_weights(state, c, params, tau)?,
        }
    } else {
        return match general_round(state, scheme.charger(), params, tau) {
            Ok(rec) => Ok((rec.probability, rec.post_state.mean_occupation())),
            Err(Error::ZeroProbability { .. }) => Ok((0.0, f64::NAN)),
            Err(e) => Err(e),
        };
    };
    let probability: f64 = weights.iter().sum();
    let first: f64 = weights.iter().enumerate().map(|(n, w)| n as f64 * w).sum();
    let mean = if probability > 0.0 { first / probability } else { f64::NAN };
    Ok((probability, mean))
}

/// τ maximising the round's success probability on the grid, refined by
/// golden-section search. Equally high lobes resolve to the smallest τ.
pub fn tau_opt_numeric(state: &BatteryState, params: &SystemParams, scheme: Scheme, grid: GridSpec) -> Result<f64> {
    let mut failure = None;
    let objective = |tau: f64| match round_outcome(state, params, scheme, tau) {
        Ok((p, _)) => p,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    };
    let best = grid_then_golden(objective, &grid.taus(params), REFINE_TOLERANCE, LOBE_SLACK);
    if let Some(e) = failure {
        return Err(e);
    }
    best.map(|(tau, _)| tau).ok_or(Error::NoCharging)
}

/// exp(x·P)·log_x(r). Negative exactly when the round discharges.
pub fn compromise_objective(probability: f64, ratio: f64, x: f64) -> f64 {
    (x * probability).exp() * ratio.ln() / x.ln()
}

/// Power-off compromise interval. `cumulative_p` is the product of the
/// probabilities of all earlier rounds (1 before the first round).
pub fn tau_opt_power_off(
    state: &BatteryState,
    params: &SystemParams,
    cumulative_p: f64,
    config: CompromiseConfig,
    grid: GridSpec,
) -> Result<f64> {
    tau_opt_compromise(state, params, Scheme::PowerOff, cumulative_p, config, grid)
}

fn tau_opt_compromise(
    state: &BatteryState,
    params: &SystemParams,
    scheme: Scheme,
    cumulative_p: f64,
    config: CompromiseConfig,
    grid: GridSpec,
) -> Result<f64> {
    if !(config.x > 1.0) {
        return Err(Error::InvalidParameter(format!("balancing index x must exceed 1, got {}", config.x)));
    }
    let mean = state.mean_occupation();
    if !(mean > 0.0) {
        return Err(Error::InvalidState("compromise objective needs a nonzero mean occupation".into()));
    }
    let window = if config.pre_peak {
        let peak = tau_opt_numeric(state, params, scheme, grid)?;
        GridSpec { points: grid.points, tau_max: Some(peak) }
    } else {
        grid
    };
    let weight = match config.objective {
        PowerOffObjective::Cumulative => cumulative_p,
        PowerOffObjective::PerRound => 1.0,
    };
    let mut failure = None;
    let mut charging = false;
    let objective = |tau: f64| match round_outcome(state, params, scheme, tau) {
        Ok((p, m)) if p > 0.0 => {
            let r = m / mean;
            charging |= r > 1.0;
            compromise_objective(weight * p, r, config.x)
        }
        Ok(_) => f64::NEG_INFINITY,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    };
    let best = grid_then_golden(objective, &window.taus(params), REFINE_TOLERANCE, LOBE_SLACK);
    if let Some(e) = failure {
        return Err(e);
    }
    match best {
        Some((tau, value)) if charging && value > 0.0 => Ok(tau),
        _ => Err(Error::NoCharging),
    }
}

/// Chooses τ for the next round.
pub fn choose_tau(
    state: &BatteryState,
    params: &SystemParams,
    scheme: Scheme,
    policy: IntervalPolicy,
    cumulative_p: f64,
) -> Result<f64> {
    if params.g() == 0.0 && !matches!(policy, IntervalPolicy::Fixed(_)) {
        return Err(Error::InvalidParameter("interval optimisation needs g > 0".into()));
    }
    match policy {
        IntervalPolicy::Analytic => Ok(tau_opt_analytic(state, params)),
        IntervalPolicy::Numeric(grid) => tau_opt_numeric(state, params, scheme, grid),
        IntervalPolicy::PowerOffCompromise(config, grid) => {
            tau_opt_compromise(state, params, scheme, cumulative_p, config, grid)
        }
        IntervalPolicy::Fixed(tau) if tau >= 0.0 && tau.is_finite() => Ok(tau),
        IntervalPolicy::Fixed(tau) => Err(Error::InvalidParameter(format!("fixed interval {tau} is not a finite τ ≥ 0"))),
    }
}

/// One round with the closed-system maps. Diagonal batteries under the
/// power-on and power-off schemes take the analytic population maps; all
/// other cases go through the joint unitary.
pub fn execute_round(state: &BatteryState, params: &SystemParams, scheme: Scheme, tau: f64) -> Result<RoundRecord> {
    match scheme {
        Scheme::PowerOn if state.is_diagonal() => power_on_round(state, params, tau),
        Scheme::PowerOff if state.is_diagonal() => power_off_round(state, params, tau),
        _ => general_round(state, scheme.charger(), params, tau).map(|rec| RoundRecord { scheme, ..rec }),
    }
}

/// Where a protocol stopped early.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    /// 1-based index of the round that failed.
    pub round: usize,
    pub error: Error,
}

/// Post-selected record of a multi-round protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: SystemParams,
    pub scheme: Scheme,
    pub initial: BatteryState,
    /// Successful rounds in order; never empty.
    pub rounds: Vec<RoundRecord>,
    /// `cumulative[m − 1]` is the product of the first m round probabilities.
    pub cumulative: Vec<f64>,
    pub truncated: Option<Truncation>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn cumulative_probability(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(1.0)
    }

    /// State after round `m`; `m = 0` is the initial state.
    pub fn state(&self, m: usize) -> Result<&BatteryState> {
        match m {
            0 => Ok(&self.initial),
            _ => self
                .rounds
                .get(m - 1)
                .map(|r| &r.post_state)
                .ok_or(Error::IndexOutOfRange { index: m, len: self.len() }),
        }
    }

    pub fn taus(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.tau).collect()
    }

    /// Energies E^{(0)}, …, E^{(M)}.
    pub fn energies(&self) -> Vec<f64> {
        std::iter::once(&self.initial)
            .chain(self.rounds.iter().map(|r| &r.post_state))
            .map(|s| thermo::energy(s, &self.params))
            .collect()
    }

    /// (E^{(m)} − E^{(m−1)})/τ^{(m)} for 1 ≤ m ≤ len.
    pub fn charging_power(&self, m: usize) -> Result<f64> {
        thermo::charging_power(&self.energies(), &self.taus(), m)
    }

    /// Snapshots for m = 0..=len; `power` is set from round 1 on.
    pub fn snapshots(&self) -> Vec<ThermoSnapshot> {
        let energies = self.energies();
        let taus = self.taus();
        std::iter::once(&self.initial)
            .chain(self.rounds.iter().map(|r| &r.post_state))
            .enumerate()
            .map(|(m, s)| ThermoSnapshot {
                power: if m == 0 { None } else { thermo::charging_power(&energies, &taus, m).ok() },
                ..ThermoSnapshot::of(s, &self.params)
            })
            .collect()
    }
}

/// Drives `n_rounds` post-selected rounds.
///
/// After the first round, a zero-probability outcome or a state no interval
/// can charge ends the run early; the cause is kept in
/// [`Trajectory::truncated`]. Failures in round 1, and any other error, are
/// returned wrapped in [`Error::Round`].
pub fn run_protocol(
    initial: &BatteryState,
    params: &SystemParams,
    scheme: Scheme,
    n_rounds: usize,
    policy: IntervalPolicy,
) -> Result<Trajectory> {
    run_with(initial, params, scheme, n_rounds, |state, cumulative| {
        let tau = choose_tau(state, params, scheme, policy, cumulative)?;
        execute_round(state, params, scheme, tau)
    })
}

/// Shared loop for closed and open protocols. `step` runs one round given
/// the current state and the cumulative probability so far.
pub(crate) fn run_with<F>(
    initial: &BatteryState,
    params: &SystemParams,
    scheme: Scheme,
    n_rounds: usize,
    mut step: F,
) -> Result<Trajectory>
where
    F: FnMut(&BatteryState, f64) -> Result<RoundRecord>,
{
    if n_rounds == 0 {
        return Err(Error::InvalidParameter("n_rounds must be at least 1".into()));
    }
    if initial.dim() != params.dim() {
        return Err(Error::DimensionMismatch { expected: params.dim(), found: initial.dim() });
    }
    let mut rounds: Vec<RoundRecord> = Vec::with_capacity(n_rounds);
    let mut cumulative = Vec::with_capacity(n_rounds);
    let mut truncated = None;
    for m in 1..=n_rounds {
        let state = rounds.last().map_or(initial, |r| &r.post_state);
        let prior = cumulative.last().copied().unwrap_or(1.0);
        match step(state, prior) {
            Ok(rec) => {
                cumulative.push(prior * rec.probability);
                rounds.push(rec);
            }
            Err(error @ (Error::ZeroProbability { .. } | Error::NoCharging)) if m > 1 => {
                log::info!("protocol truncated at round {m}: {error}");
                truncated = Some(Truncation { round: m, error });
                break;
            }
            Err(e) => return Err(Error::Round { round: m, source: Box::new(e) }),
        }
    }
    Ok(Trajectory { params: *params, scheme, initial: initial.clone(), rounds, cumulative, truncated })
}

/// Outcome of a sampled (non-post-selected) run.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledRun {
    /// The successful attempt, or the longest partial one when the restart
    /// budget ran out.
    pub trajectory: Trajectory,
    pub completed: bool,
    /// Failed attempts before the recorded one.
    pub restarts: usize,
    /// Rounds executed over all attempts, including failed ones.
    pub total_rounds: usize,
}

/// Sampling mode: each round succeeds with its probability, drawn from a
/// ChaCha8 stream seeded with `seed`. On failure the battery is discarded
/// and the protocol restarts from `initial`, at most `max_restarts` times.
pub fn run_sampled(
    initial: &BatteryState,
    params: &SystemParams,
    scheme: Scheme,
    n_rounds: usize,
    policy: IntervalPolicy,
    seed: u64,
    max_restarts: usize,
) -> Result<SampledRun> {
    // The post-selected schedule is deterministic, so compute it once and
    // replay the Bernoulli draws against it.
    let reference = run_protocol(initial, params, scheme, n_rounds, policy)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total_rounds = 0;
    let mut longest = 0;
    for restarts in 0..=max_restarts {
        let mut reached = 0;
        for rec in &reference.rounds {
            total_rounds += 1;
            if rng.gen::<f64>() >= rec.probability {
                break;
            }
            reached += 1;
        }
        longest = longest.max(reached);
        if reached == reference.len() {
            return Ok(SampledRun { trajectory: reference, completed: true, restarts, total_rounds });
        }
    }
    let mut trajectory = reference;
    trajectory.rounds.truncate(longest.max(1));
    trajectory.cumulative.truncate(longest.max(1));
    Ok(SampledRun { trajectory, completed: false, restarts: max_restarts + 1, total_rounds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::ChargerSpec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn standard(beta: f64) -> SystemParams {
        SystemParams::new(100, 0.02, 0.04, beta).unwrap()
    }

    #[test]
    fn analytic_interval_values() {
        let p = standard(0.05);
        assert_relative_eq!(tau_opt_analytic(&BatteryState::vacuum(100), &p), PI / 0.08, epsilon = 1e-12);
        let mut w = vec![0.0; 101];
        w[19] = 0.6;
        w[20] = 0.4;
        let s = BatteryState::from_populations(w).unwrap();
        assert!((s.mean_occupation() - 19.4).abs() < 1e-12);
        assert!((tau_opt_analytic(&s, &p) - 8.7).abs() < 0.05);
        let mut last = f64::INFINITY;
        for m in 0..=100 {
            let t = tau_opt_analytic(&BatteryState::fock(100, m), &p);
            assert!(t < last);
            last = t;
        }
    }

    #[test]
    fn numeric_interval_on_resonant_vacuum() {
        let p = SystemParams::new(20, 0.0, 0.04, 0.1).unwrap();
        let vac = BatteryState::vacuum(20);
        let t = tau_opt_numeric(&vac, &p, Scheme::PowerOn, GridSpec::default()).unwrap();
        let a = tau_opt_analytic(&vac, &p);
        assert!(((t - a) / a).abs() < 1e-6, "{t} vs {a}");
    }

    #[test]
    fn numeric_dominates_analytic() {
        for beta in [0.01, 0.1, 1.0] {
            let p = standard(beta);
            let s = BatteryState::thermal(&p);
            let tn = tau_opt_numeric(&s, &p, Scheme::PowerOn, GridSpec::default()).unwrap();
            let ta = tau_opt_analytic(&s, &p);
            let pn = round_outcome(&s, &p, Scheme::PowerOn, tn).unwrap().0;
            let pa = round_outcome(&s, &p, Scheme::PowerOn, ta).unwrap().0;
            assert!(pn >= pa - 1e-12);
        }
    }

    #[test]
    fn resonant_vacuum_protocol_climbs_fock_ladder() {
        let p = SystemParams::new(30, 0.0, 0.04, f64::INFINITY).unwrap();
        let traj = run_protocol(&BatteryState::vacuum(30), &p, Scheme::PowerOn, 12, IntervalPolicy::Analytic).unwrap();
        assert_eq!(traj.len(), 12);
        assert!((traj.cumulative_probability() - 1.0).abs() < 1e-12);
        assert_eq!(traj.state(12).unwrap(), &BatteryState::fock(30, 12));
        assert!(traj.state(13).is_err());
    }

    #[test]
    fn power_off_compromise_rejects_non_charging_states() {
        let p = standard(0.05);
        let top = BatteryState::fock(100, 100);
        let grid = GridSpec::default();
        assert_eq!(
            tau_opt_power_off(&top, &p, 1.0, CompromiseConfig::default(), grid),
            Err(Error::NoCharging)
        );
        let bad = CompromiseConfig { x: 1.0, ..CompromiseConfig::default() };
        assert!(tau_opt_power_off(&BatteryState::thermal(&p), &p, 1.0, bad, grid).is_err());
    }

    #[test]
    fn exhausted_power_off_run_is_truncated() {
        let p = SystemParams::new(20, 0.02, 0.04, 0.05).unwrap();
        let policy = IntervalPolicy::PowerOffCompromise(CompromiseConfig::default(), GridSpec::default());
        let traj = run_protocol(&BatteryState::thermal(&p), &p, Scheme::PowerOff, 40, policy).unwrap();
        let cut = traj.truncated.as_ref().expect("a 20-level battery fills up");
        assert_eq!(cut.error, Error::NoCharging);
        assert_eq!(cut.round, traj.len() + 1);
        let top = BatteryState::fock(20, 20);
        assert!(matches!(
            run_protocol(&top, &p, Scheme::PowerOff, 3, policy),
            Err(Error::Round { round: 1, .. })
        ));
    }

    #[test]
    fn power_off_compromise_charges_thermal_state() {
        let p = standard(0.05);
        let s = BatteryState::thermal(&p);
        for objective in [PowerOffObjective::Cumulative, PowerOffObjective::PerRound] {
            let cfg = CompromiseConfig { objective, ..CompromiseConfig::default() };
            let tau = tau_opt_power_off(&s, &p, 1.0, cfg, GridSpec::default()).unwrap();
            let (prob, mean) = round_outcome(&s, &p, Scheme::PowerOff, tau).unwrap();
            assert!(prob > 0.0);
            assert!(mean > s.mean_occupation());
        }
    }

    #[test]
    fn objective_sign_follows_ratio() {
        for x in [1.5, 10.0, 100.0] {
            assert!(compromise_objective(0.01, 1.001, x) > 0.0);
            assert!(compromise_objective(0.99, 0.999, x) < 0.0);
            assert_eq!(compromise_objective(0.5, 1.0, x), 0.0);
        }
    }

    #[test]
    fn truncation_is_reported() {
        let p = SystemParams::new(10, 0.0, 0.04, 0.1).unwrap();
        let tau = PI / (2.0 * 0.04 * 2f64.sqrt());
        let traj = run_protocol(&BatteryState::fock(10, 2), &p, Scheme::PowerOff, 5, IntervalPolicy::Fixed(tau)).unwrap();
        assert_eq!(traj.len(), 2);
        let t = traj.truncated.as_ref().unwrap();
        assert_eq!(t.round, 3);
        assert!(matches!(t.error, Error::ZeroProbability { .. }));

        let err = run_protocol(&BatteryState::vacuum(10), &p, Scheme::PowerOff, 5, IntervalPolicy::Fixed(tau));
        assert!(matches!(err, Err(Error::Round { round: 1, .. })));
        assert!(run_protocol(&BatteryState::vacuum(10), &p, Scheme::PowerOn, 0, IntervalPolicy::Analytic).is_err());
    }

    #[test]
    fn general_scheme_protocol_runs_on_full_matrices() {
        let p = SystemParams::new(12, 0.02, 0.04, 0.1).unwrap();
        let charger = ChargerSpec::new(0.2, 0.6, 0.0).unwrap();
        let traj = run_protocol(
            &BatteryState::thermal(&p),
            &p,
            Scheme::General(charger),
            3,
            IntervalPolicy::Fixed(8.0),
        )
        .unwrap();
        assert_eq!(traj.len(), 3);
        assert!(traj.rounds[0].post_state.max_coherence() > 1e-6);
        assert_eq!(traj.rounds[0].scheme, Scheme::General(charger));
    }

    #[test]
    fn snapshots_carry_power_from_round_one() {
        let p = SystemParams::new(20, 0.02, 0.04, 0.1).unwrap();
        let traj = run_protocol(&BatteryState::thermal(&p), &p, Scheme::PowerOn, 4, IntervalPolicy::Analytic).unwrap();
        let snaps = traj.snapshots();
        assert_eq!(snaps.len(), 5);
        assert!(snaps[0].power.is_none());
        for (m, snap) in snaps.iter().enumerate().skip(1) {
            assert_eq!(snap.power, Some(traj.charging_power(m).unwrap()));
        }
        let fixed = run_protocol(&BatteryState::vacuum(20), &p, Scheme::PowerOn, 1, IntervalPolicy::Fixed(0.0));
        assert!(fixed.is_err());
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let p = SystemParams::new(30, 0.02, 0.04, 0.1).unwrap();
        let s = BatteryState::thermal(&p);
        let run = |seed| run_sampled(&s, &p, Scheme::PowerOn, 5, IntervalPolicy::Analytic, seed, 10_000).unwrap();
        let a = run(7);
        assert_eq!(a, run(7));
        assert!(a.completed);
        assert!(a.total_rounds >= 5);
        let never = run_sampled(&s, &p, Scheme::PowerOn, 5, IntervalPolicy::Fixed(1e-3), 1, 3).unwrap();
        assert!(!never.completed);
        assert_eq!(never.restarts, 4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn x_does_not_move_argmax_at_frozen_probability(
            ratios in prop::collection::vec(0.5f64..2.0, 2..50),
            p in 0.0f64..1.0,
        ) {
            let argmax = |x: f64| {
                let mut best = 0;
                for (k, &r) in ratios.iter().enumerate() {
                    if compromise_objective(p, r, x) > compromise_objective(p, ratios[best], x) {
                        best = k;
                    }
                }
                best
            };
            let brute = ratios.iter().enumerate().fold(0, |b, (k, &r)| if r > ratios[b] { k } else { b });
            for x in [1.1, 2.0, 10.0, 100.0] {
                prop_assert_eq!(argmax(x), brute);
            }
        }
    }
}

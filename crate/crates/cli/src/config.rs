// Copyright 2026 The qbattery Authors
// SPDX-License-Identifier: Apache-2.0

//! Run configuration: a versioned JSON document with defaults for every
//! field, plus `key=value` overrides addressed by dotted config keys.

use std::path::{Path, PathBuf};

use qbattery::ode::OdeOptions;
use qbattery::scheduler::{CompromiseConfig, GridSpec, PowerOffObjective};
use qbattery::{ChargerSpec, IntervalPolicy, Scheme, SystemParams};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    SweepThetaQ,
    IntervalSweep,
    PowerOn,
    PowerOff,
    Histograms,
    Lindblad,
    Validate,
}

impl Experiment {
    pub fn file_stem(self) -> &'static str {
        match self {
            Experiment::SweepThetaQ => "sweep_theta_q",
            Experiment::IntervalSweep => "interval_sweep",
            Experiment::PowerOn => "power_on",
            Experiment::PowerOff => "power_off",
            Experiment::Histograms => "histograms",
            Experiment::Lindblad => "lindblad",
            Experiment::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    PowerOn,
    PowerOff,
    /// Uses the `charger` section.
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    Analytic,
    Numeric,
    PowerOffCompromise,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveName {
    Cumulative,
    PerRound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    /// Scheme for `histograms`; the protocol commands fix their own.
    pub scheme: SchemeName,
    /// `None` picks analytic for power-on and the compromise for power-off.
    pub policy: Option<PolicyName>,
    pub n_rounds: usize,
    pub fixed_tau: Option<f64>,
    pub grid_points: usize,
    /// Upper end of the τ search grid; `None` means 2π/g.
    pub tau_max: Option<f64>,
    pub x: f64,
    pub objective: ObjectiveName,
    pub pre_peak: bool,
    /// Rounds whose full population vector is written out.
    pub histogram_rounds: Vec<usize>,
    /// Switches to sampling mode when set.
    pub seed: Option<u64>,
    pub max_restarts: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            scheme: SchemeName::PowerOn,
            policy: None,
            n_rounds: 80,
            fixed_tau: None,
            grid_points: GridSpec::default().points,
            tau_max: None,
            x: CompromiseConfig::default().x,
            objective: ObjectiveName::Cumulative,
            pre_peak: true,
            histogram_rounds: vec![5, 20, 50, 80],
            seed: None,
            max_restarts: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub theta_points: usize,
    pub q_points: usize,
    pub tau: f64,
    pub coherences: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { theta_points: 101, q_points: 101, tau: 8.0, coherences: vec![0.0, 1.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntervalConfig {
    pub tau_min: f64,
    pub tau_max: f64,
    pub points: usize,
    /// Round indices m at which n̄ and P are reported.
    pub rounds: Vec<usize>,
    pub schemes: Vec<SchemeName>,
}

impl Default for IntervalConfig {
    fn default() -> Self {
        IntervalConfig {
            tau_min: 0.05,
            tau_max: 20.0,
            points: 400,
            rounds: vec![1, 2, 5],
            schemes: vec![SchemeName::PowerOn, SchemeName::PowerOff],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DissipationConfig {
    /// Each γ is used for both battery and charger.
    pub gammas: Vec<f64>,
    /// Bath occupations; `None` derives them from β.
    pub nbar_th: Option<f64>,
    pub nbar_th_c: Option<f64>,
    pub atol: f64,
    pub rtol: f64,
    /// Wall-clock limit for the whole command, in seconds.
    pub budget_seconds: f64,
}

impl Default for DissipationConfig {
    fn default() -> Self {
        let ode = OdeOptions::default();
        DissipationConfig {
            gammas: vec![1e-5, 1e-4, 1e-3],
            nbar_th: None,
            nbar_th_c: None,
            atol: ode.atol,
            rtol: ode.rtol,
            budget_seconds: 600.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    /// Test hook: multiplies every λ_n before the completeness check.
    pub lambda_scale: f64,
    pub oracle_levels: usize,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig { lambda_scale: 1.0, oracle_levels: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub experiment: Option<Experiment>,
    pub params: SystemParams,
    pub charger: ChargerSpec,
    pub schedule: Schedule,
    pub sweep: SweepConfig,
    pub interval: IntervalConfig,
    pub dissipation: DissipationConfig,
    pub validate: ValidateConfig,
    pub output_path: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema: SCHEMA_VERSION,
            experiment: None,
            params: SystemParams::default(),
            charger: ChargerSpec::power_on(),
            schedule: Schedule::default(),
            sweep: SweepConfig::default(),
            interval: IntervalConfig::default(),
            dissipation: DissipationConfig::default(),
            validate: ValidateConfig::default(),
            output_path: PathBuf::from("out"),
        }
    }
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parses an override value: JSON when it parses, a bare string otherwise.
fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()))
}

fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_error(format!("override {assignment:?} is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(config_error(format!("bad override key {key:?}")));
    }
    let mut node = doc;
    for part in &path[..path.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| config_error(format!("override key {key:?} descends into a non-object")))?;
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| config_error(format!("override key {key:?} descends into a non-object")))?;
    obj.insert(path[path.len() - 1].to_owned(), parse_value(raw.trim()));
    Ok(())
}

/// Reads `path` (or starts from defaults), applies the overrides in order
/// and validates the result.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut doc = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| config_error(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str::<Value>(&text)
                .map_err(|e| config_error(format!("{}: {e}", p.display())))?
        }
        None => Value::Object(Default::default()),
    };
    if !doc.is_object() {
        return Err(config_error("config root must be a JSON object"));
    }
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let config: RunConfig = serde_json::from_value(doc).map_err(|e| config_error(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema != SCHEMA_VERSION {
            return Err(config_error(format!(
                "unsupported schema {} (this build reads schema {SCHEMA_VERSION})",
                self.schema
            )));
        }
        let s = &self.schedule;
        if s.n_rounds == 0 {
            return Err(config_error("schedule.n_rounds must be at least 1"));
        }
        if s.grid_points == 0 {
            return Err(config_error("schedule.grid_points must be at least 1"));
        }
        if !(s.x > 1.0 && s.x.is_finite()) {
            return Err(config_error(format!("schedule.x must exceed 1, got {}", s.x)));
        }
        if let Some(t) = s.tau_max {
            if !(t > 0.0 && t.is_finite()) {
                return Err(config_error(format!("schedule.tau_max must be positive, got {t}")));
            }
        }
        if s.policy == Some(PolicyName::Fixed) && s.fixed_tau.is_none() {
            return Err(config_error("policy \"fixed\" needs schedule.fixed_tau"));
        }
        let w = &self.sweep;
        if w.theta_points < 2 || w.q_points < 2 {
            return Err(config_error("sweep grids need at least 2 points per axis"));
        }
        if !(w.tau >= 0.0 && w.tau.is_finite()) {
            return Err(config_error(format!("sweep.tau must be finite and ≥ 0, got {}", w.tau)));
        }
        if let Some(c) = w.coherences.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(config_error(format!("sweep.coherences entries must lie in [0, 1], got {c}")));
        }
        let i = &self.interval;
        if !(i.tau_min >= 0.0 && i.tau_max > i.tau_min && i.tau_max.is_finite()) || i.points < 2 {
            return Err(config_error("interval grid needs 0 ≤ tau_min < tau_max and at least 2 points"));
        }
        if i.rounds.is_empty() || i.rounds.contains(&0) {
            return Err(config_error("interval.rounds must be a non-empty list of rounds ≥ 1"));
        }
        let d = &self.dissipation;
        if d.gammas.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(config_error("dissipation.gammas must be finite and ≥ 0"));
        }
        if !(d.atol > 0.0 && d.rtol >= 0.0) {
            return Err(config_error("dissipation tolerances must be positive"));
        }
        if !(d.budget_seconds > 0.0) {
            return Err(config_error("dissipation.budget_seconds must be positive"));
        }
        if !(self.validate.lambda_scale.is_finite()) || self.validate.oracle_levels == 0 {
            return Err(config_error("validate.lambda_scale must be finite and oracle_levels ≥ 1"));
        }
        Ok(())
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec { points: self.schedule.grid_points, tau_max: self.schedule.tau_max }
    }

    pub fn scheme(&self, name: SchemeName) -> Scheme {
        match name {
            SchemeName::PowerOn => Scheme::PowerOn,
            SchemeName::PowerOff => Scheme::PowerOff,
            SchemeName::General => Scheme::General(self.charger),
        }
    }

    /// Interval policy for `scheme`, falling back to the scheme's usual one.
    pub fn policy(&self, scheme: Scheme) -> IntervalPolicy {
        let s = &self.schedule;
        let name = s.policy.unwrap_or(match scheme {
            Scheme::PowerOff => PolicyName::PowerOffCompromise,
            _ => PolicyName::Analytic,
        });
        match name {
            PolicyName::Analytic => IntervalPolicy::Analytic,
            PolicyName::Numeric => IntervalPolicy::Numeric(self.grid()),
            PolicyName::Fixed => IntervalPolicy::Fixed(s.fixed_tau.unwrap_or(0.0)),
            PolicyName::PowerOffCompromise => IntervalPolicy::PowerOffCompromise(
                CompromiseConfig {
                    x: s.x,
                    objective: match s.objective {
                        ObjectiveName::Cumulative => PowerOffObjective::Cumulative,
                        ObjectiveName::PerRound => PowerOffObjective::PerRound,
                    },
                    pre_peak: s.pre_peak,
                },
                self.grid(),
            ),
        }
    }

    pub fn ode(&self) -> OdeOptions {
        OdeOptions::with_tolerances(self.dissipation.atol, self.dissipation.rtol)
    }
}

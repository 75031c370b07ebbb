//! Scenario sweeps: re-optimise the threshold policy at every sweep point
//! and evaluate it alongside a roster of delay policies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, SubsystemKernel, TransitionModel};
use crate::policy::{ConstantPolicy, DelayPolicy, Policy, ThresholdPolicy};
use crate::rng::StreamKey;
use crate::scenario::ScenarioConfig;
use crate::sim::{monte_carlo_eval, EvalReport};
use crate::spsa::{spsa_run, SpsaConfig, Theta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// `p11` of the SM kernel.
    SmP11,
    /// `p01` of the SM kernel.
    SmP01,
    Horizon,
    ProbeCost,
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sm_p11" => Ok(SweepParameter::SmP11),
            "sm_p01" => Ok(SweepParameter::SmP01),
            "horizon" => Ok(SweepParameter::Horizon),
            "probe_cost" => Ok(SweepParameter::ProbeCost),
            other => Err(Error::InvalidConfig(format!("unknown sweep parameter `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RosterEntry {
    /// SPSA-optimised threshold policy, re-optimised per sweep point.
    Threshold,
    Delay(u32),
    NeverProbe,
    AlwaysProbe,
}

impl RosterEntry {
    pub fn id(&self) -> String {
        match self {
            RosterEntry::Threshold => "threshold".into(),
            RosterEntry::Delay(d) => format!("delay_d{d}"),
            RosterEntry::NeverProbe => "never_probe".into(),
            RosterEntry::AlwaysProbe => "always_probe".into(),
        }
    }
}

impl std::str::FromStr for RosterEntry {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "threshold" => Ok(RosterEntry::Threshold),
            "never_probe" => Ok(RosterEntry::NeverProbe),
            "always_probe" => Ok(RosterEntry::AlwaysProbe),
            _ => s
                .strip_prefix("delay_d")
                .and_then(|d| d.parse::<u32>().ok())
                .filter(|&d| d >= 1)
                .map(RosterEntry::Delay)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown roster entry `{s}`"))),
        }
    }
}

/// Threshold policy plus delay policies with `D = 1, 10, 20, ..., 90`.
pub fn default_roster() -> Vec<RosterEntry> {
    let mut r = vec![RosterEntry::Threshold, RosterEntry::Delay(1)];
    r.extend((1..=9).map(|i| RosterEntry::Delay(10 * i)));
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub name: String,
    pub base: ScenarioConfig,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub roster: Vec<RosterEntry>,
    pub replications: usize,
}

impl SweepSpec {
    fn p11_grid() -> Vec<f64> {
        (1..=9).map(|i| i as f64 / 10.0).collect()
    }

    /// Basic scenario, SM `p11` in `0.1..=0.9`.
    pub fn sm_persistence() -> Result<Self> {
        Ok(SweepSpec {
            name: "sm_persistence".into(),
            base: ScenarioConfig::basic(0.1)?,
            parameter: SweepParameter::SmP11,
            values: Self::p11_grid(),
            roster: default_roster(),
            replications: 2000,
        })
    }

    /// SM `p01` raised to 0.2.
    pub fn frequent_faults() -> Result<Self> {
        let mut s = Self::sm_persistence()?;
        s.name = "frequent_faults".into();
        s.base.set_sm_kernel(SubsystemKernel::from_fault_probs(0.2, 0.1)?)?;
        Ok(s)
    }

    /// Only the SM link fails: MS and sensor always return to healthy.
    pub fn sm_only() -> Result<Self> {
        let mut s = Self::frequent_faults()?;
        s.name = "sm_only".into();
        let h = SubsystemKernel::always_healthy();
        s.base.transition = TransitionModel::new(h, h, s.base.transition.sm)?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Empty("sweep value list"));
        }
        if self.roster.is_empty() {
            return Err(Error::Empty("policy roster"));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        for &v in &self.values {
            apply_parameter(&self.base, self.parameter, v)?;
        }
        Ok(())
    }
}

pub fn apply_parameter(base: &ScenarioConfig, parameter: SweepParameter, value: f64) -> Result<ScenarioConfig> {
    let mut c = base.clone();
    match parameter {
        SweepParameter::SmP11 => {
            let sm = c.transition.sm;
            c.set_sm_kernel(SubsystemKernel::from_fault_probs(sm.p01, value)?)?;
        }
        SweepParameter::SmP01 => {
            let sm = c.transition.sm;
            c.set_sm_kernel(SubsystemKernel::from_fault_probs(value, sm.p11)?)?;
        }
        SweepParameter::Horizon => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(Error::InvalidConfig(format!("horizon {value} is not a positive integer")));
            }
            c.horizon = value as u32;
            c.initial_aoi = c.initial_aoi.min(c.horizon);
        }
        SweepParameter::ProbeCost => c.probe_cost = value,
    }
    c.validate()?;
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep_value: f64,
    /// NaN when the SM kernel has no unique stationary law.
    pub tau_sm_f: f64,
    pub policy_id: String,
    pub report: EvalReport,
    pub theta: Option<Theta>,
}

fn build_policy(entry: RosterEntry, theta: Option<Theta>, spsa: &SpsaConfig) -> Result<Box<dyn Policy>> {
    Ok(match entry {
        RosterEntry::Threshold => {
            let t = theta.expect("threshold optimised before evaluation");
            Box::new(ThresholdPolicy::new(t[0], t[1], spsa.combiner)?)
        }
        RosterEntry::Delay(d) => Box::new(DelayPolicy::new(d)?),
        RosterEntry::NeverProbe => Box::new(ConstantPolicy(Action::NoProbe)),
        RosterEntry::AlwaysProbe => Box::new(ConstantPolicy(Action::Probe)),
    })
}

/// Evaluates the roster on one scenario. SPSA runs on `key.child(0)`;
/// every policy is evaluated on the same episode streams `key.child(1)`.
pub fn evaluate_point(
    scenario: &ScenarioConfig,
    roster: &[RosterEntry],
    replications: usize,
    spsa: &SpsaConfig,
    key: StreamKey,
    sweep_value: f64,
) -> Result<Vec<SweepRow>> {
    let theta = if roster.contains(&RosterEntry::Threshold) {
        Some(spsa_run(spsa, scenario, key.child(0))?.theta)
    } else {
        None
    };
    let tau = scenario.tau_sm_f().unwrap_or(f64::NAN);
    roster
        .iter()
        .map(|&entry| {
            let policy = build_policy(entry, theta, spsa)?;
            let report = monte_carlo_eval(scenario, policy.as_ref(), replications, key.child(1))?;
            Ok(SweepRow {
                sweep_value,
                tau_sm_f: tau,
                policy_id: entry.id(),
                report,
                theta: (entry == RosterEntry::Threshold).then_some(theta).flatten(),
            })
        })
        .collect()
}

pub fn sweep_scenarios(spec: &SweepSpec, spsa: &SpsaConfig, key: StreamKey) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut rows = Vec::with_capacity(spec.values.len() * spec.roster.len());
    for (i, &v) in spec.values.iter().enumerate() {
        let scenario = apply_parameter(&spec.base, spec.parameter, v)?;
        rows.extend(evaluate_point(&scenario, &spec.roster, spec.replications, spsa, key.child(i as u64), v)?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonGap {
    pub horizon: u32,
    pub threshold_j: f64,
    pub reference_j: f64,
    /// `(reference - threshold) / reference`.
    pub relative_reduction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonTable {
    pub rows: Vec<SweepRow>,
    pub gaps: Vec<HorizonGap>,
}

/// Scenario used at horizon `n`: SM `p11 = 0.9` and `lambda2 = n / 100`.
pub fn horizon_scenario(base: &ScenarioConfig, n: u32) -> Result<ScenarioConfig> {
    let mut c = apply_parameter(base, SweepParameter::SmP11, 0.9)?;
    c.horizon = n;
    c.initial_aoi = c.initial_aoi.min(n);
    c.lambda2 = n as f64 / 100.0;
    c.validate()?;
    Ok(c)
}

/// Evaluates the roster at each horizon and reports the threshold policy's
/// relative cost reduction against `Delay(reference_delay)`.
pub fn horizon_sweep(
    base: &ScenarioConfig,
    horizons: &[u32],
    roster: &[RosterEntry],
    replications: usize,
    spsa: &SpsaConfig,
    reference_delay: u32,
    key: StreamKey,
) -> Result<HorizonTable> {
    if horizons.is_empty() {
        return Err(Error::Empty("horizon list"));
    }
    if roster.is_empty() {
        return Err(Error::Empty("policy roster"));
    }
    let mut roster = roster.to_vec();
    for needed in [RosterEntry::Threshold, RosterEntry::Delay(reference_delay)] {
        if !roster.contains(&needed) {
            roster.push(needed);
        }
    }
    let mut rows = Vec::new();
    let mut gaps = Vec::new();
    for (i, &n) in horizons.iter().enumerate() {
        let scenario = horizon_scenario(base, n)?;
        let point = evaluate_point(&scenario, &roster, replications, spsa, key.child(i as u64), n as f64)?;
        let find = |id: &str| point.iter().find(|r| r.policy_id == id).map(|r| r.report.j_hat).unwrap();
        let threshold_j = find("threshold");
        let reference_j = find(&RosterEntry::Delay(reference_delay).id());
        gaps.push(HorizonGap {
            horizon: n,
            threshold_j,
            reference_j,
            relative_reduction: (reference_j - threshold_j) / reference_j,
        });
        rows.extend(point);
    }
    Ok(HorizonTable { rows, gaps })
}

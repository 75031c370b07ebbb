//! Episode simulation of the true system coupled with the monitor's belief
//! tracker, and Monte-Carlo cost estimation.
//!
//! Slot 0 starts from the configured augmented state with no observation.
//! Each later slot `t = 1..=N`:
//!
//! 1. the three subsystems transition,
//! 2. `z_t` is drawn from the new state and `a_{t-1}`,
//! 3. AoI and belief are updated,
//! 4. the policy picks `a_t` (no decision at the terminal slot `N`),
//! 5. `g_t = c 1{a_t = 1} + lambda1 H_t + lambda2 AoI_t / N` is charged.

pub mod sweep;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{stage_cost, voi, AugmentedState};
use crate::error::Result;
use crate::model::{sample_observation, Action, Observation};
use crate::policy::{DecisionContext, Policy};
use crate::rng::{SimRng, StreamKey};
use crate::scenario::ScenarioConfig;

/// One slot of a simulated episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub t: u32,
    pub state: usize,
    pub action: Action,
    /// `None` in slot 0.
    pub observation: Option<Observation>,
    pub aoi: u32,
    pub entropy: f64,
    pub voi: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub entropy_cost: f64,
    pub aoi_cost: f64,
    pub probe_cost_total: f64,
    pub total: f64,
}

impl CostBreakdown {
    fn charge(&mut self, weighted_entropy: f64, weighted_aoi: f64, probe: f64, stage: f64) {
        self.entropy_cost += weighted_entropy;
        self.aoi_cost += weighted_aoi;
        self.probe_cost_total += probe;
        self.total += stage;
    }

    fn scaled(self, s: f64) -> Self {
        CostBreakdown {
            entropy_cost: self.entropy_cost * s,
            aoi_cost: self.aoi_cost * s,
            probe_cost_total: self.probe_cost_total * s,
            total: self.total * s,
        }
    }

    fn add(self, o: Self) -> Self {
        CostBreakdown {
            entropy_cost: self.entropy_cost + o.entropy_cost,
            aoi_cost: self.aoi_cost + o.aoi_cost,
            probe_cost_total: self.probe_cost_total + o.probe_cost_total,
            total: self.total + o.total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub slots: Vec<SlotRecord>,
    pub breakdown: CostBreakdown,
}

impl TrajectoryRecord {
    pub fn total(&self) -> f64 {
        self.breakdown.total
    }

    pub fn probes(&self) -> usize {
        self.slots.iter().filter(|s| s.action.is_probe()).count()
    }
}

fn simulate(
    config: &ScenarioConfig,
    policy: &dyn Policy,
    rng: &mut SimRng,
    mut record: Option<&mut Vec<SlotRecord>>,
) -> Result<CostBreakdown> {
    let pomdp = config.pomdp();
    let n = config.horizon;
    let mut x: AugmentedState = config.initial_augmented()?;
    let mut state = config.sample_initial_state(rng, &x.belief)?;
    let mut history: Vec<(Action, Observation)> = Vec::with_capacity(n as usize);
    let mut breakdown = CostBreakdown::default();
    let mut prev_action = Action::NoProbe;

    for t in 0..=n {
        let mut observation = None;
        if t > 0 {
            state = pomdp.transition.sample_transition(rng, state);
            let z = sample_observation(rng, state, prev_action, config.p_g);
            x = x.step(prev_action, z, &pomdp)?;
            history.push((prev_action, z));
            observation = Some(z);
        }
        let entropy = x.entropy();
        let action = if t < n {
            policy.decide(&DecisionContext { stage: t, state: &x, entropy, history: &history })
        } else {
            Action::NoProbe
        };
        let v = voi(entropy, x.aoi_norm(), config.lambda1, config.lambda2);
        let g = stage_cost(action, v, config.probe_cost);
        let probe = if action.is_probe() { config.probe_cost } else { 0.0 };
        breakdown.charge(config.lambda1 * entropy, config.lambda2 * x.aoi_norm(), probe, g);
        if let Some(rec) = record.as_deref_mut() {
            rec.push(SlotRecord { t, state: state.index(), action, observation, aoi: x.aoi, entropy, voi: v, cost: g });
        }
        prev_action = action;
    }
    Ok(breakdown)
}

/// Simulates slots `0..=N` and returns the full trajectory.
pub fn run_episode(config: &ScenarioConfig, policy: &dyn Policy, rng: &mut SimRng) -> Result<TrajectoryRecord> {
    let mut slots = Vec::with_capacity(config.horizon as usize + 1);
    let breakdown = simulate(config, policy, rng, Some(&mut slots))?;
    Ok(TrajectoryRecord { slots, breakdown })
}

/// Total cost of one episode without keeping the trajectory.
pub fn episode_cost(config: &ScenarioConfig, policy: &dyn Policy, rng: &mut SimRng) -> Result<CostBreakdown> {
    simulate(config, policy, rng, None)
}

/// Monte-Carlo estimate of the expected total cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub j_hat: f64,
    pub std_error: f64,
    pub replications: usize,
    pub breakdown: CostBreakdown,
}

/// Runs `reps` episodes, episode `m` on stream `key.child(m)`. Results are
/// reduced in replication order, so they do not depend on thread count.
pub fn episode_costs(
    config: &ScenarioConfig,
    policy: &dyn Policy,
    reps: usize,
    key: StreamKey,
) -> Result<Vec<CostBreakdown>> {
    (0..reps)
        .into_par_iter()
        .map(|m| episode_cost(config, policy, &mut key.child(m as u64).rng()))
        .collect()
}

pub fn summarize(costs: &[CostBreakdown]) -> EvalReport {
    let m = costs.len();
    if m == 0 {
        return EvalReport { j_hat: 0.0, std_error: 0.0, replications: 0, breakdown: CostBreakdown::default() };
    }
    let sum = costs.iter().fold(CostBreakdown::default(), |a, &b| a.add(b));
    let mean = sum.scaled(1.0 / m as f64);
    let std_error = if m > 1 {
        let var = costs.iter().map(|c| (c.total - mean.total).powi(2)).sum::<f64>() / (m - 1) as f64;
        (var / m as f64).sqrt()
    } else {
        0.0
    };
    EvalReport { j_hat: mean.total, std_error, replications: m, breakdown: mean }
}

pub fn monte_carlo_eval(config: &ScenarioConfig, policy: &dyn Policy, reps: usize, key: StreamKey) -> Result<EvalReport> {
    Ok(summarize(&episode_costs(config, policy, reps, key)?))
}

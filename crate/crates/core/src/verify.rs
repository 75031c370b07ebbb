//! Randomised property suites backing the `verify` subcommand.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{
    assumption2_check, assumption2_equivalence, belief_update, closed_form_posterior, BeliefState, HealthBelief,
};
use crate::dp::{dp_solve, probe_advantage, verify_aoi_monotonicity};
use crate::error::{Error, Result};
use crate::model::{Action, Observation, Pomdp, SubsystemKernel, TransitionModel};
use crate::rng::{SimRng, StreamKey};
use crate::scenario::{BeliefInit, InitialStateMode, ScenarioConfig};

/// Entrywise agreement required between the closed-form and recursive posteriors.
pub const POSTERIOR_TOL: f64 = 1e-12;
/// Slack allowed in the entropy comparison of the probing lemma.
pub const ENTROPY_TOL: f64 = 1e-10;
/// `|c - advantage|` below which a node counts as a tie.
pub const ADVANTAGE_TIE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    AppendixA,
    AppendixB,
    Lemma1,
    Z1Collapse,
    DpConsistency,
    AoiMonotonicity,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::AppendixA,
        Suite::AppendixB,
        Suite::Lemma1,
        Suite::Z1Collapse,
        Suite::DpConsistency,
        Suite::AoiMonotonicity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::AppendixA => "appendix-a",
            Suite::AppendixB => "appendix-b",
            Suite::Lemma1 => "lemma1",
            Suite::Z1Collapse => "z1-collapse",
            Suite::DpConsistency => "dp-consistency",
            Suite::AoiMonotonicity => "aoi-monotonicity",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown suite `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    /// Instances drawn.
    pub trials: usize,
    /// Individual comparisons made.
    pub checked: usize,
    pub violations: usize,
    /// Comparisons skipped (impossible observations, ties, filtered instances).
    pub skipped: usize,
    pub max_error: f64,
}

impl SuiteReport {
    fn new(suite: Suite, trials: usize) -> Self {
        SuiteReport { suite, trials, checked: 0, violations: 0, skipped: 0, max_error: 0.0 }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0 && self.checked > 0
    }

    fn record(&mut self, ok: bool) {
        self.checked += 1;
        if !ok {
            self.violations += 1;
        }
    }
}

impl std::fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: {} trials, {} checks, {} violations, {} skipped, max error {:.3e}",
            self.suite.name(),
            self.trials,
            self.checked,
            self.violations,
            self.skipped,
            self.max_error
        )
    }
}

pub fn random_kernel<R: Rng + ?Sized>(rng: &mut R) -> SubsystemKernel {
    SubsystemKernel::from_fault_probs(rng.random(), rng.random()).expect("probabilities in [0, 1)")
}

pub fn random_transition<R: Rng + ?Sized>(rng: &mut R) -> TransitionModel {
    TransitionModel::new(random_kernel(rng), random_kernel(rng), random_kernel(rng)).expect("valid kernels")
}

/// Random kernels, generation probability, belief.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub pomdp: Pomdp,
    pub belief: BeliefState,
}

impl RandomInstance {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let transition = random_transition(rng);
        let p_g = rng.random::<f64>();
        RandomInstance { pomdp: Pomdp::new(transition, p_g), belief: BeliefState::random(rng) }
    }
}

/// Random small scenario with the true initial state drawn from the belief.
pub fn random_scenario<R: Rng + ?Sized>(rng: &mut R, horizon: u32) -> ScenarioConfig {
    let belief = BeliefState::random(rng);
    ScenarioConfig {
        transition: random_transition(rng),
        p_g: rng.random_range(0.0..0.95),
        probe_cost: rng.random_range(0.0..2.0),
        lambda1: rng.random_range(0.0..2.0),
        lambda2: rng.random_range(0.0..2.0),
        horizon,
        initial_belief: BeliefInit::Explicit(*belief.probs()),
        initial_aoi: rng.random_range(1..=horizon),
        initial_state: InitialStateMode::FromBelief,
        seed: 0,
    }
}

fn appendix_a(rng: &mut SimRng, trials: usize) -> SuiteReport {
    let mut r = SuiteReport::new(Suite::AppendixA, trials);
    for _ in 0..trials {
        let inst = RandomInstance::sample(rng);
        for a in Action::BOTH {
            for z in Observation::BOTH {
                let rec = belief_update(&inst.belief, a, z, &inst.pomdp);
                let closed = closed_form_posterior(&inst.belief, a, z, &inst.pomdp.transition, inst.pomdp.p_g());
                match (rec, closed) {
                    (Ok(p), Ok((q, _))) => {
                        let err = p.probs().iter().zip(q.probs()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                        r.max_error = r.max_error.max(err);
                        r.record(err <= POSTERIOR_TOL);
                    }
                    (Err(_), Err(_)) => r.skipped += 1,
                    _ => r.record(false),
                }
            }
        }
    }
    r
}

fn z1_collapse(rng: &mut SimRng, trials: usize) -> SuiteReport {
    let mut r = SuiteReport::new(Suite::Z1Collapse, trials);
    for _ in 0..trials {
        let inst = RandomInstance::sample(rng);
        for a in Action::BOTH {
            match belief_update(&inst.belief, a, Observation::Update, &inst.pomdp) {
                Ok(p) => {
                    let h = p.health();
                    r.max_error = r.max_error.max(h.faulty.abs()).max(p.entropy().abs());
                    r.record(h == HealthBelief { healthy: 1.0, faulty: 0.0 } && p.entropy() == 0.0);
                }
                Err(_) => r.skipped += 1,
            }
        }
    }
    r
}

fn lemma1(rng: &mut SimRng, trials: usize) -> SuiteReport {
    let mut r = SuiteReport::new(Suite::Lemma1, trials);
    let mut accepted = 0;
    let mut attempts = 0usize;
    while accepted < trials && attempts < trials.saturating_mul(1000) {
        attempts += 1;
        let inst = RandomInstance::sample(rng);
        if !assumption2_check(&inst.belief, &inst.pomdp.transition, inst.pomdp.p_g()).holds {
            r.skipped += 1;
            continue;
        }
        accepted += 1;
        let post = |a| belief_update(&inst.belief, a, Observation::NoUpdate, &inst.pomdp);
        match (post(Action::NoProbe), post(Action::Probe)) {
            (Ok(p0), Ok(p1)) => {
                let gap = p1.entropy() - p0.entropy();
                r.max_error = r.max_error.max(gap);
                r.record(gap <= ENTROPY_TOL);
            }
            _ => r.skipped += 1,
        }
    }
    r
}

fn appendix_b(rng: &mut SimRng, trials: usize) -> SuiteReport {
    let mut r = SuiteReport::new(Suite::AppendixB, trials);
    for _ in 0..trials {
        let inst = RandomInstance::sample(rng);
        r.record(assumption2_equivalence(&inst.belief, &inst.pomdp.transition, inst.pomdp.p_g()));
    }
    r
}

fn dp_consistency(rng: &mut SimRng, trials: usize) -> Result<SuiteReport> {
    let mut r = SuiteReport::new(Suite::DpConsistency, trials);
    for _ in 0..trials {
        let n = rng.random_range(1..=6);
        let cfg = random_scenario(rng, n);
        let sol = dp_solve(&cfg.initial_augmented()?, &cfg, n)?;
        for (i, node) in sol.nodes().iter().enumerate() {
            let Some(action) = node.optimal_action else { continue };
            let adv = probe_advantage(&sol, i)?;
            let margin = cfg.probe_cost - adv;
            if margin.abs() <= ADVANTAGE_TIE_TOL {
                r.skipped += 1;
                continue;
            }
            r.record(action.is_probe() == (margin < 0.0));
        }
    }
    Ok(r)
}

fn aoi_monotonicity(rng: &mut SimRng, trials: usize) -> Result<SuiteReport> {
    const N: u32 = 6;
    let mut r = SuiteReport::new(Suite::AoiMonotonicity, trials);
    for _ in 0..trials {
        let cfg = random_scenario(rng, N);
        let belief = cfg.initial_belief_state()?;
        let rep = verify_aoi_monotonicity(&cfg, &belief, N)?;
        for w in rep.values.windows(2) {
            r.max_error = r.max_error.max(w[0] - w[1]);
        }
        r.checked += rep.values.len().saturating_sub(1);
        r.violations += rep.violations.len();
    }
    Ok(r)
}

/// Runs `suite` over `trials` random instances drawn from `key`.
pub fn run_suite(suite: Suite, trials: usize, key: StreamKey) -> Result<SuiteReport> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    let mut rng = key.rng();
    Ok(match suite {
        Suite::AppendixA => appendix_a(&mut rng, trials),
        Suite::AppendixB => appendix_b(&mut rng, trials),
        Suite::Lemma1 => lemma1(&mut rng, trials),
        Suite::Z1Collapse => z1_collapse(&mut rng, trials),
        Suite::DpConsistency => dp_consistency(&mut rng, trials)?,
        Suite::AoiMonotonicity => aoi_monotonicity(&mut rng, trials)?,
    })
}

//! Information state of the monitor: the belief over the eight joint
//! states, its projection onto the generation-transmission (GT) subsystem,
//! the health entropy, AoI and the per-slot cost.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, Observation, Pomdp, SystemState, TransitionModel, NUM_STATES, STOCHASTIC_TOL};

/// GT-healthy states: sensor and SM link healthy.
pub const GT_HEALTHY: [usize; 2] = [0, 4];
/// The complementary states, in index order.
pub const GT_FAULTY: [usize; 6] = [1, 2, 3, 5, 6, 7];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    probs: [f64; NUM_STATES],
}

impl BeliefState {
    pub fn new(probs: [f64; NUM_STATES]) -> Result<Self> {
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidBelief(format!("entry {i} = {p} outside [0, 1]")));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidBelief(format!("entries sum to {sum}")));
        }
        Ok(BeliefState { probs })
    }

    /// Scales nonnegative weights to a distribution.
    pub fn normalized(weights: [f64; NUM_STATES]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidBelief("weights must be finite and nonnegative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidBelief("weights sum to zero".into()));
        }
        Ok(BeliefState { probs: weights.map(|w| w / sum) })
    }

    pub fn uniform() -> Self {
        BeliefState { probs: [1.0 / NUM_STATES as f64; NUM_STATES] }
    }

    pub fn point_mass(state: usize) -> Self {
        let mut probs = [0.0; NUM_STATES];
        probs[state] = 1.0;
        BeliefState { probs }
    }

    /// Product of the three subsystems' stationary laws.
    pub fn stationary(model: &TransitionModel) -> Result<Self> {
        let ms = model.ms.stationary_fault_prob()?;
        let s = model.sensor.stationary_fault_prob()?;
        let sm = model.sm.stationary_fault_prob()?;
        let mut probs = [0.0; NUM_STATES];
        for st in SystemState::all() {
            let f = |faulty: bool, q: f64| if faulty { q } else { 1.0 - q };
            probs[st.index()] =
                f(!st.ms.is_healthy(), ms) * f(!st.sensor.is_healthy(), s) * f(!st.sm.is_healthy(), sm);
        }
        Ok(BeliefState { probs })
    }

    /// Flat Dirichlet draw over the simplex.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut w = [0.0; NUM_STATES];
        for x in w.iter_mut() {
            let u: f64 = rng.random();
            *x = -(1.0 - u).ln();
        }
        BeliefState::normalized(w).expect("exponential draws are positive")
    }

    pub fn probs(&self) -> &[f64; NUM_STATES] {
        &self.probs
    }

    pub fn prob(&self, state: usize) -> f64 {
        self.probs[state]
    }

    /// One-step prediction `sum_i p^i p_ij`.
    pub fn predict(&self, model: &TransitionModel) -> [f64; NUM_STATES] {
        let mut out = [0.0; NUM_STATES];
        for (i, &pi) in self.probs.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            let row = &model.joint()[i];
            for (o, &pij) in out.iter_mut().zip(row) {
                *o += pi * pij;
            }
        }
        out
    }

    pub fn health(&self) -> HealthBelief {
        health_projection(self)
    }

    pub fn entropy(&self) -> f64 {
        health_entropy(&self.health())
    }
}

/// Healthy/faulty belief about the GT subsystem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HealthBelief {
    pub healthy: f64,
    pub faulty: f64,
}

/// `faulty` is the mass off states {0, 4}; `healthy` is its complement so
/// that a posterior supported on {0, 4} projects to exactly `[1, 0]`.
pub fn health_projection(belief: &BeliefState) -> HealthBelief {
    let faulty: f64 = GT_FAULTY.iter().map(|&i| belief.probs[i]).sum();
    let faulty = faulty.clamp(0.0, 1.0);
    HealthBelief { healthy: 1.0 - faulty, faulty }
}

fn plogp(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p * p.log2()
    }
}

/// Binary entropy in bits, `0 log 0 = 0`.
pub fn health_entropy(hb: &HealthBelief) -> f64 {
    let h = -(plogp(hb.healthy) + plogp(hb.faulty));
    h.clamp(0.0, 1.0)
}

/// Probability of observing `obs` in the next slot after `action`,
/// `sum_s sum_i p^i p_is r_s(a, z)`.
pub fn observation_likelihood(belief: &BeliefState, action: Action, obs: Observation, pomdp: &Pomdp) -> f64 {
    belief
        .predict(&pomdp.transition)
        .iter()
        .enumerate()
        .map(|(j, &q)| q * pomdp.observation.prob(j, action, obs))
        .sum()
}

/// Bayes recursion: predict through the joint kernel, weight by `r_j(a, z)`,
/// normalise.
pub fn belief_update(belief: &BeliefState, action: Action, obs: Observation, pomdp: &Pomdp) -> Result<BeliefState> {
    let mut num = belief.predict(&pomdp.transition);
    for (j, v) in num.iter_mut().enumerate() {
        *v *= pomdp.observation.prob(j, action, obs);
    }
    let denom: f64 = num.iter().sum();
    if denom <= 0.0 || !denom.is_finite() {
        return Err(Error::ImpossibleObservation { action: action.bit() as u8, obs: obs.bit() as u8 });
    }
    Ok(BeliefState { probs: num.map(|v| v / denom) })
}

/// Named sums appearing in the closed-form posteriors.
///
/// For `z = 1` only `xi1`/`xi2` are used (numerators of states 0 and 4) and
/// `phi` is zero. For `z = 0`, both actions share
/// `xi1 = sum p^i p_i0 (1 - P_g)`, `xi2 = sum p^i p_i4 (1 - P_g)`,
/// `phi_j = sum p^i p_ij` for j in {1,2,3,5,6,7}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormComponents {
    pub xi1: f64,
    pub xi2: f64,
    pub phi: [f64; 6],
    pub phi_s: f64,
}

fn column_mass(belief: &BeliefState, model: &TransitionModel, j: usize) -> f64 {
    belief.probs.iter().enumerate().map(|(i, &p)| p * model.prob(i, j)).sum()
}

/// The `z = 0` sums, shared by both actions.
pub fn silence_components(belief: &BeliefState, model: &TransitionModel, p_g: f64) -> ClosedFormComponents {
    let xi1 = column_mass(belief, model, 0) * (1.0 - p_g);
    let xi2 = column_mass(belief, model, 4) * (1.0 - p_g);
    let phi = GT_FAULTY.map(|j| column_mass(belief, model, j));
    let phi_s = phi.iter().sum();
    ClosedFormComponents { xi1, xi2, phi, phi_s }
}

/// Posterior written directly from the closed-form expressions for each
/// `(action, observation)` pair; independent of the observation table.
pub fn closed_form_posterior(
    belief: &BeliefState,
    action: Action,
    obs: Observation,
    model: &TransitionModel,
    p_g: f64,
) -> Result<(BeliefState, ClosedFormComponents)> {
    let impossible = || Error::ImpossibleObservation { action: action.bit() as u8, obs: obs.bit() as u8 };
    let mut probs = [0.0; NUM_STATES];
    let comps = match obs {
        Observation::Update => {
            let to0 = column_mass(belief, model, 0);
            let to4 = column_mass(belief, model, 4);
            let (xi1, xi2) = match action {
                Action::NoProbe => (to0 * p_g, to4 * p_g),
                Action::Probe => (to0, to4 * p_g),
            };
            let d = xi1 + xi2;
            if d <= 0.0 {
                return Err(impossible());
            }
            probs[0] = xi1 / d;
            probs[4] = xi2 / d;
            ClosedFormComponents { xi1, xi2, phi: [0.0; 6], phi_s: 0.0 }
        }
        Observation::NoUpdate => {
            let c = silence_components(belief, model, p_g);
            let (head, d) = match action {
                Action::NoProbe => (c.xi1, c.xi1 + c.xi2 + c.phi_s),
                Action::Probe => (0.0, c.xi2 + c.phi_s),
            };
            if d <= 0.0 {
                return Err(impossible());
            }
            probs[0] = head / d;
            probs[4] = c.xi2 / d;
            for (k, &j) in GT_FAULTY.iter().enumerate() {
                probs[j] = c.phi[k] / d;
            }
            c
        }
    };
    Ok((BeliefState { probs }, comps))
}

pub fn aoi_update(aoi: u32, obs: Observation, horizon: u32) -> u32 {
    match obs {
        Observation::Update => 1,
        Observation::NoUpdate => (aoi + 1).min(horizon),
    }
}

/// Value of information `lambda1 * H + lambda2 * aoi_norm`.
pub fn voi(entropy: f64, aoi_norm: f64, lambda1: f64, lambda2: f64) -> f64 {
    lambda1 * entropy + lambda2 * aoi_norm
}

pub fn stage_cost(action: Action, voi: f64, probe_cost: f64) -> f64 {
    if action.is_probe() {
        probe_cost + voi
    } else {
        voi
    }
}

/// Belief plus AoI: the decision state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentedState {
    pub belief: BeliefState,
    pub aoi: u32,
    pub horizon: u32,
}

impl AugmentedState {
    pub fn new(belief: BeliefState, aoi: u32, horizon: u32) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        if aoi == 0 || aoi > horizon {
            return Err(Error::InvalidConfig(format!("aoi {aoi} outside [1, {horizon}]")));
        }
        Ok(AugmentedState { belief, aoi, horizon })
    }

    pub fn aoi_norm(&self) -> f64 {
        self.aoi as f64 / self.horizon as f64
    }

    pub fn entropy(&self) -> f64 {
        self.belief.entropy()
    }

    pub fn voi(&self, lambda1: f64, lambda2: f64) -> f64 {
        voi(self.entropy(), self.aoi_norm(), lambda1, lambda2)
    }

    pub fn step(&self, action: Action, obs: Observation, pomdp: &Pomdp) -> Result<Self> {
        Ok(AugmentedState {
            belief: belief_update(&self.belief, action, obs, pomdp)?,
            aoi: aoi_update(self.aoi, obs, self.horizon),
            horizon: self.horizon,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assumption2 {
    pub holds: bool,
    pub lhs: f64,
}

/// `sum_i p^i [p^S_{i1,0} p^SM_{i2,0} (2 - P_g) - 1] <= 0`.
pub fn assumption2_check(belief: &BeliefState, model: &TransitionModel, p_g: f64) -> Assumption2 {
    let lhs: f64 = SystemState::all()
        .map(|s| {
            let back = model.sensor.prob(s.sensor, crate::model::HealthStatus::Healthy)
                * model.sm.prob(s.sm, crate::model::HealthStatus::Healthy);
            belief.probs[s.index()] * (back * (2.0 - p_g) - 1.0)
        })
        .sum();
    Assumption2 { holds: lhs <= 0.0, lhs }
}

/// Tolerance under which a value counts as zero when comparing signs.
pub const SIGN_TIE_TOL: f64 = 1e-12;

fn sign_with_tie(x: f64) -> i8 {
    if x.abs() <= SIGN_TIE_TOL {
        0
    } else if x > 0.0 {
        1
    } else {
        -1
    }
}

/// True when the `xi1 + xi2 <= phi_s` test and the assumption-2 inequality
/// agree in sign (ties near zero count as agreement).
pub fn assumption2_equivalence(belief: &BeliefState, model: &TransitionModel, p_g: f64) -> bool {
    let c = silence_components(belief, model, p_g);
    let a = sign_with_tie(c.xi1 + c.xi2 - c.phi_s);
    let b = sign_with_tie(assumption2_check(belief, model, p_g).lhs);
    a == b || a == 0 || b == 0
}

/// Outcome of sampling ordered belief pairs against the entropy-propagation
/// assumption (diagnostic only).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationRate {
    pub comparisons: u64,
    pub violations: u64,
}

impl ViolationRate {
    pub fn rate(&self) -> f64 {
        if self.comparisons == 0 {
            0.0
        } else {
            self.violations as f64 / self.comparisons as f64
        }
    }
}

/// Samples belief pairs, orders them by health entropy and counts how often
/// the higher-entropy belief ends with strictly lower posterior entropy after
/// the same action and observation.
pub fn entropy_propagation_diagnostic<R: Rng + ?Sized>(pomdp: &Pomdp, pairs: usize, rng: &mut R) -> ViolationRate {
    let mut out = ViolationRate::default();
    for _ in 0..pairs {
        let a = BeliefState::random(rng);
        let b = BeliefState::random(rng);
        let (lo, hi) = if a.entropy() <= b.entropy() { (a, b) } else { (b, a) };
        for action in Action::BOTH {
            for obs in Observation::BOTH {
                let (Ok(plo), Ok(phi)) = (belief_update(&lo, action, obs, pomdp), belief_update(&hi, action, obs, pomdp))
                else {
                    continue;
                };
                out.comparisons += 1;
                if phi.entropy() < plo.entropy() - 1e-12 {
                    out.violations += 1;
                }
            }
        }
    }
    out
}

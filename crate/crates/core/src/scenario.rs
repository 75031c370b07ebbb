//! Scenario parameters shared by the simulator, the DP oracle and SPSA.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{AugmentedState, BeliefState};
use crate::error::{Error, Result};
use crate::model::{Pomdp, SubsystemKernel, SystemState, TransitionModel, NUM_STATES};

/// How the monitor's initial belief is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BeliefInit {
    Uniform,
    Stationary,
    Explicit([f64; NUM_STATES]),
}

/// How the true initial health state of each episode is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum InitialStateMode {
    /// Each component healthy or faulty with probability 1/2.
    #[default]
    IndependentUniform,
    /// Each component from its kernel's stationary law.
    Stationary,
    /// Joint state drawn from the initial belief.
    FromBelief,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub transition: TransitionModel,
    pub p_g: f64,
    pub probe_cost: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub horizon: u32,
    pub initial_belief: BeliefInit,
    pub initial_aoi: u32,
    pub initial_state: InitialStateMode,
    pub seed: u64,
}

impl ScenarioConfig {
    /// The reference setup: c = 1, lambda1 = lambda2 = 1, P_g = 0.1, N = 100,
    /// MS and S kernels `[[0.9, 0.1], [0.9, 0.1]]`, SM kernel
    /// `[[0.9, 0.1], [1 - p11, p11]]`.
    pub fn basic(sm_p11: f64) -> Result<Self> {
        let k = SubsystemKernel::from_rows([[0.9, 0.1], [0.9, 0.1]])?;
        let sm = SubsystemKernel::from_fault_probs(0.1, sm_p11)?;
        let cfg = ScenarioConfig {
            transition: TransitionModel::new(k, k, sm)?,
            p_g: 0.1,
            probe_cost: 1.0,
            lambda1: 1.0,
            lambda2: 1.0,
            horizon: 100,
            initial_belief: BeliefInit::Uniform,
            initial_aoi: 1,
            initial_state: InitialStateMode::IndependentUniform,
            seed: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        self.transition.ms.validate("ms")?;
        self.transition.sensor.validate("sensor")?;
        self.transition.sm.validate("sm")?;
        if !(0.0..1.0).contains(&self.p_g) {
            return bad(format!("p_g = {} must lie in [0, 1)", self.p_g));
        }
        if !(self.probe_cost >= 0.0 && self.probe_cost.is_finite()) {
            return bad(format!("probe_cost = {} must be nonnegative", self.probe_cost));
        }
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be nonnegative"));
            }
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self.initial_aoi == 0 || self.initial_aoi > self.horizon {
            return bad(format!("initial_aoi = {} outside [1, {}]", self.initial_aoi, self.horizon));
        }
        self.initial_belief_state()?;
        Ok(())
    }

    pub fn pomdp(&self) -> Pomdp {
        Pomdp::new(self.transition.clone(), self.p_g)
    }

    pub fn initial_belief_state(&self) -> Result<BeliefState> {
        match self.initial_belief {
            BeliefInit::Uniform => Ok(BeliefState::uniform()),
            BeliefInit::Stationary => BeliefState::stationary(&self.transition),
            BeliefInit::Explicit(p) => BeliefState::new(p),
        }
    }

    pub fn initial_augmented(&self) -> Result<AugmentedState> {
        AugmentedState::new(self.initial_belief_state()?, self.initial_aoi, self.horizon)
    }

    pub fn sample_initial_state<R: Rng + ?Sized>(&self, rng: &mut R, belief: &BeliefState) -> Result<SystemState> {
        let u: f64 = rng.random();
        let state = match self.initial_state {
            InitialStateMode::IndependentUniform => {
                let bits = (u * NUM_STATES as f64) as usize;
                SystemState::from_index(bits.min(NUM_STATES - 1)).unwrap()
            }
            InitialStateMode::Stationary => {
                let b = BeliefState::stationary(&self.transition)?;
                pick(b.probs(), u)
            }
            InitialStateMode::FromBelief => pick(belief.probs(), u),
        };
        Ok(state)
    }

    pub fn set_sm_kernel(&mut self, sm: SubsystemKernel) -> Result<()> {
        self.transition = TransitionModel::new(self.transition.ms, self.transition.sensor, sm)?;
        Ok(())
    }

    /// Stationary probability that the SM link is faulty.
    pub fn tau_sm_f(&self) -> Option<f64> {
        self.transition.sm.stationary_fault_prob().ok()
    }
}

fn pick(probs: &[f64; NUM_STATES], u: f64) -> SystemState {
    let mut cum = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last = i;
        }
        cum += p;
        if u < cum {
            return SystemState::from_index(i).unwrap();
        }
    }
    SystemState::from_index(last).unwrap()
}

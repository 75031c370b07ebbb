//! Probing policies.

use serde::{Deserialize, Serialize};

use crate::belief::AugmentedState;
use crate::error::{Error, Result};
pub use crate::model::{Action, Observation};

/// What a policy sees when it decides at stage `stage`.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    pub stage: u32,
    pub state: &'a AugmentedState,
    pub entropy: f64,
    /// `(a_{t-1}, z_t)` pairs since the start of the episode.
    pub history: &'a [(Action, Observation)],
}

impl DecisionContext<'_> {
    pub fn aoi(&self) -> u32 {
        self.state.aoi
    }

    pub fn aoi_norm(&self) -> f64 {
        self.state.aoi_norm()
    }
}

pub trait Policy: Send + Sync {
    fn decide(&self, ctx: &DecisionContext<'_>) -> Action;
    fn id(&self) -> String;
}

/// Probe whenever the AoI strictly exceeds `d` slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayPolicy {
    pub d: u32,
}

impl DelayPolicy {
    pub fn new(d: u32) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidConfig("delay threshold D must be at least 1".into()));
        }
        Ok(DelayPolicy { d })
    }
}

pub fn delay_decide(policy: &DelayPolicy, aoi: u32) -> Action {
    if aoi > policy.d {
        Action::Probe
    } else {
        Action::NoProbe
    }
}

impl Policy for DelayPolicy {
    fn decide(&self, ctx: &DecisionContext<'_>) -> Action {
        delay_decide(self, ctx.aoi())
    }

    fn id(&self) -> String {
        format!("delay_d{}", self.d)
    }
}

/// How the entropy and AoI threshold tests are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combiner {
    /// Probe when both coordinates reach their thresholds.
    #[default]
    Conjunctive,
    /// Probe when either coordinate reaches its threshold.
    Disjunctive,
}

impl std::str::FromStr for Combiner {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conjunctive" => Ok(Combiner::Conjunctive),
            "disjunctive" => Ok(Combiner::Disjunctive),
            other => Err(Error::InvalidConfig(format!("unknown combiner `{other}`"))),
        }
    }
}

/// Single-threshold policy on (health entropy, normalized AoI).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub theta_h: f64,
    pub theta_d: f64,
    pub combiner: Combiner,
}

impl ThresholdPolicy {
    pub fn new(theta_h: f64, theta_d: f64, combiner: Combiner) -> Result<Self> {
        for (name, v) in [("theta_h", theta_h), ("theta_d", theta_d)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(ThresholdPolicy { theta_h, theta_d, combiner })
    }

    pub fn theta(&self) -> [f64; 2] {
        [self.theta_h, self.theta_d]
    }
}

pub fn threshold_decide(policy: &ThresholdPolicy, entropy: f64, aoi_norm: f64) -> Action {
    let h = entropy >= policy.theta_h;
    let d = aoi_norm >= policy.theta_d;
    let probe = match policy.combiner {
        Combiner::Conjunctive => h && d,
        Combiner::Disjunctive => h || d,
    };
    if probe {
        Action::Probe
    } else {
        Action::NoProbe
    }
}

impl Policy for ThresholdPolicy {
    fn decide(&self, ctx: &DecisionContext<'_>) -> Action {
        threshold_decide(self, ctx.entropy, ctx.aoi_norm())
    }

    fn id(&self) -> String {
        "threshold".into()
    }
}

/// Fixed action in every slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstantPolicy(pub Action);

impl Policy for ConstantPolicy {
    fn decide(&self, _ctx: &DecisionContext<'_>) -> Action {
        self.0
    }

    fn id(&self) -> String {
        match self.0 {
            Action::NoProbe => "never_probe".into(),
            Action::Probe => "always_probe".into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn delay_examples() {
        let p = |d| DelayPolicy::new(d).unwrap();
        assert_eq!(delay_decide(&p(1), 1), Action::NoProbe);
        assert_eq!(delay_decide(&p(1), 2), Action::Probe);
        assert_eq!(delay_decide(&p(90), 90), Action::NoProbe);
        assert!(DelayPolicy::new(0).is_err());
    }

    #[test]
    fn threshold_examples() {
        let p = ThresholdPolicy::new(0.5, 0.5, Combiner::Conjunctive).unwrap();
        assert_eq!(threshold_decide(&p, 0.6, 0.6), Action::Probe);
        assert_eq!(threshold_decide(&p, 0.1, 0.9), Action::NoProbe);
        let d = ThresholdPolicy { combiner: Combiner::Disjunctive, ..p };
        assert_eq!(threshold_decide(&d, 0.1, 0.9), Action::Probe);
        let zero = ThresholdPolicy::new(0.0, 0.0, Combiner::Conjunctive).unwrap();
        for (h, a) in [(0.0, 0.01), (1.0, 1.0), (0.3, 0.5)] {
            assert_eq!(threshold_decide(&zero, h, a), Action::Probe);
        }
        assert!(ThresholdPolicy::new(1.5, 0.0, Combiner::Conjunctive).is_err());
    }

    proptest! {
        #[test]
        fn probe_region_upward_closed(
            th in 0.0..=1.0f64, td in 0.0..=1.0f64, disj in any::<bool>(),
            h in 0.0..=1.0f64, d in 0.0..=1.0f64, dh in 0.0..=1.0f64, dd in 0.0..=1.0f64,
        ) {
            let combiner = if disj { Combiner::Disjunctive } else { Combiner::Conjunctive };
            let p = ThresholdPolicy::new(th, td, combiner).unwrap();
            if threshold_decide(&p, h, d) == Action::Probe {
                let h2 = (h + dh).min(1.0);
                let d2 = (d + dd).min(1.0);
                prop_assert_eq!(threshold_decide(&p, h2, d2), Action::Probe);
            }
        }

        #[test]
        fn delay_monotone(d in 1u32..200, aoi in 1u32..300, inc in 0u32..50) {
            let p = DelayPolicy::new(d).unwrap();
            if delay_decide(&p, aoi) == Action::Probe {
                prop_assert_eq!(delay_decide(&p, aoi + inc), Action::Probe);
            }
        }
    }
}

//! Active fault detection for a three-component remote monitoring link.
//!
//! A monitor tracks a belief over the joint health of the mobile station,
//! the sensor and the sensor-to-monitor link, and decides each slot whether
//! to pay for a probe. Exact dynamic programming serves as a small-horizon
//! oracle; SPSA tunes a two-threshold policy for long horizons.

pub mod belief;
pub mod cli;
pub mod dp;
pub mod error;
pub mod io;
pub mod model;
pub mod policy;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod spsa;
pub mod verify;

pub use belief::{belief_update, AugmentedState, BeliefState, HealthBelief};
pub use dp::{dp_solve, DpSolution};
pub use error::{Error, Result};
pub use model::{Action, HealthStatus, Observation, Pomdp, SubsystemKernel, SystemState, TransitionModel};
pub use policy::{Combiner, DelayPolicy, Policy, ThresholdPolicy};
pub use rng::StreamKey;
pub use scenario::ScenarioConfig;
pub use sim::{monte_carlo_eval, run_episode, EvalReport, TrajectoryRecord};
pub use spsa::{spsa_run, SpsaConfig};

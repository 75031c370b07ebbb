//! System model: joint health state of (MS link, sensor, SM link), the
//! per-subsystem Markov kernels, the 8x8 joint kernel and the observation
//! model built from the generation / delivery random variables.
//!
//! State indices use the bit order (MS, S, SM) = (4, 2, 1).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_STATES: usize = 8;

/// Tolerance for row-stochasticity checks.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HealthStatus {
    Healthy = 0,
    Faulty = 1,
}

impl HealthStatus {
    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(HealthStatus::Healthy),
            1 => Some(HealthStatus::Faulty),
            _ => None,
        }
    }

    pub fn bit(self) -> usize {
        self as usize
    }

    pub fn is_healthy(self) -> bool {
        self == HealthStatus::Healthy
    }
}

/// Joint health state of the three subsystems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SystemState {
    pub ms: HealthStatus,
    pub sensor: HealthStatus,
    pub sm: HealthStatus,
}

pub fn encode_state(ms: HealthStatus, sensor: HealthStatus, sm: HealthStatus) -> SystemState {
    SystemState { ms, sensor, sm }
}

impl SystemState {
    pub fn index(self) -> usize {
        4 * self.ms.bit() + 2 * self.sensor.bit() + self.sm.bit()
    }

    pub fn from_index(index: usize) -> Option<Self> {
        if index >= NUM_STATES {
            return None;
        }
        let bit = |b: usize| {
            if (index >> b) & 1 == 1 {
                HealthStatus::Faulty
            } else {
                HealthStatus::Healthy
            }
        };
        Some(SystemState {
            ms: bit(2),
            sensor: bit(1),
            sm: bit(0),
        })
    }

    pub fn all() -> impl Iterator<Item = SystemState> {
        (0..NUM_STATES).map(|i| SystemState::from_index(i).unwrap())
    }

    /// Sensor and SM link both healthy (states 0 and 4).
    pub fn gt_healthy(self) -> bool {
        self.sensor.is_healthy() && self.sm.is_healthy()
    }
}

/// Monitor action taken at the start of a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    NoProbe = 0,
    Probe = 1,
}

impl Action {
    pub const BOTH: [Action; 2] = [Action::NoProbe, Action::Probe];

    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(Action::NoProbe),
            1 => Some(Action::Probe),
            _ => None,
        }
    }

    pub fn bit(self) -> usize {
        self as usize
    }

    pub fn is_probe(self) -> bool {
        self == Action::Probe
    }
}

/// Whether a status update reached the monitor in a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Observation {
    NoUpdate = 0,
    Update = 1,
}

impl Observation {
    pub const BOTH: [Observation; 2] = [Observation::NoUpdate, Observation::Update];

    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(Observation::NoUpdate),
            1 => Some(Observation::Update),
            _ => None,
        }
    }

    pub fn bit(self) -> usize {
        self as usize
    }
}

/// Two-state Markov kernel of one subsystem, `[[p00, p01], [p10, p11]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsystemKernel {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
}

impl SubsystemKernel {
    pub fn new(p00: f64, p01: f64, p10: f64, p11: f64) -> Result<Self> {
        let k = SubsystemKernel { p00, p01, p10, p11 };
        k.validate("kernel")?;
        Ok(k)
    }

    /// Kernel with the given probabilities of becoming faulty from each state.
    pub fn from_fault_probs(p01: f64, p11: f64) -> Result<Self> {
        Self::new(1.0 - p01, p01, 1.0 - p11, p11)
    }

    pub fn from_rows(rows: [[f64; 2]; 2]) -> Result<Self> {
        Self::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1])
    }

    pub fn identity() -> Self {
        SubsystemKernel { p00: 1.0, p01: 0.0, p10: 0.0, p11: 1.0 }
    }

    /// Always returns to healthy in one slot.
    pub fn always_healthy() -> Self {
        SubsystemKernel { p00: 1.0, p01: 0.0, p10: 1.0, p11: 0.0 }
    }

    /// Once faulty, stays faulty.
    pub fn absorbing_fault(p01: f64) -> Result<Self> {
        Self::new(1.0 - p01, p01, 0.0, 1.0)
    }

    pub fn rows(&self) -> [[f64; 2]; 2] {
        [[self.p00, self.p01], [self.p10, self.p11]]
    }

    pub fn prob(&self, from: HealthStatus, to: HealthStatus) -> f64 {
        self.rows()[from.bit()][to.bit()]
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        let bad = |reason: String| Error::InvalidKernel { name: name.to_string(), reason };
        for (label, v) in [("p00", self.p00), ("p01", self.p01), ("p10", self.p10), ("p11", self.p11)] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(bad(format!("{label} = {v} outside [0, 1]")));
            }
        }
        for (row, sum) in [(0, self.p00 + self.p01), (1, self.p10 + self.p11)] {
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(bad(format!("row {row} sums to {sum}")));
            }
        }
        Ok(())
    }

    /// Long-run fraction of slots spent faulty, `p01 / (1 - p11 + p01)`.
    pub fn stationary_fault_prob(&self) -> Result<f64> {
        let denom = 1.0 - self.p11 + self.p01;
        if denom <= 0.0 {
            return Err(Error::DegenerateKernel { p01: self.p01, p11: self.p11 });
        }
        Ok(self.p01 / denom)
    }

    pub fn sample_next<R: Rng + ?Sized>(&self, rng: &mut R, from: HealthStatus) -> HealthStatus {
        let u: f64 = rng.random();
        if u < self.prob(from, HealthStatus::Healthy) {
            HealthStatus::Healthy
        } else {
            HealthStatus::Faulty
        }
    }
}

pub fn stationary_fault_prob(kernel: &SubsystemKernel) -> Result<f64> {
    kernel.stationary_fault_prob()
}

/// The three subsystem kernels and their 8x8 product kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    pub ms: SubsystemKernel,
    pub sensor: SubsystemKernel,
    pub sm: SubsystemKernel,
    joint: [[f64; NUM_STATES]; NUM_STATES],
}

pub fn build_joint_kernel(
    ms: SubsystemKernel,
    sensor: SubsystemKernel,
    sm: SubsystemKernel,
) -> Result<TransitionModel> {
    ms.validate("ms")?;
    sensor.validate("sensor")?;
    sm.validate("sm")?;
    let mut joint = [[0.0; NUM_STATES]; NUM_STATES];
    for from in SystemState::all() {
        for to in SystemState::all() {
            joint[from.index()][to.index()] = ms.prob(from.ms, to.ms)
                * sensor.prob(from.sensor, to.sensor)
                * sm.prob(from.sm, to.sm);
        }
    }
    Ok(TransitionModel { ms, sensor, sm, joint })
}

impl TransitionModel {
    pub fn new(ms: SubsystemKernel, sensor: SubsystemKernel, sm: SubsystemKernel) -> Result<Self> {
        build_joint_kernel(ms, sensor, sm)
    }

    pub fn joint(&self) -> &[[f64; NUM_STATES]; NUM_STATES] {
        &self.joint
    }

    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.joint[from][to]
    }

    /// Draw the next state from row `state.index()` by inversion.
    pub fn sample_transition<R: Rng + ?Sized>(&self, rng: &mut R, state: SystemState) -> SystemState {
        let row = &self.joint[state.index()];
        let u: f64 = rng.random();
        let mut cum = 0.0;
        let mut last_positive = 0;
        for (j, &p) in row.iter().enumerate() {
            if p > 0.0 {
                last_positive = j;
            }
            cum += p;
            if u < cum {
                return SystemState::from_index(j).unwrap();
            }
        }
        SystemState::from_index(last_positive).unwrap()
    }
}

pub fn sample_transition<R: Rng + ?Sized>(
    rng: &mut R,
    state: SystemState,
    model: &TransitionModel,
) -> SystemState {
    model.sample_transition(rng, state)
}

/// `P[W^MS = 1 | F^MS, a]`: a probe crosses the MS link only if it is healthy.
pub fn probe_delivery_prob(ms: HealthStatus, action: Action) -> f64 {
    if action.is_probe() && ms.is_healthy() {
        1.0
    } else {
        0.0
    }
}

/// `P[W^g = 1 | F^S, a]` where `a` is the probe as seen by the sensor.
pub fn generation_prob(sensor: HealthStatus, probed: bool, p_g: f64) -> f64 {
    match (sensor, probed) {
        (HealthStatus::Faulty, _) => 0.0,
        (HealthStatus::Healthy, true) => 1.0,
        (HealthStatus::Healthy, false) => p_g,
    }
}

/// `P[W^SM = 1 | W^g, F^SM]`.
pub fn update_delivery_prob(generated: bool, sm: HealthStatus) -> f64 {
    if generated && sm.is_healthy() {
        1.0
    } else {
        0.0
    }
}

/// `r_s(a, z)`, obtained by marginalising the three slot variables in
/// causal order. A probe lost on the MS link leaves the sensor on its
/// spontaneous generation law.
pub fn observation_prob(state: SystemState, prev_action: Action, obs: Observation, p_g: f64) -> f64 {
    let mut delivered = 0.0;
    for w_ms in [false, true] {
        let p_ms = probe_delivery_prob(state.ms, prev_action);
        let p_ms = if w_ms { p_ms } else { 1.0 - p_ms };
        if p_ms == 0.0 {
            continue;
        }
        for w_g in [false, true] {
            let p_gen = generation_prob(state.sensor, w_ms, p_g);
            let p_gen = if w_g { p_gen } else { 1.0 - p_gen };
            delivered += p_ms * p_gen * update_delivery_prob(w_g, state.sm);
        }
    }
    match obs {
        Observation::Update => delivered,
        Observation::NoUpdate => 1.0 - delivered,
    }
}

/// Draws `W^MS`, then `W^g`, then `W^SM`; the observation is `W^SM`.
/// Exactly one uniform is consumed per call.
pub fn sample_observation<R: Rng + ?Sized>(
    rng: &mut R,
    state: SystemState,
    prev_action: Action,
    p_g: f64,
) -> Observation {
    let probe_arrived = probe_delivery_prob(state.ms, prev_action) == 1.0;
    let u: f64 = rng.random();
    let generated = u < generation_prob(state.sensor, probe_arrived, p_g);
    if update_delivery_prob(generated, state.sm) == 1.0 {
        Observation::Update
    } else {
        Observation::NoUpdate
    }
}

/// `r_s(a, z)` tabulated for one generation probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationModel {
    p_g: f64,
    table: [[[f64; 2]; 2]; NUM_STATES],
}

impl ObservationModel {
    pub fn new(p_g: f64) -> Self {
        let mut table = [[[0.0; 2]; 2]; NUM_STATES];
        for s in SystemState::all() {
            for a in Action::BOTH {
                for z in Observation::BOTH {
                    table[s.index()][a.bit()][z.bit()] = observation_prob(s, a, z, p_g);
                }
            }
        }
        ObservationModel { p_g, table }
    }

    pub fn p_g(&self) -> f64 {
        self.p_g
    }

    #[inline]
    pub fn prob(&self, state: usize, action: Action, obs: Observation) -> f64 {
        self.table[state][action.bit()][obs.bit()]
    }
}

/// Transition and observation laws together.
#[derive(Debug, Clone, PartialEq)]
pub struct Pomdp {
    pub transition: TransitionModel,
    pub observation: ObservationModel,
}

impl Pomdp {
    pub fn new(transition: TransitionModel, p_g: f64) -> Self {
        Pomdp { transition, observation: ObservationModel::new(p_g) }
    }

    pub fn p_g(&self) -> f64 {
        self.observation.p_g()
    }
}

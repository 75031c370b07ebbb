//! Simultaneous perturbation stochastic approximation over the threshold
//! pair `(theta_h, theta_d)` in `[0, 1]^2`.
//!
//! Iteration `k`:
//!
//! ```text
//! gamma_k = gamma / (k + A)^beta,   eta_k = eta / k^zeta
//! omega_k ~ uniform {-1, +1}^2
//! theta^± = clamp(theta_{k-1} ± eta_k omega_k)
//! y^± = J_hat(theta^±)              (M_s episodes each)
//! e_k = (y^+ - y^-) / (2 eta_k omega_k)   element-wise
//! theta_k = clamp(theta_{k-1} - gamma_k e_k)
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{Combiner, ThresholdPolicy};
use crate::rng::StreamKey;
use crate::scenario::ScenarioConfig;
use crate::sim::monte_carlo_eval;

pub type Theta = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpsaConfig {
    pub gamma: f64,
    pub stability_offset: f64,
    pub eta: f64,
    pub beta: f64,
    pub zeta: f64,
    pub iterations: u32,
    pub eval_reps: usize,
    pub combiner: Combiner,
    pub common_random_numbers: bool,
    pub initial_theta: Theta,
    /// Extra starting points; when nonempty the run is repeated from each
    /// and the best final threshold is kept.
    #[serde(default)]
    pub multi_start: Vec<Theta>,
    /// Episodes used to rank the final thresholds of a multi-start run.
    pub selection_reps: usize,
}

impl Default for SpsaConfig {
    fn default() -> Self {
        SpsaConfig {
            gamma: 1e-3,
            stability_offset: 1.0,
            eta: 1.0,
            beta: 1.0,
            zeta: 1.0,
            iterations: 20,
            eval_reps: 100,
            combiner: Combiner::Conjunctive,
            common_random_numbers: false,
            initial_theta: [0.5, 0.5],
            multi_start: Vec::new(),
            selection_reps: 400,
        }
    }
}

/// `{0.25, 0.5, 0.75}^2`.
pub fn default_start_grid() -> Vec<Theta> {
    let g = [0.25, 0.5, 0.75];
    g.iter().flat_map(|&h| g.iter().map(move |&d| [h, d])).collect()
}

/// Starts used by the sweeps: five entropy levels crossed with AoI
/// thresholds concentrated below 0.3.
pub fn dense_start_grid() -> Vec<Theta> {
    let h = [0.1, 0.3, 0.5, 0.7, 0.9];
    let d = [0.02, 0.04, 0.06, 0.08, 0.1, 0.15, 0.2, 0.3];
    h.iter().flat_map(|&h| d.iter().map(move |&d| [h, d])).collect()
}

impl SpsaConfig {
    /// Paper gains with the dense multi-start grid and 1000 selection episodes.
    pub fn for_sweeps() -> Self {
        SpsaConfig { multi_start: dense_start_grid(), selection_reps: 1000, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        for (name, v) in [
            ("gamma", self.gamma),
            ("stability_offset", self.stability_offset),
            ("eta", self.eta),
            ("beta", self.beta),
            ("zeta", self.zeta),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("spsa.{name} = {v} must be a nonnegative number"));
            }
        }
        if self.gamma <= 0.0 || self.eta <= 0.0 {
            return bad("spsa.gamma and spsa.eta must be positive".into());
        }
        if self.iterations == 0 || self.eval_reps == 0 || self.selection_reps == 0 {
            return bad("spsa iterations, eval_reps and selection_reps must be at least 1".into());
        }
        for t in std::iter::once(&self.initial_theta).chain(&self.multi_start) {
            if !t.iter().all(|v| (0.0..=1.0).contains(v)) {
                return bad(format!("threshold start {t:?} outside [0, 1]^2"));
            }
        }
        Ok(())
    }
}

pub fn gain_sequences(config: &SpsaConfig, k: u32) -> (f64, f64) {
    let k = k as f64;
    let gamma_k = config.gamma / (k + config.stability_offset).powf(config.beta);
    let eta_k = config.eta / k.powf(config.zeta);
    (gamma_k, eta_k)
}

fn clamp01(t: Theta) -> Theta {
    t.map(|v| v.clamp(0.0, 1.0))
}

pub fn perturb(theta: Theta, eta_k: f64, omega: [f64; 2]) -> (Theta, Theta) {
    let plus = clamp01([theta[0] + eta_k * omega[0], theta[1] + eta_k * omega[1]]);
    let minus = clamp01([theta[0] - eta_k * omega[0], theta[1] - eta_k * omega[1]]);
    (plus, minus)
}

/// Mean total episode cost of the threshold policy `theta`.
pub fn estimate_cost(theta: Theta, combiner: Combiner, config: &ScenarioConfig, reps: usize, key: StreamKey) -> Result<f64> {
    let policy = ThresholdPolicy::new(theta[0], theta[1], combiner)?;
    Ok(monte_carlo_eval(config, &policy, reps, key)?.j_hat)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpsaStep {
    pub k: u32,
    pub gamma_k: f64,
    pub eta_k: f64,
    pub omega: [f64; 2],
    pub theta_plus: Theta,
    pub theta_minus: Theta,
    pub y_plus: f64,
    pub y_minus: f64,
    pub gradient: [f64; 2],
    pub theta: Theta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpsaTrace {
    pub initial_theta: Theta,
    pub steps: Vec<SpsaStep>,
}

impl SpsaTrace {
    pub fn final_theta(&self) -> Theta {
        self.steps.last().map_or(self.initial_theta, |s| s.theta)
    }

    /// Iterate whose perturbation pair had the lowest mean cost.
    pub fn best_seen(&self) -> Theta {
        self.steps
            .iter()
            .min_by(|a, b| (a.y_plus + a.y_minus).total_cmp(&(b.y_plus + b.y_minus)))
            .map_or(self.initial_theta, |s| s.theta)
    }
}

/// One SPSA run from `theta0`.
pub fn spsa_from(
    config: &SpsaConfig,
    scenario: &ScenarioConfig,
    theta0: Theta,
    key: StreamKey,
) -> Result<(Theta, SpsaTrace)> {
    config.validate()?;
    let mut theta = clamp01(theta0);
    let mut steps = Vec::with_capacity(config.iterations as usize);
    for k in 1..=config.iterations {
        let (gamma_k, eta_k) = gain_sequences(config, k);
        let iter_key = key.child(k as u64);
        let mut dir_rng = iter_key.child(0).rng();
        let omega = [0, 1].map(|_| if dir_rng.random::<bool>() { 1.0 } else { -1.0 });
        let (theta_plus, theta_minus) = perturb(theta, eta_k, omega);
        let plus_key = iter_key.child(1);
        let minus_key = if config.common_random_numbers { plus_key } else { iter_key.child(2) };
        let y_plus = estimate_cost(theta_plus, config.combiner, scenario, config.eval_reps, plus_key)?;
        let y_minus = estimate_cost(theta_minus, config.combiner, scenario, config.eval_reps, minus_key)?;
        let gradient = [0, 1].map(|i| (y_plus - y_minus) / (2.0 * eta_k * omega[i]));
        theta = clamp01([theta[0] - gamma_k * gradient[0], theta[1] - gamma_k * gradient[1]]);
        steps.push(SpsaStep { k, gamma_k, eta_k, omega, theta_plus, theta_minus, y_plus, y_minus, gradient, theta });
    }
    Ok((theta, SpsaTrace { initial_theta: clamp01(theta0), steps }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpsaOutcome {
    pub theta: Theta,
    /// One trace per start, in start order.
    pub traces: Vec<SpsaTrace>,
    /// Selection estimate of each start's final threshold (empty for a
    /// single start).
    pub selection_costs: Vec<f64>,
}

/// Runs SPSA from `initial_theta`, or from every `multi_start` point and
/// keeps the final threshold with the lowest selection estimate. All
/// candidates are ranked on the same episode streams.
pub fn spsa_run(config: &SpsaConfig, scenario: &ScenarioConfig, key: StreamKey) -> Result<SpsaOutcome> {
    config.validate()?;
    if config.multi_start.is_empty() {
        let (theta, trace) = spsa_from(config, scenario, config.initial_theta, key.child(0))?;
        return Ok(SpsaOutcome { theta, traces: vec![trace], selection_costs: Vec::new() });
    }
    let mut traces = Vec::with_capacity(config.multi_start.len());
    let mut selection_costs = Vec::with_capacity(config.multi_start.len());
    let select_key = key.child(u64::MAX);
    for (i, &start) in config.multi_start.iter().enumerate() {
        let (theta, trace) = spsa_from(config, scenario, start, key.child(i as u64))?;
        selection_costs.push(estimate_cost(theta, config.combiner, scenario, config.selection_reps, select_key)?);
        traces.push(trace);
    }
    let best = selection_costs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("multi_start is nonempty");
    Ok(SpsaOutcome { theta: traces[best].final_theta(), traces, selection_costs })
}

//! Python bindings for the `afdsim` core crate.
//!
//! ```python
//! import afdsim
//! sc = afdsim.Scenario.basic(0.5)
//! print(sc.evaluate("delay_d10", 500).j_hat)
//! ```

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use afdsim_core::io::{self, ExperimentConfig};
use afdsim_core::model::{Action, Observation};
use afdsim_core::verify::{run_suite, Suite};
use afdsim_core::{BeliefState, Error, ScenarioConfig, SpsaConfig, StreamKey};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn action(bit: u8) -> PyResult<Action> {
    Action::from_bit(bit).ok_or_else(|| PyValueError::new_err(format!("action must be 0 or 1, got {bit}")))
}

fn observation(bit: u8) -> PyResult<Observation> {
    Observation::from_bit(bit).ok_or_else(|| PyValueError::new_err(format!("observation must be 0 or 1, got {bit}")))
}

fn belief(probs: [f64; 8]) -> PyResult<BeliefState> {
    BeliefState::new(probs).map_err(to_py)
}

/// Monte-Carlo estimate of the expected total cost.
#[pyclass(frozen, get_all, module = "afdsim")]
struct Evaluation {
    j_hat: f64,
    std_error: f64,
    replications: usize,
    entropy_cost: f64,
    aoi_cost: f64,
    probe_cost: f64,
}

#[pymethods]
impl Evaluation {
    fn __repr__(&self) -> String {
        format!("Evaluation(j_hat={:.4}, std_error={:.4}, replications={})", self.j_hat, self.std_error, self.replications)
    }
}

/// Root of an exact DP solution.
#[pyclass(frozen, get_all, module = "afdsim")]
struct DpResult {
    optimal_cost: f64,
    /// 1 to probe, 0 otherwise.
    root_action: u8,
    /// `(Q(no-probe), Q(probe))` at the root.
    q_values: (f64, f64),
    node_count: usize,
}

#[pymethods]
impl DpResult {
    fn __repr__(&self) -> String {
        format!("DpResult(optimal_cost={:.6}, root_action={}, node_count={})", self.optimal_cost, self.root_action, self.node_count)
    }
}

#[pyclass(frozen, get_all, module = "afdsim")]
struct SuiteResult {
    suite: String,
    trials: usize,
    checked: usize,
    violations: usize,
    skipped: usize,
    max_error: f64,
    passed: bool,
}

#[pymethods]
impl SuiteResult {
    fn __repr__(&self) -> String {
        format!("SuiteResult(suite={:?}, violations={}, passed={})", self.suite, self.violations, self.passed)
    }
}

/// A scenario with its SPSA settings.
#[pyclass(module = "afdsim")]
struct Scenario {
    inner: ExperimentConfig,
}

impl Scenario {
    fn config(&self) -> &ScenarioConfig {
        &self.inner.scenario
    }
}

#[pymethods]
impl Scenario {
    /// Basic scenario with the SM link's `P(faulty -> faulty)` set to `sm_p11`.
    #[staticmethod]
    #[pyo3(signature = (sm_p11=0.1))]
    fn basic(sm_p11: f64) -> PyResult<Self> {
        let mut inner = ExperimentConfig::basic();
        let seed = inner.scenario.seed;
        inner.scenario = ScenarioConfig::basic(sm_p11).map_err(to_py)?;
        inner.scenario.seed = seed;
        Ok(Scenario { inner })
    }

    /// Loads a TOML scenario file.
    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        Ok(Scenario { inner: io::load_experiment(path).map_err(to_py)? })
    }

    /// Parses TOML scenario text.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Scenario { inner: io::from_toml(text, "<string>").map_err(to_py)? })
    }

    fn to_toml(&self) -> PyResult<String> {
        io::to_toml(&self.inner).map_err(to_py)
    }

    #[getter]
    fn horizon(&self) -> u32 {
        self.config().horizon
    }

    #[getter]
    fn p_g(&self) -> f64 {
        self.config().p_g
    }

    #[getter]
    fn probe_cost(&self) -> f64 {
        self.config().probe_cost
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.config().seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.scenario.seed = seed;
    }

    /// Stationary probability that the SM link is faulty, if defined.
    #[getter]
    fn tau_sm_f(&self) -> Option<f64> {
        self.config().tau_sm_f()
    }

    /// Initial belief over the eight joint states.
    fn initial_belief(&self) -> PyResult<[f64; 8]> {
        Ok(*self.config().initial_belief_state().map_err(to_py)?.probs())
    }

    /// One Bayes filter step. Raises `ValueError` for an impossible observation.
    fn belief_update(&self, belief_probs: [f64; 8], action_bit: u8, obs_bit: u8) -> PyResult<[f64; 8]> {
        let b = afdsim_core::belief_update(
            &belief(belief_probs)?,
            action(action_bit)?,
            observation(obs_bit)?,
            &self.config().pomdp(),
        )
        .map_err(to_py)?;
        Ok(*b.probs())
    }

    /// Evaluates a policy: `threshold:<h>,<d>`, `delay_d<D>`, `never_probe`
    /// or `always_probe`.
    #[pyo3(signature = (policy, replications=1000))]
    fn evaluate(&self, py: Python<'_>, policy: &str, replications: usize) -> PyResult<Evaluation> {
        let (p, _) = afdsim_core::cli::parse_policy(policy, &self.inner).map_err(to_py)?;
        let cfg = self.config().clone();
        let r = py
            .detach(|| afdsim_core::monte_carlo_eval(&cfg, p.as_ref(), replications, StreamKey::root(cfg.seed)))
            .map_err(to_py)?;
        Ok(Evaluation {
            j_hat: r.j_hat,
            std_error: r.std_error,
            replications: r.replications,
            entropy_cost: r.breakdown.entropy_cost,
            aoi_cost: r.breakdown.aoi_cost,
            probe_cost: r.breakdown.probe_cost_total,
        })
    }

    /// Runs SPSA and returns `(theta_h, theta_d)`. `iterations` and
    /// `eval_reps` override the configured values.
    #[pyo3(signature = (iterations=None, eval_reps=None, single_start=false))]
    fn optimize(
        &self,
        py: Python<'_>,
        iterations: Option<u32>,
        eval_reps: Option<usize>,
        single_start: bool,
    ) -> PyResult<(f64, f64)> {
        let mut spsa: SpsaConfig = self.inner.spsa.clone();
        if let Some(k) = iterations {
            spsa.iterations = k;
        }
        if let Some(r) = eval_reps {
            spsa.eval_reps = r;
        }
        if single_start {
            spsa.multi_start.clear();
        }
        let cfg = self.config().clone();
        let out = py
            .detach(|| afdsim_core::spsa_run(&spsa, &cfg, StreamKey::root(cfg.seed).child(0)))
            .map_err(to_py)?;
        Ok((out.theta[0], out.theta[1]))
    }

    /// Exact DP over `horizon` stages from the initial belief.
    fn dp_solve(&self, py: Python<'_>, horizon: u32) -> PyResult<DpResult> {
        let mut cfg = self.config().clone();
        cfg.horizon = horizon;
        cfg.initial_aoi = cfg.initial_aoi.min(horizon.max(1));
        let x = cfg.initial_augmented().map_err(to_py)?;
        let sol = py.detach(|| afdsim_core::dp_solve(&x, &cfg, horizon)).map_err(to_py)?;
        let root = sol.root();
        Ok(DpResult {
            optimal_cost: sol.optimal_cost(),
            root_action: root.optimal_action.map_or(0, |a| a.bit() as u8),
            q_values: (root.cost_to_go[0], root.cost_to_go[1]),
            node_count: sol.node_count(),
        })
    }

    fn __repr__(&self) -> String {
        let c = self.config();
        format!("Scenario(horizon={}, p_g={}, probe_cost={}, seed={})", c.horizon, c.p_g, c.probe_cost, c.seed)
    }
}

/// Binary entropy (bits) of the GT health status under a joint belief.
#[pyfunction]
fn entropy(belief_probs: [f64; 8]) -> PyResult<f64> {
    Ok(belief(belief_probs)?.entropy())
}

/// Runs one randomised verification suite by name.
#[pyfunction]
#[pyo3(signature = (suite, trials=1000, seed=0))]
fn verify(py: Python<'_>, suite: &str, trials: usize, seed: u64) -> PyResult<SuiteResult> {
    let s: Suite = suite.parse().map_err(to_py)?;
    let r = py.detach(|| run_suite(s, trials, StreamKey::root(seed))).map_err(to_py)?;
    Ok(SuiteResult {
        suite: suite.to_string(),
        trials: r.trials,
        checked: r.checked,
        violations: r.violations,
        skipped: r.skipped,
        max_error: r.max_error,
        passed: r.passed(),
    })
}

/// Names accepted by [`verify`].
#[pyfunction]
fn suites() -> Vec<String> {
    Suite::ALL.iter().map(|s| s.name().to_string()).collect()
}

#[pymodule]
fn afdsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<Evaluation>()?;
    m.add_class::<DpResult>()?;
    m.add_class::<SuiteResult>()?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(suites, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

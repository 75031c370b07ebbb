//! Experiment configuration files, CSV result tables and run manifests.
//!
//! Configuration is TOML with `schema_version = 1`. Every key is optional;
//! omitted keys fall back to the basic scenario, the default SPSA settings
//! with the dense start grid, and the `p11` sweep with the default roster.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SubsystemKernel, TransitionModel, NUM_STATES};
use crate::policy::Combiner;
use crate::scenario::{BeliefInit, InitialStateMode, ScenarioConfig};
use crate::sim::sweep::{HorizonGap, RosterEntry, SweepParameter, SweepRow, SweepSpec};
use crate::spsa::{SpsaConfig, SpsaTrace, Theta};

pub const SCHEMA_VERSION: u32 = 1;

/// Columns of every result table, in order.
pub const RESULT_COLUMNS: [&str; 10] = [
    "sweep_value",
    "tau_sm_f",
    "policy_id",
    "j_hat",
    "std_error",
    "entropy_cost",
    "aoi_cost",
    "probe_cost",
    "theta_h",
    "theta_d",
];

/// The basic scenario as shipped with the crate.
pub const BUNDLED_BASIC: &str = include_str!("../scenarios/basic.scenario");

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonSpec {
    pub horizons: Vec<u32>,
    pub reference_delay: u32,
    pub replications: usize,
}

impl Default for HorizonSpec {
    fn default() -> Self {
        HorizonSpec { horizons: vec![50, 100, 150, 200], reference_delay: 90, replications: 2000 }
    }
}

/// Everything one configuration file describes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub spsa: SpsaConfig,
    pub sweep: SweepSpec,
    pub horizon: HorizonSpec,
}

impl ExperimentConfig {
    pub fn basic() -> Self {
        from_toml(BUNDLED_BASIC, "basic.scenario").expect("bundled scenario is valid")
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    schema_version: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default)]
    scenario: RawScenario,
    #[serde(default)]
    spsa: RawSpsa,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    horizon_sweep: RawHorizon,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RawBelief {
    Named(String),
    Explicit(Vec<f64>),
}

type Rows = [[f64; 2]; 2];

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(skip_serializing_if = "Option::is_none")]
    p_g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    probe_cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_aoi: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_belief: Option<RawBelief>,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_state: Option<String>,
    #[serde(default)]
    kernels: RawKernels,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernels {
    #[serde(skip_serializing_if = "Option::is_none")]
    ms: Option<Rows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sensor: Option<Rows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sm: Option<Rows>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpsa {
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stability_offset: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    zeta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eval_reps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    combiner: Option<Combiner>,
    #[serde(skip_serializing_if = "Option::is_none")]
    common_random_numbers: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_theta: Option<Theta>,
    #[serde(skip_serializing_if = "Option::is_none")]
    multi_start: Option<Vec<Theta>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    selection_reps: Option<usize>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    parameter: Option<SweepParameter>,
    #[serde(skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    roster: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    replications: Option<usize>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHorizon {
    #[serde(skip_serializing_if = "Option::is_none")]
    horizons: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference_delay: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    replications: Option<usize>,
}

fn kernel(rows: Option<Rows>, default: SubsystemKernel) -> Result<SubsystemKernel> {
    rows.map_or(Ok(default), SubsystemKernel::from_rows)
}

fn belief_init(raw: Option<RawBelief>) -> Result<BeliefInit> {
    match raw {
        None => Ok(BeliefInit::Uniform),
        Some(RawBelief::Named(n)) => match n.as_str() {
            "uniform" => Ok(BeliefInit::Uniform),
            "stationary" => Ok(BeliefInit::Stationary),
            other => Err(Error::InvalidConfig(format!("scenario.initial_belief: unknown value `{other}`"))),
        },
        Some(RawBelief::Explicit(v)) => {
            let arr: [f64; NUM_STATES] = v.try_into().map_err(|v: Vec<f64>| {
                Error::InvalidConfig(format!("scenario.initial_belief has {} entries, expected {NUM_STATES}", v.len()))
            })?;
            Ok(BeliefInit::Explicit(arr))
        }
    }
}

fn initial_state(raw: Option<String>) -> Result<InitialStateMode> {
    match raw.as_deref() {
        None | Some("independent_uniform") => Ok(InitialStateMode::IndependentUniform),
        Some("stationary") => Ok(InitialStateMode::Stationary),
        Some("from_belief") => Ok(InitialStateMode::FromBelief),
        Some(other) => Err(Error::InvalidConfig(format!("scenario.initial_state: unknown value `{other}`"))),
    }
}

fn build(raw: RawFile) -> Result<ExperimentConfig> {
    if let Some(v) = raw.schema_version {
        if v != SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!("schema_version {v} is not supported (expected {SCHEMA_VERSION})")));
        }
    }
    let basic = ScenarioConfig::basic(0.1)?;
    let s = raw.scenario;
    let k = &s.kernels;
    let horizon = s.horizon.unwrap_or(basic.horizon);
    let scenario = ScenarioConfig {
        transition: TransitionModel::new(
            kernel(k.ms, basic.transition.ms)?,
            kernel(k.sensor, basic.transition.sensor)?,
            kernel(k.sm, basic.transition.sm)?,
        )?,
        p_g: s.p_g.unwrap_or(basic.p_g),
        probe_cost: s.probe_cost.unwrap_or(basic.probe_cost),
        lambda1: s.lambda1.unwrap_or(basic.lambda1),
        lambda2: s.lambda2.unwrap_or(basic.lambda2),
        horizon,
        initial_belief: belief_init(s.initial_belief)?,
        initial_aoi: s.initial_aoi.unwrap_or(basic.initial_aoi),
        initial_state: initial_state(s.initial_state)?,
        seed: raw.seed.unwrap_or(basic.seed),
    };
    scenario.validate()?;

    let d = SpsaConfig::for_sweeps();
    let p = raw.spsa;
    let spsa = SpsaConfig {
        gamma: p.gamma.unwrap_or(d.gamma),
        stability_offset: p.stability_offset.unwrap_or(d.stability_offset),
        eta: p.eta.unwrap_or(d.eta),
        beta: p.beta.unwrap_or(d.beta),
        zeta: p.zeta.unwrap_or(d.zeta),
        iterations: p.iterations.unwrap_or(d.iterations),
        eval_reps: p.eval_reps.unwrap_or(d.eval_reps),
        combiner: p.combiner.unwrap_or(d.combiner),
        common_random_numbers: p.common_random_numbers.unwrap_or(d.common_random_numbers),
        initial_theta: p.initial_theta.unwrap_or(d.initial_theta),
        multi_start: p.multi_start.unwrap_or(d.multi_start),
        selection_reps: p.selection_reps.unwrap_or(d.selection_reps),
    };
    spsa.validate()?;

    let dflt = SweepSpec::sm_persistence()?;
    let w = raw.sweep;
    let roster = match w.roster {
        Some(r) => r.iter().map(|e| e.parse()).collect::<Result<Vec<RosterEntry>>>()?,
        None => dflt.roster,
    };
    let sweep = SweepSpec {
        name: w.name.unwrap_or(dflt.name),
        base: scenario.clone(),
        parameter: w.parameter.unwrap_or(dflt.parameter),
        values: w.values.unwrap_or(dflt.values),
        roster,
        replications: w.replications.unwrap_or(dflt.replications),
    };
    sweep.validate()?;

    let hd = HorizonSpec::default();
    let h = raw.horizon_sweep;
    let horizon_spec = HorizonSpec {
        horizons: h.horizons.unwrap_or(hd.horizons),
        reference_delay: h.reference_delay.unwrap_or(hd.reference_delay),
        replications: h.replications.unwrap_or(hd.replications),
    };
    if horizon_spec.horizons.is_empty() || horizon_spec.horizons.contains(&0) {
        return Err(Error::InvalidConfig("horizon_sweep.horizons must be nonempty positive integers".into()));
    }
    if horizon_spec.reference_delay == 0 || horizon_spec.replications == 0 {
        return Err(Error::InvalidConfig("horizon_sweep.reference_delay and replications must be at least 1".into()));
    }

    Ok(ExperimentConfig { scenario, spsa, sweep, horizon: horizon_spec })
}

/// Parses configuration text; `origin` names the source in error messages.
pub fn from_toml(text: &str, origin: &str) -> Result<ExperimentConfig> {
    let raw: RawFile = toml::from_str(text).map_err(|e| Error::Parse(format!("{origin}: {e}")))?;
    build(raw).map_err(|e| match e {
        Error::InvalidConfig(m) => Error::InvalidConfig(format!("{origin}: {m}")),
        other => other,
    })
}

pub fn load_experiment(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_toml(&text, &path.display().to_string())
}

pub fn parse_scenario_config(path: impl AsRef<Path>) -> Result<(ScenarioConfig, SpsaConfig, SweepSpec)> {
    let c = load_experiment(path)?;
    Ok((c.scenario, c.spsa, c.sweep))
}

/// Writes every field explicitly, so the output does not depend on defaults.
pub fn to_toml(config: &ExperimentConfig) -> Result<String> {
    let s = &config.scenario;
    let belief = match s.initial_belief {
        BeliefInit::Uniform => RawBelief::Named("uniform".into()),
        BeliefInit::Stationary => RawBelief::Named("stationary".into()),
        BeliefInit::Explicit(p) => RawBelief::Explicit(p.to_vec()),
    };
    let state = match s.initial_state {
        InitialStateMode::IndependentUniform => "independent_uniform",
        InitialStateMode::Stationary => "stationary",
        InitialStateMode::FromBelief => "from_belief",
    };
    let p = &config.spsa;
    let w = &config.sweep;
    let raw = RawFile {
        schema_version: Some(SCHEMA_VERSION),
        seed: Some(s.seed),
        scenario: RawScenario {
            p_g: Some(s.p_g),
            probe_cost: Some(s.probe_cost),
            lambda1: Some(s.lambda1),
            lambda2: Some(s.lambda2),
            horizon: Some(s.horizon),
            initial_aoi: Some(s.initial_aoi),
            initial_belief: Some(belief),
            initial_state: Some(state.into()),
            kernels: RawKernels {
                ms: Some(s.transition.ms.rows()),
                sensor: Some(s.transition.sensor.rows()),
                sm: Some(s.transition.sm.rows()),
            },
        },
        spsa: RawSpsa {
            gamma: Some(p.gamma),
            stability_offset: Some(p.stability_offset),
            eta: Some(p.eta),
            beta: Some(p.beta),
            zeta: Some(p.zeta),
            iterations: Some(p.iterations),
            eval_reps: Some(p.eval_reps),
            combiner: Some(p.combiner),
            common_random_numbers: Some(p.common_random_numbers),
            initial_theta: Some(p.initial_theta),
            multi_start: Some(p.multi_start.clone()),
            selection_reps: Some(p.selection_reps),
        },
        sweep: RawSweep {
            name: Some(w.name.clone()),
            parameter: Some(w.parameter),
            values: Some(w.values.clone()),
            roster: Some(w.roster.iter().map(|e| e.id()).collect()),
            replications: Some(w.replications),
        },
        horizon_sweep: RawHorizon {
            horizons: Some(config.horizon.horizons.clone()),
            reference_delay: Some(config.horizon.reference_delay),
            replications: Some(config.horizon.replications),
        },
    };
    toml::to_string(&raw).map_err(|e| Error::Parse(e.to_string()))
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

/// Writes `<name>.csv` with the result columns. Rows are written in order.
pub fn write_results_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Empty("result table"));
    }
    let mut w = csv_writer(path)?;
    w.write_record(RESULT_COLUMNS)?;
    for r in rows {
        let b = r.report.breakdown;
        let (th, td) = r.theta.map_or((String::new(), String::new()), |t| (t[0].to_string(), t[1].to_string()));
        w.write_record([
            fmt_f64(r.sweep_value),
            fmt_f64(r.tau_sm_f),
            r.policy_id.clone(),
            r.report.j_hat.to_string(),
            r.report.std_error.to_string(),
            b.entropy_cost.to_string(),
            b.aoi_cost.to_string(),
            b.probe_cost_total.to_string(),
            th,
            td,
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_gaps_csv(gaps: &[HorizonGap], path: &Path) -> Result<()> {
    if gaps.is_empty() {
        return Err(Error::Empty("horizon gap table"));
    }
    let mut w = csv_writer(path)?;
    w.write_record(["horizon", "threshold_j", "reference_j", "relative_reduction"])?;
    for g in gaps {
        w.write_record([
            g.horizon.to_string(),
            g.threshold_j.to_string(),
            g.reference_j.to_string(),
            g.relative_reduction.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row per SPSA iteration, `start` indexing the multi-start traces.
pub fn write_trace_csv(traces: &[SpsaTrace], path: &Path) -> Result<()> {
    if traces.is_empty() {
        return Err(Error::Empty("spsa trace"));
    }
    let mut w = csv_writer(path)?;
    w.write_record([
        "start", "k", "gamma_k", "eta_k", "omega_h", "omega_d", "theta_plus_h", "theta_plus_d", "theta_minus_h",
        "theta_minus_d", "y_plus", "y_minus", "grad_h", "grad_d", "theta_h", "theta_d",
    ])?;
    for (i, t) in traces.iter().enumerate() {
        for s in &t.steps {
            let vals = [
                s.gamma_k,
                s.eta_k,
                s.omega[0],
                s.omega[1],
                s.theta_plus[0],
                s.theta_plus[1],
                s.theta_minus[0],
                s.theta_minus[1],
                s.y_plus,
                s.y_minus,
                s.gradient[0],
                s.gradient[1],
                s.theta[0],
                s.theta[1],
            ];
            let mut rec = vec![i.to_string(), s.k.to_string()];
            rec.extend(vals.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn plot_script(csv_name: &str) -> String {
    format!(
        r#"import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "{csv_name}"
series = defaultdict(list)
with open(path) as f:
    for row in csv.DictReader(f):
        x = row["tau_sm_f"] or row["sweep_value"]
        series[row["policy_id"]].append((float(x), float(row["j_hat"])))

for policy, pts in series.items():
    pts.sort()
    plt.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=policy)
plt.xlabel("tau_sm_f" if series else "sweep value")
plt.ylabel("J_hat")
plt.legend(fontsize="small")
plt.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
"#
    )
}

/// Writes `<name>.csv` under `out_dir` and, if asked, a matplotlib script
/// next to it. Returns the written paths.
pub fn emit_results(rows: &[SweepRow], out_dir: &Path, name: &str, with_plot: bool) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(Error::Empty("result table"));
    }
    ensure_dir(out_dir)?;
    let csv_path = out_dir.join(format!("{name}.csv"));
    write_results_csv(rows, &csv_path)?;
    let mut out = vec![csv_path];
    if with_plot {
        let script = out_dir.join(format!("plot_{name}.py"));
        fs::write(&script, plot_script(&format!("{name}.csv"))).map_err(|e| Error::io(&script, e))?;
        out.push(script);
    }
    Ok(out)
}

/// A command that can be re-executed from its manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum RunRequest {
    Simulate { policy: String, replications: usize },
    Optimize,
    Sweep,
    Horizon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub seed: u64,
    pub request: RunRequest,
    pub roster: Vec<String>,
    pub spsa: SpsaConfig,
    /// Full configuration, as accepted by [`from_toml`].
    pub config: String,
    /// Output files relative to the output directory.
    pub outputs: Vec<String>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

impl RunManifest {
    pub fn new(config: &ExperimentConfig, request: RunRequest) -> Result<Self> {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Ok(RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            timestamp,
            seed: config.scenario.seed,
            request,
            roster: config.sweep.roster.iter().map(|e| e.id()).collect(),
            spsa: config.spsa.clone(),
            config: to_toml(config)?,
            outputs: Vec::new(),
        })
    }

    pub fn experiment(&self) -> Result<ExperimentConfig> {
        from_toml(&self.config, "manifest")
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        ensure_dir(out_dir)?;
        let path = out_dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_is_basic_scenario() {
        let c = ExperimentConfig::basic();
        let mut b = ScenarioConfig::basic(0.1).unwrap();
        b.seed = c.scenario.seed;
        assert_eq!(c.scenario, b);
        assert_eq!(c.sweep.values.len(), 9);
        assert_eq!(c.sweep.roster.len(), 11);
    }

    #[test]
    fn empty_file_takes_defaults() {
        let c = from_toml("", "empty").unwrap();
        assert_eq!(c.scenario, ScenarioConfig::basic(0.1).unwrap());
        assert_eq!(c.scenario.initial_aoi, 1);
        assert_eq!(c.spsa, SpsaConfig::for_sweeps());
        assert_eq!(c.horizon, HorizonSpec::default());
    }

    #[test]
    fn round_trip() {
        let mut c = ExperimentConfig::basic();
        c.scenario.initial_belief = BeliefInit::Explicit([0.3, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1]);
        c.scenario.initial_state = InitialStateMode::FromBelief;
        c.sweep.base = c.scenario.clone();
        let text = to_toml(&c).unwrap();
        let back = from_toml(&text, "rt").unwrap();
        assert_eq!(back, c);
        assert_eq!(to_toml(&back).unwrap(), text);
    }

    #[test]
    fn bad_row_is_rejected() {
        let text = "[scenario.kernels]\nms = [[0.85, 0.1], [0.9, 0.1]]\n";
        assert!(matches!(from_toml(text, "bad"), Err(Error::InvalidKernel { .. })));
    }

    #[test]
    fn syntax_error_has_line() {
        let err = from_toml("schema_version = 1\n[scenario]\np_g = = 0.1\n", "broken").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn unknown_key_and_version() {
        assert!(from_toml("[scenario]\npg = 0.1\n", "typo").is_err());
        assert!(from_toml("schema_version = 2\n", "v2").is_err());
        assert!(from_toml("[sweep]\nroster = []\n", "empty").is_err());
    }

    #[test]
    fn empty_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(emit_results(&[], dir.path(), "x", false), Err(Error::Empty(_))));
    }
}

//! Command-line entry point.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dp::{dp_solve, probe_advantage};
use crate::error::{Error, Result};
use crate::io::{self, ExperimentConfig, RunManifest, RunRequest, MANIFEST_NAME};
use crate::model::Action;
use crate::policy::{ConstantPolicy, DelayPolicy, Policy, ThresholdPolicy};
use crate::rng::StreamKey;
use crate::sim::monte_carlo_eval;
use crate::sim::sweep::{evaluate_point, horizon_sweep, sweep_scenarios, RosterEntry, SweepRow};
use crate::spsa::{spsa_run, Theta};
use crate::verify::{run_suite, Suite};

#[derive(Debug, Parser)]
#[command(name = "afdsim", version, about = "Active fault detection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (defaults to the bundled basic scenario).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Monte-Carlo replications, overriding the file.
    #[arg(long)]
    reps: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate one policy.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// `threshold:<theta_h>,<theta_d>`, `delay_d<D>`, `never_probe` or `always_probe`.
        #[arg(long, default_value = "delay_d10")]
        policy: String,
    },
    /// Optimise the threshold pair with SPSA.
    Optimize {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep a scenario parameter over the policy roster.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Skip the plot script.
        #[arg(long)]
        no_plot: bool,
    },
    /// Evaluate the roster over increasing horizons.
    Horizon {
        #[command(flatten)]
        common: Common,
        /// Comma-separated horizons, overriding the file.
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<u32>>,
    },
    /// Solve the exact belief-tree DP from the initial state.
    Dp {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 6)]
        horizon: u32,
        /// Write the solved tree as CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run randomised property suites.
    Verify {
        /// Suite name or `all`.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-run an experiment from its manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(config: &Option<PathBuf>) -> Result<ExperimentConfig> {
    match config {
        Some(p) => io::load_experiment(p),
        None => Ok(ExperimentConfig::basic()),
    }
}

fn load_common(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.scenario.seed = s;
        cfg.sweep.base.seed = s;
    }
    Ok(cfg)
}

/// Parses a policy spec as accepted by `simulate --policy`; the threshold
/// pair is returned for threshold policies.
pub fn parse_policy(spec: &str, cfg: &ExperimentConfig) -> Result<(Box<dyn Policy>, Option<Theta>)> {
    if let Some(rest) = spec.strip_prefix("threshold:") {
        let t: Vec<f64> = rest
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| Error::InvalidConfig(format!("bad threshold `{spec}`"))))
            .collect::<Result<_>>()?;
        if t.len() != 2 {
            return Err(Error::InvalidConfig(format!("threshold policy needs two values, got `{spec}`")));
        }
        let policy = ThresholdPolicy::new(t[0], t[1], cfg.spsa.combiner)?;
        return Ok((Box::new(policy), Some([t[0], t[1]])));
    }
    let policy: Box<dyn Policy> = match spec.parse::<RosterEntry>()? {
        RosterEntry::Delay(d) => Box::new(DelayPolicy::new(d)?),
        RosterEntry::NeverProbe => Box::new(ConstantPolicy(Action::NoProbe)),
        RosterEntry::AlwaysProbe => Box::new(ConstantPolicy(Action::Probe)),
        RosterEntry::Threshold => {
            return Err(Error::InvalidConfig("give thresholds as `threshold:<theta_h>,<theta_d>`".into()))
        }
    };
    Ok((policy, None))
}

fn rel(paths: &[PathBuf], out: &Path) -> Vec<String> {
    paths
        .iter()
        .map(|p| p.strip_prefix(out).unwrap_or(p).display().to_string())
        .collect()
}

/// Runs `request` on `config`, writing outputs and a manifest under `out`.
pub fn execute(config: &ExperimentConfig, request: &RunRequest, out: &Path, plot: bool) -> Result<Vec<PathBuf>> {
    let key = StreamKey::root(config.scenario.seed);
    let sc = &config.scenario;
    let mut files = Vec::new();
    match request {
        RunRequest::Simulate { policy, replications } => {
            let (p, theta) = parse_policy(policy, config)?;
            let report = monte_carlo_eval(sc, p.as_ref(), *replications, key)?;
            println!("{}: J_hat = {:.4} (se {:.4}, M = {})", p.id(), report.j_hat, report.std_error, replications);
            let row = SweepRow {
                sweep_value: f64::NAN,
                tau_sm_f: sc.tau_sm_f().unwrap_or(f64::NAN),
                policy_id: p.id(),
                report,
                theta,
            };
            files.extend(io::emit_results(&[row], out, "simulate", false)?);
        }
        RunRequest::Optimize => {
            let outcome = spsa_run(&config.spsa, sc, key.child(0))?;
            let t = outcome.theta;
            println!("theta = ({:.6}, {:.6})", t[0], t[1]);
            std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
            let trace = out.join("spsa_trace.csv");
            io::write_trace_csv(&outcome.traces, &trace)?;
            files.push(trace);
            let rows = evaluate_point(
                sc,
                &[RosterEntry::Threshold],
                config.sweep.replications,
                &config.spsa,
                key.child(1),
                f64::NAN,
            )?;
            files.extend(io::emit_results(&rows, out, "optimize", false)?);
        }
        RunRequest::Sweep => {
            let rows = sweep_scenarios(&config.sweep, &config.spsa, key)?;
            for r in rows.iter().filter(|r| r.policy_id == "threshold") {
                println!("{:.3}: threshold J_hat = {:.4}", r.sweep_value, r.report.j_hat);
            }
            files.extend(io::emit_results(&rows, out, &config.sweep.name, plot)?);
        }
        RunRequest::Horizon => {
            let h = &config.horizon;
            let table = horizon_sweep(
                sc,
                &h.horizons,
                &config.sweep.roster,
                h.replications,
                &config.spsa,
                h.reference_delay,
                key,
            )?;
            for g in &table.gaps {
                println!("N = {}: reduction vs delay_d{} = {:.2}%", g.horizon, h.reference_delay, 100.0 * g.relative_reduction);
            }
            files.extend(io::emit_results(&table.rows, out, "horizon", plot)?);
            let gaps = out.join("horizon_gaps.csv");
            io::write_gaps_csv(&table.gaps, &gaps)?;
            files.push(gaps);
        }
    }
    let mut manifest = RunManifest::new(config, request.clone())?;
    manifest.outputs = rel(&files, out);
    files.push(manifest.write(out)?);
    Ok(files)
}

fn run_dp(config: &Option<PathBuf>, horizon: u32, out: &Option<PathBuf>) -> Result<()> {
    let mut cfg = load(config)?.scenario;
    if horizon > crate::dp::DEFAULT_HORIZON_CAP {
        return Err(Error::HorizonCap { horizon, cap: crate::dp::DEFAULT_HORIZON_CAP });
    }
    cfg.horizon = horizon;
    cfg.initial_aoi = cfg.initial_aoi.min(horizon);
    let sol = dp_solve(&cfg.initial_augmented()?, &cfg, horizon)?;
    let root = sol.root();
    println!(
        "J_0 = {:.10}, root action = {:?}, nodes = {}",
        sol.optimal_cost(),
        root.optimal_action.unwrap_or(Action::NoProbe),
        sol.node_count()
    );
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("dp_tree.csv");
        let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["node", "stage", "entropy", "aoi", "action", "cost_to_go", "probe_advantage"])?;
        for (i, n) in sol.nodes().iter().enumerate() {
            let (action, adv) = match n.optimal_action {
                Some(a) => (a.bit().to_string(), probe_advantage(&sol, i)?.to_string()),
                None => (String::new(), String::new()),
            };
            w.write_record([
                i.to_string(),
                n.stage.to_string(),
                n.state.entropy().to_string(),
                n.state.aoi.to_string(),
                action,
                n.optimal_cost.to_string(),
                adv,
            ])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn run_verify(suite: &str, trials: usize, seed: u64) -> Result<bool> {
    let suites: Vec<Suite> = if suite == "all" { Suite::ALL.to_vec() } else { vec![suite.parse()?] };
    let mut ok = true;
    for (i, s) in suites.into_iter().enumerate() {
        let rep = run_suite(s, trials, StreamKey::root(seed).child(i as u64))?;
        let status = if rep.passed() { "PASS" } else { "FAIL" };
        println!("[{status}] {rep}");
        ok &= rep.passed();
    }
    Ok(ok)
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate { common, policy } => {
            let cfg = load_common(&common)?;
            let replications = common.reps.unwrap_or(cfg.sweep.replications);
            execute(&cfg, &RunRequest::Simulate { policy, replications }, &common.out, false)?;
        }
        Command::Optimize { common } => {
            let mut cfg = load_common(&common)?;
            if let Some(r) = common.reps {
                cfg.sweep.replications = r;
            }
            execute(&cfg, &RunRequest::Optimize, &common.out, false)?;
        }
        Command::Sweep { common, no_plot } => {
            let mut cfg = load_common(&common)?;
            if let Some(r) = common.reps {
                cfg.sweep.replications = r;
            }
            let files = execute(&cfg, &RunRequest::Sweep, &common.out, !no_plot)?;
            println!("wrote {} files to {}", files.len(), common.out.display());
        }
        Command::Horizon { common, horizons } => {
            let mut cfg = load_common(&common)?;
            if let Some(r) = common.reps {
                cfg.horizon.replications = r;
            }
            if let Some(h) = horizons {
                cfg.horizon.horizons = h;
            }
            execute(&cfg, &RunRequest::Horizon, &common.out, true)?;
        }
        Command::Dp { config, horizon, out } => run_dp(&config, horizon, &out)?,
        Command::Verify { suite, trials, seed } => return run_verify(&suite, trials, seed),
        Command::Rerun { manifest, out } => {
            let path = if manifest.is_dir() { manifest.join(MANIFEST_NAME) } else { manifest };
            let m = RunManifest::read(&path)?;
            let cfg = m.experiment()?;
            let plot = m.outputs.iter().any(|o| o.ends_with(".py"));
            execute(&cfg, &m.request, &out, plot)?;
        }
    }
    Ok(true)
}

/// Parses `argv` (including the program name) and runs the command.
/// Returns 0 on success, 1 on a failed run or check, 2 on a usage error.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(true) => 0,
        Ok(false) => {
            eprintln!("error: verification failed");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

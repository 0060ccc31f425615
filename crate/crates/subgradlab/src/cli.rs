//! Command-line front end: run methods, integrate flows, execute probes,
//! and reproduce the desk-scale experiments as CSV/JSON artifacts.
//!
//! Exit codes: 0 on success, 1 on usage or data errors, 2 when a run was
//! flagged divergent (partial artifacts are still written). Every error is
//! printed as a one-line JSON object on standard error. Identical command
//! lines with identical seeds produce byte-identical file contents; wall
//! clock time appears only in the default output directory name.
//!
//! A `--config file.json` supplies defaults with the same keys as the
//! flags; explicit flags override config values. Probe trials run on a
//! rayon worker pool sized by `--jobs`, the `SUBGRADLAB_JOBS` environment
//! variable, or the logical core count, in that order of precedence.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::flow::{energy_balance, integrate, FlowParams};
use crate::methods::{
    run_cyclic_cd, run_momentum, run_reshuffling, run_subgradient, IterateTrace, MethodParams,
};
use crate::oracles::{catalog_get, ObjectiveSpec, SelectionRule, SubgradientSelection};
use crate::probes::{
    chetaev_increment_check, fit_metric_subregularity, probe_boundary_exit_strict2d,
    probe_global_stability, probe_local_stability, probe_strong_instability, sharp_weak_check,
    verdier_ratio_scan, GlobalMethod, GlobalProbeParams, InstabilityParams, SharpWeakReport,
    StabilityProbeParams,
};
use crate::rng::SplitMix64;
use crate::trace_io::{flow_to_csv, rpca_matrix_csv, trace_metadata_json, trace_to_csv};
use crate::{norm, Point};

#[derive(Parser)]
#[command(name = "subgradlab", version, about = "Nonsmooth-optimization laboratory")]
pub struct Cli {
    /// JSON file whose keys mirror the flags; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker-pool size for probe trials (default: SUBGRADLAB_JOBS or cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a method and write the trace CSV plus metadata.
    Run(RunArgs),
    /// Integrate the subgradient flow and report the energy balance.
    Flow(FlowArgs),
    /// Local-stability probe over a (δ, α) grid.
    ProbeLocal(ProbeLocalArgs),
    /// Global-stability tail test over box starts.
    ProbeGlobal(ProbeGlobalArgs),
    /// Strong-instability probe with the Chetaev increment ledger.
    ProbeInstability(ProbeInstabilityArgs),
    /// Subregularity, Verdier, and sharpness/weak-convexity scans.
    CheckRegularity(CheckRegularityArgs),
    /// Re-run one of the canonical experiments with documented defaults.
    Reproduce(ReproduceArgs),
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    #[arg(long)]
    objective: Option<String>,
    /// Subgradient selection rule: min_norm, deterministic_sign, or
    /// seeded_random_extreme.
    #[arg(long)]
    rule: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated start point.
    #[arg(long)]
    x0: Option<String>,
    /// Output directory (default runs/<command>/<objective>/<timestamp>-<seed>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Method: sg, momentum, rr, or cd.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Initialization-bound constant δ (momentum/reshuffling).
    #[arg(long)]
    delta: Option<f64>,
    /// Steps (sg/momentum) or epochs (rr/cd).
    #[arg(long)]
    iters: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct FlowArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long = "T")]
    t_end: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    /// Trajectory scaling c.
    #[arg(long)]
    c: Option<f64>,
}

#[derive(Args, Clone, Default)]
struct ProbeLocalArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Comma-separated δ grid.
    #[arg(long)]
    delta: Option<String>,
    /// Comma-separated α grid.
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    /// Comma-separated anchor x* (default: the entry's critical anchor,
    /// else the origin).
    #[arg(long)]
    anchor: Option<String>,
}

#[derive(Args, Clone, Default)]
struct ProbeGlobalArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Comma-separated α grid.
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    /// Method: sg, momentum, rr, or cd.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Start box "lo,hi" applied to every axis.
    #[arg(long = "box")]
    x0_box: Option<String>,
}

#[derive(Args, Clone, Default)]
struct ProbeInstabilityArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Step-size interval "lo,hi".
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    radius0: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct CheckRegularityArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Sampling radius around the anchor.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct ReproduceArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// One of fig-stable-critical, fig-strict, fig-goout,
    /// fig-illustration-a, fig-illustration-b, fig-nn, fig-rpca.
    #[arg(long, value_name = "ID")]
    figure: Option<String>,
}

/// Config-file counterpart of the flags.
#[derive(Deserialize, Default)]
#[serde(default)]
struct FileConfig {
    objective: Option<String>,
    method: Option<String>,
    rule: Option<String>,
    alpha: Option<serde_json::Value>,
    beta: Option<f64>,
    gamma: Option<f64>,
    delta: Option<serde_json::Value>,
    seed: Option<u64>,
    iters: Option<usize>,
    epsilon: Option<f64>,
    trials: Option<usize>,
    out: Option<String>,
    x0: Option<String>,
    anchor: Option<String>,
    #[serde(rename = "box")]
    x0_box: Option<String>,
    radius0: Option<f64>,
    radius: Option<f64>,
    samples: Option<usize>,
    #[serde(rename = "T")]
    t_end: Option<f64>,
    h: Option<f64>,
    c: Option<f64>,
    figure: Option<String>,
    jobs: Option<usize>,
}

/// Entry point used by the binary; parses `argv`, runs the command, and
/// returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own help/version on stdout with exit 0.
            if e.use_stderr() {
                eprintln!(
                    "{{\"error\":\"usage\",\"message\":{}}}",
                    serde_json::to_string(&e.to_string()).unwrap()
                );
                return 1;
            }
            let _ = e.print();
            return 0;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            match e {
                Error::Divergence { .. } => 2,
                _ => 1,
            }
        }
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    let config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str::<FileConfig>(&text)
                .map_err(|e| Error::Parse(format!("config: {e}")))?
        }
        None => FileConfig::default(),
    };
    configure_jobs(cli.jobs.or(config.jobs));
    match cli.command {
        Command::Run(args) => cmd_run(args, &config),
        Command::Flow(args) => cmd_flow(args, &config),
        Command::ProbeLocal(args) => cmd_probe_local(args, &config),
        Command::ProbeGlobal(args) => cmd_probe_global(args, &config),
        Command::ProbeInstability(args) => cmd_probe_instability(args, &config),
        Command::CheckRegularity(args) => cmd_check_regularity(args, &config),
        Command::Reproduce(args) => cmd_reproduce(args, &config),
    }
}

fn configure_jobs(flag: Option<usize>) {
    let jobs = flag.or_else(|| {
        std::env::var("SUBGRADLAB_JOBS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = jobs.filter(|n| *n > 0) {
        // Ignored if a global pool already exists (e.g. a second command in
        // the same process); the first configuration wins.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}

fn parse_point(text: &str) -> Result<Point, Error> {
    text.split(',')
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad coordinate '{c}'")))
        })
        .collect()
}

fn parse_grid(text: &str) -> Result<Vec<f64>, Error> {
    parse_point(text)
}

/// Config values that may be a number or a comma string in JSON.
fn grid_from_value(v: &serde_json::Value) -> Result<Vec<f64>, Error> {
    match v {
        serde_json::Value::Number(n) => Ok(vec![n.as_f64().unwrap_or(f64::NAN)]),
        serde_json::Value::String(s) => parse_grid(s),
        serde_json::Value::Array(items) => items
            .iter()
            .map(|i| {
                i.as_f64()
                    .ok_or_else(|| Error::Parse("non-numeric grid entry".to_string()))
            })
            .collect(),
        _ => Err(Error::Parse("grid must be a number, string, or array".to_string())),
    }
}

struct Resolved {
    spec: ObjectiveSpec,
    selection: SubgradientSelection,
    seed: u64,
    x0: Option<Point>,
    out: Option<PathBuf>,
}

fn resolve_common(common: &CommonArgs, config: &FileConfig) -> Result<Resolved, Error> {
    let objective = common
        .objective
        .clone()
        .or_else(|| config.objective.clone())
        .ok_or_else(|| usage("--objective is required"))?;
    let spec = catalog_get(&objective)?;
    let seed = common.seed.or(config.seed).unwrap_or(0);
    let rule_name = common.rule.clone().or_else(|| config.rule.clone());
    let selection = match rule_name.as_deref() {
        None => SubgradientSelection::default(),
        Some(name) => {
            let rule = SelectionRule::parse(name)
                .ok_or_else(|| usage(format!("unknown selection rule '{name}'")))?;
            SubgradientSelection { rule, seed }
        }
    };
    let x0 = match common.x0.clone().or_else(|| config.x0.clone()) {
        Some(text) => Some(parse_point(&text)?),
        None => None,
    };
    let out = common
        .out
        .clone()
        .or_else(|| config.out.as_ref().map(PathBuf::from));
    Ok(Resolved {
        spec,
        selection,
        seed,
        x0,
        out,
    })
}

fn out_dir(r: &Resolved, command: &str) -> Result<PathBuf, Error> {
    let dir = match &r.out {
        Some(dir) => dir.clone(),
        None => {
            let stamp = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            PathBuf::from("runs")
                .join(command)
                .join(r.spec.id())
                .join(format!("{stamp}-{}", r.seed))
        }
    };
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Parse(format!("serialize {name}: {e}")))?;
    text.push('\n');
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn default_anchor(spec: &ObjectiveSpec) -> Point {
    spec.critical_set()
        .map(|cs| cs.anchor())
        .unwrap_or_else(|| vec![0.0; spec.dim().unwrap_or(1)])
}

fn require_x0(r: &Resolved) -> Result<Point, Error> {
    r.x0.clone()
        .ok_or_else(|| usage("--x0 is required (or provide it in --config)"))
}

fn write_trace_artifacts(
    dir: &Path,
    spec: &ObjectiveSpec,
    trace: &IterateTrace,
    stem: &str,
) -> Result<(), Error> {
    fs::write(dir.join(format!("{stem}.csv")), trace_to_csv(trace, spec))?;
    fs::write(
        dir.join(format!("{stem}.meta.json")),
        trace_metadata_json(trace, spec) + "\n",
    )?;
    Ok(())
}

fn cmd_run(args: RunArgs, config: &FileConfig) -> Result<(), Error> {
    let r = resolve_common(&args.common, config)?;
    let x0 = require_x0(&r)?;
    let method = args
        .method
        .clone()
        .or_else(|| config.method.clone())
        .unwrap_or_else(|| "sg".to_string());
    let alpha = args
        .alpha
        .or_else(|| config.alpha.as_ref().and_then(|v| v.as_f64()))
        .ok_or_else(|| usage("--alpha is required"))?;
    let iters = args.iters.or(config.iters).unwrap_or(100);

    let mut params = MethodParams::new(alpha);
    params.beta = args.beta.or(config.beta).unwrap_or(0.0);
    params.gamma = args.gamma.or(config.gamma).unwrap_or(0.0);
    if let Some(d) = args
        .delta
        .or_else(|| config.delta.as_ref().and_then(|v| v.as_f64()))
    {
        params.delta = d;
    }
    params.seed = r.seed;
    params.selection = r.selection;

    let dir = out_dir(&r, "run")?;
    let result = match method.as_str() {
        "sg" => run_subgradient(&r.spec, &x0, params, iters),
        "momentum" => run_momentum(&r.spec, &x0, &x0, params, iters),
        "rr" => run_reshuffling(&r.spec, &x0, &x0, params, iters),
        "cd" => run_cyclic_cd(&r.spec, &x0, params, iters),
        other => return Err(usage(format!("unknown method '{other}'"))),
    };
    if let Some(csv) = rpca_matrix_csv(&r.spec) {
        fs::write(dir.join("rpca_m.csv"), csv)?;
    }
    match result {
        Ok(trace) => {
            write_trace_artifacts(&dir, &r.spec, &trace, "trace")?;
            println!(
                "{}",
                serde_json::json!({
                    "out_dir": dir,
                    "iterates": trace.points.len(),
                    "final_f": trace.f_values.last(),
                })
            );
            Ok(())
        }
        Err(Error::Divergence { at, partial }) => {
            write_trace_artifacts(&dir, &r.spec, &partial, "trace")?;
            Err(Error::Divergence { at, partial })
        }
        Err(e) => Err(e),
    }
}

fn cmd_flow(args: FlowArgs, config: &FileConfig) -> Result<(), Error> {
    let r = resolve_common(&args.common, config)?;
    let x0 = require_x0(&r)?;
    let t_end = args
        .t_end
        .or(config.t_end)
        .ok_or_else(|| usage("--T is required"))?;
    let h = args.h.or(config.h).ok_or_else(|| usage("--h is required"))?;
    let c = args.c.or(config.c).unwrap_or(1.0);

    let mut params = FlowParams::new(c, h, t_end);
    if args.common.rule.is_some() || config.rule.is_some() {
        params.selection = r.selection;
    }
    let sample = integrate(&r.spec, &x0, params)?;
    let (lhs, rhs, residual) = energy_balance(&sample, &r.spec);

    let dir = out_dir(&r, "flow")?;
    fs::write(dir.join("flow.csv"), flow_to_csv(&sample, &r.spec))?;
    write_json(
        &dir,
        "flow.meta.json",
        &serde_json::json!({
            "objective": r.spec.id(),
            "params": sample.params,
            "energy_lhs": lhs,
            "energy_rhs": rhs,
            "energy_residual": residual,
        }),
    )?;
    println!(
        "{}",
        serde_json::json!({
            "out_dir": dir,
            "final_state": sample.final_state(),
            "energy_residual": residual,
        })
    );
    Ok(())
}

fn cmd_probe_local(args: ProbeLocalArgs, config: &FileConfig) -> Result<(), Error> {
    let r = resolve_common(&args.common, config)?;
    let anchor = match args.anchor.clone().or_else(|| config.anchor.clone()) {
        Some(text) => parse_point(&text)?,
        None => default_anchor(&r.spec),
    };
    let epsilon = args.epsilon.or(config.epsilon).unwrap_or(0.5);
    let mut p = StabilityProbeParams::defaults(anchor, epsilon, r.seed);
    p.selection = r.selection;
    if let Some(text) = &args.delta {
        p.delta_grid = parse_grid(text)?;
    } else if let Some(v) = &config.delta {
        p.delta_grid = grid_from_value(v)?;
    }
    if let Some(text) = &args.alpha {
        p.alpha_grid = parse_grid(text)?;
    } else if let Some(v) = &config.alpha {
        p.alpha_grid = grid_from_value(v)?;
    }
    if let Some(t) = args.trials.or(config.trials) {
        p.trials = t;
    }
    if let Some(k) = args.iters.or(config.iters) {
        p.k_steps = k;
    }

    let report = probe_local_stability(&r.spec, &p)?;
    let dir = out_dir(&r, "probe-local")?;
    write_json(&dir, "probe_local.json", &report)?;
    println!(
        "{}",
        serde_json::json!({"out_dir": dir, "verdict": report.verdict})
    );
    Ok(())
}

fn cmd_probe_global(args: ProbeGlobalArgs, config: &FileConfig) -> Result<(), Error> {
    let r = resolve_common(&args.common, config)?;
    let dim = r.spec.dim().unwrap_or(2);
    let box_text = args
        .x0_box
        .clone()
        .or_else(|| config.x0_box.clone())
        .unwrap_or_else(|| "-2,2".to_string());
    let bounds = parse_grid(&box_text)?;
    if bounds.len() != 2 {
        return Err(usage("--box expects 'lo,hi'"));
    }
    let x0_box = vec![(bounds[0], bounds[1]); dim];

    let beta = args.beta.or(config.beta).unwrap_or(0.5);
    let gamma = args.gamma.or(config.gamma).unwrap_or(0.0);
    let method = match args
        .method
        .clone()
        .or_else(|| config.method.clone())
        .unwrap_or_else(|| "sg".to_string())
        .as_str()
    {
        "sg" => GlobalMethod::Subgradient,
        "momentum" => GlobalMethod::Momentum { beta, gamma },
        "rr" => GlobalMethod::Reshuffling { beta, gamma },
        "cd" => GlobalMethod::CyclicCd,
        other => return Err(usage(format!("unknown method '{other}'"))),
    };

    let alpha_grid = match args.alpha.as_deref() {
        Some(text) => parse_grid(text)?,
        None => match &config.alpha {
            Some(v) => grid_from_value(v)?,
            None => vec![1e-3],
        },
    };
    let p = GlobalProbeParams {
        epsilon: args.epsilon.or(config.epsilon).unwrap_or(0.1),
        alpha_grid,
        trials: args.trials.or(config.trials).unwrap_or(50),
        k_steps: args.iters.or(config.iters).unwrap_or(200_000),
        seed: r.seed,
        selection: r.selection,
        method,
    };

    let report = probe_global_stability(&r.spec, &x0_box, &p)?;
    let dir = out_dir(&r, "probe-global")?;
    write_json(&dir, "probe_global.json", &report)?;
    println!(
        "{}",
        serde_json::json!({"out_dir": dir, "verdict": report.verdict})
    );
    Ok(())
}

fn cmd_probe_instability(args: ProbeInstabilityArgs, config: &FileConfig) -> Result<(), Error> {
    let r = resolve_common(&args.common, config)?;
    let x_star = r.x0.clone().unwrap_or_else(|| default_anchor(&r.spec));
    let interval = match args.alpha.as_deref() {
        Some(text) => parse_grid(text)?,
        None => match &config.alpha {
            Some(v) => grid_from_value(v)?,
            None => vec![0.05, 0.15],
        },
    };
    if interval.len() != 2 {
        return Err(usage("--alpha expects an interval 'lo,hi'"));
    }
    let p = InstabilityParams {
        epsilon: args.epsilon.or(config.epsilon).unwrap_or(0.5),
        radius0: args.radius0.or(config.radius0).unwrap_or(1e-3),
        alpha_lo: interval[0],
        alpha_hi: interval[1],
        trials: args.trials.or(config.trials).unwrap_or(5),
        k_steps: args.iters.or(config.iters).unwrap_or(10_000),
        seed: r.seed,
        selection: r.selection,
    };

    let report = probe_strong_instability(&r.spec, &x_star, &p)?;
    let dir = out_dir(&r, "probe-instability")?;
    write_json(&dir, "probe_instability.json", &report)?;
    println!(
        "{}",
        serde_json::json!({
            "out_dir": dir,
            "escape_fraction": report.escape_fraction[0][0],
        })
    );
    Ok(())
}

/// Combined output of the regularity scans; entries are absent when the
/// objective lacks the oracle a scan needs.
#[derive(Serialize)]
struct RegularityReport {
    objective: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta2_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c2_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verdier_sup_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verdier_diverging: Option<bool>,
    sharp_weak: SharpWeakReport,
    skipped: Vec<String>,
}

fn cmd_check_regularity(args: CheckRegularityArgs, config: &FileConfig) -> Result<(), Error> {
    let r = resolve_common(&args.common, config)?;
    let anchor = r.x0.clone().unwrap_or_else(|| default_anchor(&r.spec));
    let radius = args.radius.or(config.radius).unwrap_or(0.4);
    let samples = args.samples.or(config.samples).unwrap_or(2_000);

    let mut skipped = Vec::new();
    let (theta2_hat, c2_hat) =
        match fit_metric_subregularity(&r.spec, &anchor, radius, samples, r.seed) {
            Ok((t, c)) => (Some(t), Some(c)),
            Err(e) => {
                skipped.push(format!("subregularity: {e}"));
                (None, None)
            }
        };
    let (verdier_sup_ratio, verdier_diverging) =
        match verdier_ratio_scan(&r.spec, &anchor, radius, samples, r.seed) {
            Ok((sup, div)) => (Some(sup), Some(div)),
            Err(e) => {
                skipped.push(format!("verdier: {e}"));
                (None, None)
            }
        };
    let sharp_weak = sharp_weak_check(&r.spec, &anchor, radius, samples, r.seed)?;

    let report = RegularityReport {
        objective: r.spec.id().to_string(),
        theta2_hat,
        c2_hat,
        verdier_sup_ratio,
        verdier_diverging,
        sharp_weak,
        skipped,
    };
    let dir = out_dir(&r, "check-regularity")?;
    write_json(&dir, "regularity.json", &report)?;
    println!("{}", serde_json::json!({"out_dir": dir}));
    Ok(())
}

const FIGURE_IDS: [&str; 7] = [
    "fig-stable-critical",
    "fig-strict",
    "fig-goout",
    "fig-illustration-a",
    "fig-illustration-b",
    "fig-nn",
    "fig-rpca",
];

fn cmd_reproduce(args: ReproduceArgs, config: &FileConfig) -> Result<(), Error> {
    let figure = args
        .figure
        .clone()
        .or_else(|| config.figure.clone())
        .ok_or_else(|| usage(format!("--figure is required; known ids: {FIGURE_IDS:?}")))?;
    let seed = args.common.seed.or(config.seed).unwrap_or(0);
    let dir = match args
        .common
        .out
        .clone()
        .or_else(|| config.out.as_ref().map(PathBuf::from))
    {
        Some(dir) => dir,
        None => {
            let stamp = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            PathBuf::from("runs")
                .join("reproduce")
                .join(&figure)
                .join(format!("{stamp}-{seed}"))
        }
    };
    fs::create_dir_all(&dir)?;

    match figure.as_str() {
        "fig-stable-critical" => reproduce_stable_critical(&dir, seed),
        "fig-strict" => reproduce_strict(&dir, seed),
        "fig-goout" => reproduce_goout(&dir, seed),
        "fig-illustration-a" => reproduce_illustration_a(&dir, seed),
        "fig-illustration-b" => reproduce_illustration_b(&dir, seed),
        "fig-nn" => reproduce_nn(&dir, seed),
        "fig-rpca" => reproduce_rpca(&dir, seed),
        other => {
            return Err(usage(format!(
                "unknown figure id '{other}'; known ids: {FIGURE_IDS:?}"
            )))
        }
    }?;
    println!("{}", serde_json::json!({"out_dir": dir}));
    Ok(())
}

fn write_summary(dir: &Path, text: &str) -> Result<(), Error> {
    fs::write(dir.join("summary.txt"), text)?;
    Ok(())
}

fn reproduce_stable_critical(dir: &Path, _seed: u64) -> Result<(), Error> {
    let spec = catalog_get("sin_example")?;
    let mut params = MethodParams::new(0.01);
    params.selection = SubgradientSelection::default();
    let trace = run_subgradient(&spec, &[-0.01], params, 100)?;
    write_trace_artifacts(dir, &spec, &trace, "trace")?;
    let table = crate::analysis::sin_critical_points(8);
    fs::write(dir.join("critical_points.csv"), table.to_csv())?;
    write_summary(
        dir,
        "Stable critical point of f(x) = x^2 sin(1/x).\n\
         trace.csv: 100 subgradient iterates with alpha = 0.01 from x0 = -0.01;\n\
         all iterates stay within 0.07 of the origin (they settle into a\n\
         two-cycle around the critical point 1/t_4 = 0.0583) although 0 is\n\
         neither a local minimum nor a local maximum. critical_points.csv\n\
         lists the\n\
         nearby critical points 1/t_k (roots of tan t = t/2) with the sign of\n\
         f'' at each, which alternate minima and maxima accumulating at 0.\n",
    )
}

fn reproduce_strict(dir: &Path, seed: u64) -> Result<(), Error> {
    let spec = catalog_get("strict2d")?;
    let p = StabilityProbeParams::defaults(vec![0.0, 0.0], 0.5, seed);
    let report = probe_local_stability(&spec, &p)?;
    write_json(dir, "probe_local.json", &report)?;
    let mut rows = String::from("t,x_0,x_1,after_one_step_norm\n");
    for i in 0..=20 {
        let t = 0.999 * i as f64 / 20.0;
        let (start, after) = probe_boundary_exit_strict2d(1.0, 0.1, t)?;
        rows.push_str(&format!("{t},{},{},{after}\n", start[0], start[1]));
    }
    fs::write(dir.join("boundary_exit.csv"), rows)?;
    write_summary(
        dir,
        "Strict local minimum of a piecewise-quadratic max function.\n\
         probe_local.json: local-stability probe at the origin over a\n\
         (delta, alpha) grid; the strict minimum yields zero escapes.\n\
         boundary_exit.csv: start points along the segment toward the\n\
         epsilon = 1 sphere with one alpha = 0.1 subgradient step each; the\n\
         step norm exceeds 1 as t -> 1, so the stability radius delta must\n\
         be strictly smaller than epsilon.\n",
    )
}

fn reproduce_goout(dir: &Path, seed: u64) -> Result<(), Error> {
    let spec = catalog_get("strict2d")?;
    let mut rows = String::from("trial,alpha,x0_0,x0_1,max_norm,final_f\n");
    for trial in 0..100u64 {
        let mut g = SplitMix64::stream(seed, 0x900 + trial);
        let alpha = g.uniform(0.005, 0.2);
        let x0 = g.in_ball(&[0.0, 0.0], 1.0);
        let mut params = MethodParams::new(alpha);
        params.selection = SubgradientSelection::default();
        let trace = run_subgradient(&spec, &x0, params, 10_000)?;
        let max_norm = trace.points.iter().map(|p| norm(p)).fold(0.0f64, f64::max);
        rows.push_str(&format!(
            "{trial},{alpha},{},{},{max_norm},{}\n",
            x0[0],
            x0[1],
            trace.f_values.last().unwrap()
        ));
    }
    fs::write(dir.join("goout.csv"), rows)?;
    write_summary(
        dir,
        "Excursion statistics around a strict local minimum.\n\
         goout.csv: 100 subgradient trials from the unit ball with step\n\
         sizes drawn uniformly from [0.005, 0.2]; max_norm records how far\n\
         each run travels before settling. Larger steps may leave the\n\
         initial ball transiently even though the origin is stable in the\n\
         small-step limit.\n",
    )
}

fn reproduce_illustration_a(dir: &Path, seed: u64) -> Result<(), Error> {
    let l1 = catalog_get("global_l1")?;
    let pow = catalog_get("global_pow32")?;
    let x0 = vec![1.6, -1.2];

    let mut momentum = MethodParams::new(1e-3 * 0.5);
    momentum.beta = 0.5;
    momentum.seed = seed;
    let trace = run_momentum(&l1, &x0, &x0, momentum, 20_000)?;
    write_trace_artifacts(dir, &l1, &trace, "sg_momentum")?;

    let mut rr = MethodParams::new(1e-3 / 3.0);
    rr.beta = 0.5;
    rr.seed = seed;
    let trace = run_reshuffling(&l1, &x0, &x0, rr, 7_000)?;
    write_trace_artifacts(dir, &l1, &trace, "rr_momentum")?;

    let mut cd = MethodParams::new(1e-2);
    cd.seed = seed;
    let trace = run_cyclic_cd(&pow, &x0, cd, 10_000)?;
    write_trace_artifacts(dir, &pow, &trace, "cyclic_cd_pow32")?;

    let sample = integrate(&l1, &x0, FlowParams::new(1.0, 1e-3, 20.0))?;
    fs::write(dir.join("flow.csv"), flow_to_csv(&sample, &l1))?;
    write_summary(
        dir,
        "Method iterates against the subgradient flow on a piecewise-linear\n\
         two-dimensional objective. sg_momentum.csv and rr_momentum.csv run\n\
         momentum and random-reshuffling-with-momentum on the l1 objective\n\
         (steps scaled by (1 - beta) and 1/N respectively); the cyclic\n\
         coordinate-descent trace uses the C^1 power-3/2 variant of the same\n\
         objective, since coordinate descent requires a gradient oracle.\n\
         flow.csv integrates the min-norm subgradient flow from the same\n\
         start; all four paths approach critical points of their objective.\n",
    )
}

fn reproduce_illustration_b(dir: &Path, seed: u64) -> Result<(), Error> {
    let spec = catalog_get("global_l1")?;
    let p = GlobalProbeParams {
        epsilon: 0.1,
        alpha_grid: vec![1e-3],
        trials: 20,
        k_steps: 100_000,
        seed,
        selection: SubgradientSelection::default(),
        method: GlobalMethod::Subgradient,
    };
    let report = probe_global_stability(&spec, &[(-2.0, 2.0), (-2.0, 2.0)], &p)?;
    write_json(dir, "probe_global.json", &report)?;
    write_summary(
        dir,
        "Global stability of the critical set. probe_global.json: 20\n\
         subgradient runs with alpha = 1e-3 from the box [-2, 2]^2; for each\n\
         run the tail (last 20% of iterates) has f-value oscillation and\n\
         min-norm-subgradient proxy within 0.1, i.e. the iterates stabilize\n\
         around a critical point.\n",
    )
}

fn reproduce_nn(dir: &Path, seed: u64) -> Result<(), Error> {
    let spec = catalog_get("relu_net")?;
    let p = InstabilityParams {
        epsilon: 0.5,
        radius0: 1e-3,
        alpha_lo: 0.05,
        alpha_hi: 0.15,
        trials: 5,
        k_steps: 10_000,
        seed,
        selection: SubgradientSelection::default(),
    };
    let report = probe_strong_instability(&spec, &[1.0, 1.0, 0.0], &p)?;
    write_json(dir, "probe_instability.json", &report)?;
    write_summary(
        dir,
        "Escape from a spurious local minimum of a small ReLU network\n\
         objective. probe_instability.json: 5 trials with step sizes uniform\n\
         in [0.05, 0.15] starting within 1e-3 of (1, 1, 0); every trial\n\
         leaves the 0.5-ball. Each trial's ledger certifies the per-step\n\
         identity C(x_{k+1}) - C(x_k) = alpha*|x3_k| for the Chetaev\n\
         function C(x) = 1 - x1 while iterates remain in the certified\n\
         neighborhood.\n",
    )
}

fn reproduce_rpca(dir: &Path, seed: u64) -> Result<(), Error> {
    let spec = catalog_get("rpca_l1")?;
    if let Some(csv) = rpca_matrix_csv(&spec) {
        fs::write(dir.join("rpca_m.csv"), csv)?;
    }
    let anchor = default_anchor(&spec);
    let mut ledger_summaries = Vec::new();
    for trial in 0..5u64 {
        let mut g = SplitMix64::stream(seed, 0xabc + trial);
        let alpha = g.uniform(0.01, 0.05);
        let x0 = g.in_ball(&anchor, 1e-3 * (1.0 + norm(&anchor)));
        let mut params = MethodParams::new(alpha);
        params.seed = seed;
        let trace = run_subgradient(&spec, &x0, params, 2_000)?;
        write_trace_artifacts(dir, &spec, &trace, &format!("trace_{trial}"))?;
        let ledger = chetaev_increment_check(&trace, &spec)?;
        ledger_summaries.push(serde_json::json!({
            "trial": trial,
            "alpha": alpha,
            "steps": ledger.residuals.len(),
            "min_slack": ledger.min_slack,
            "truncated_at": ledger.truncated_at,
        }));
    }
    write_json(dir, "chetaev_ledgers.json", &ledger_summaries)?;
    write_summary(
        dir,
        "Escape from the spurious critical point of a synthetic robust-PCA\n\
         factorization objective f(X, Y) = |X Y^T - M|_1 (a generated 20x12\n\
         instance, rank 2 plus 5% outliers, first three rows of M zero;\n\
         rpca_m.csv holds M). trace_0..4.csv: subgradient runs with step\n\
         sizes uniform in [0.01, 0.05] from within 1e-3 of the spurious\n\
         point (X*, 0); the C column tracks the Chetaev function, which\n\
         increases until the iterates leave the certified neighborhood, and\n\
         the f column eventually drops below |M|_1. chetaev_ledgers.json\n\
         summarizes the per-step increment lower bound for each run.\n",
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::methods::replay_check;
    use crate::trace_io::{parse_trace_csv, rebuild_subgradient_trace};

    fn run_in(dir: &Path, args: &[&str]) -> i32 {
        let out = dir.to_str().unwrap();
        let mut argv = vec!["subgradlab"];
        argv.extend_from_slice(args);
        argv.push("--out");
        argv.push(out);
        main_with_args(argv)
    }

    #[test]
    fn run_writes_replayable_trace() {
        let tmp = tempfile::tempdir().unwrap();
        let code = run_in(
            tmp.path(),
            &[
                "run",
                "--objective",
                "abs1d",
                "--method",
                "sg",
                "--alpha",
                "0.3",
                "--x0",
                "1.0",
                "--iters",
                "4",
            ],
        );
        assert_eq!(code, 0);
        let csv = fs::read_to_string(tmp.path().join("trace.csv")).unwrap();
        assert_eq!(csv.lines().count(), 6);
        let parsed = parse_trace_csv(&csv).unwrap();
        let spec = catalog_get("abs1d").unwrap();
        let rebuilt = rebuild_subgradient_trace(&spec, MethodParams::new(0.3), parsed.points);
        assert!(replay_check(&rebuilt));
        assert!(tmp.path().join("trace.meta.json").exists());
    }

    #[test]
    fn identical_commands_write_identical_bytes() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let args = [
            "run",
            "--objective",
            "global_l1",
            "--alpha",
            "0.01",
            "--x0",
            "1.5,-0.5",
            "--iters",
            "50",
            "--seed",
            "9",
        ];
        assert_eq!(run_in(a.path(), &args), 0);
        assert_eq!(run_in(b.path(), &args), 0);
        for name in ["trace.csv", "trace.meta.json"] {
            assert_eq!(
                fs::read(a.path().join(name)).unwrap(),
                fs::read(b.path().join(name)).unwrap(),
                "{name} differs"
            );
        }
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(main_with_args(["subgradlab", "run"]), 1);
        assert_eq!(
            main_with_args(["subgradlab", "run", "--objective", "nope", "--alpha", "0.1"]),
            1
        );
        let tmp = tempfile::tempdir().unwrap();
        assert_eq!(
            run_in(tmp.path(), &["reproduce", "--figure", "fig-unknown"]),
            1
        );
    }

    #[test]
    fn divergent_run_exits_two_with_partial_trace() {
        let tmp = tempfile::tempdir().unwrap();
        let code = run_in(
            tmp.path(),
            &[
                "run",
                "--objective",
                "quad",
                "--alpha",
                "3.0",
                "--x0",
                "1.0",
                "--iters",
                "200",
            ],
        );
        assert_eq!(code, 2);
        assert!(tmp.path().join("trace.csv").exists());
    }

    #[test]
    fn config_supplies_defaults_and_flags_override() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = tmp.path().join("cfg.json");
        fs::write(
            &cfg,
            r#"{"objective":"abs1d","alpha":0.3,"x0":"1.0","iters":4,"method":"sg"}"#,
        )
        .unwrap();
        let out_a = tmp.path().join("a");
        let code = main_with_args([
            "subgradlab",
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_a.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let csv_a = fs::read_to_string(out_a.join("trace.csv")).unwrap();
        assert_eq!(csv_a.lines().count(), 6);

        let out_b = tmp.path().join("b");
        let code = main_with_args([
            "subgradlab",
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--iters",
            "2",
            "--out",
            out_b.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let csv_b = fs::read_to_string(out_b.join("trace.csv")).unwrap();
        assert_eq!(csv_b.lines().count(), 4);
    }

    #[test]
    fn flow_reaches_the_exponential_decay_value() {
        let tmp = tempfile::tempdir().unwrap();
        let code = run_in(
            tmp.path(),
            &[
                "flow",
                "--objective",
                "quad",
                "--x0",
                "1",
                "--T",
                "1",
                "--h",
                "1e-4",
            ],
        );
        assert_eq!(code, 0);
        let csv = fs::read_to_string(tmp.path().join("flow.csv")).unwrap();
        let parsed = parse_trace_csv(&csv).unwrap();
        let last = parsed.points.last().unwrap()[0];
        assert!((last - 0.36788).abs() < 1e-4, "final state {last}");
    }

    #[test]
    fn probe_instability_cli_reports_full_escape() {
        let tmp = tempfile::tempdir().unwrap();
        let code = run_in(
            tmp.path(),
            &[
                "probe-instability",
                "--objective",
                "relu_net",
                "--trials",
                "5",
                "--seed",
                "1",
            ],
        );
        assert_eq!(code, 0);
        let json: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(tmp.path().join("probe_instability.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(json["escape_fraction"][0][0], 1.0);
    }

    #[test]
    fn probe_local_cli_on_abs1d() {
        let tmp = tempfile::tempdir().unwrap();
        let code = run_in(
            tmp.path(),
            &[
                "probe-local",
                "--objective",
                "abs1d",
                "--epsilon",
                "0.1",
                "--trials",
                "5",
                "--iters",
                "500",
            ],
        );
        assert_eq!(code, 0);
        let json: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(tmp.path().join("probe_local.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(json["verdict"], "stable_evidence");
    }

    #[test]
    fn check_regularity_cli_on_verdier_ok() {
        let tmp = tempfile::tempdir().unwrap();
        let code = run_in(
            tmp.path(),
            &[
                "check-regularity",
                "--objective",
                "verdier_ok",
                "--samples",
                "500",
            ],
        );
        assert_eq!(code, 0);
        let json: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(tmp.path().join("regularity.json")).unwrap(),
        )
        .unwrap();
        assert!(json["verdier_sup_ratio"].as_f64().unwrap() <= 1.0 + 1e-6);
    }

    #[test]
    fn reproduce_stable_critical_artifacts() {
        let tmp = tempfile::tempdir().unwrap();
        let code = run_in(
            tmp.path(),
            &["reproduce", "--figure", "fig-stable-critical"],
        );
        assert_eq!(code, 0);
        let csv = fs::read_to_string(tmp.path().join("trace.csv")).unwrap();
        assert_eq!(csv.lines().count(), 102);
        let parsed = parse_trace_csv(&csv).unwrap();
        assert!(parsed.points.iter().all(|p| p[0].abs() <= 0.07));
        assert!(tmp.path().join("summary.txt").exists());
        assert!(tmp.path().join("critical_points.csv").exists());
    }
}

//! `netdiff`: gain certification, simulation, threshold sweeps and kernel checks.

// `!(x > 0.0)` is how NaN gets rejected; index loops mirror the maths.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

mod config;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use netdiff_core::gains::{certify, k1_lower_bound, synthesize_k0, SearchOptions};
use netdiff_core::kernel::{potential_gradient, sign_selection};
use netdiff_core::properties::{run_properties, KernelFns, PropertyConfig, PROPERTY_NAMES};
use netdiff_core::signals::{check_assumption, uniform_grid, AssumptionReport};
use netdiff_core::sim::{self, RunMetrics, Trace, Variant};
use netdiff_core::trigger::{inter_event_stats, InterEventStats};
use netdiff_core::{integrate, Coupling, GainSet, GraphSpec, SignalSource, ThresholdRule};
use serde::Serialize;

use config::{parse_deltas, parse_trigger, ExperimentConfig};

/// Bad invocation, reported with exit code 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

#[derive(Parser)]
#[command(name = "netdiff", version, about = "Distributed differentiation over networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify a gain set and print every constant as JSON.
    Gains(GainsArgs),
    /// Run an experiment and write traces, events and metrics.
    Simulate(SimulateArgs),
    /// Sweep constant thresholds over repeated runs.
    Sweep(SweepArgs),
    /// Run the kernel property suite.
    Check(CheckArgs),
}

#[derive(Args)]
struct GainsArgs {
    /// `ring:N`, `path:N`, `complete:N` or a JSON graph file.
    #[arg(long)]
    graph: String,
    #[arg(long)]
    k1: f64,
    /// Defaults to 1.1 times the computed lower bound.
    #[arg(long)]
    k0: Option<f64>,
    #[arg(long, default_value_t = 7.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 4.0)]
    l: f64,
    #[arg(long, env = "NETDIFF_SEED", default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct Source {
    /// Experiment JSON file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// `paper-fig1` or `paper-fig2`.
    #[arg(long)]
    preset: Option<String>,
    /// Overrides the configured seed.
    #[arg(long, env = "NETDIFF_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Source {
    fn load(&self, default_preset: Option<&str>) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, self.preset.as_deref().or(default_preset)) {
            (Some(p), _) => ExperimentConfig::load(p)?,
            (None, Some(name)) => ExperimentConfig::preset(name).map_err(|e| Usage(e.to_string()))?,
            (None, None) => return usage("give --config FILE or --preset NAME"),
        };
        if let Some(seed) = self.seed {
            cfg.sim.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: Source,
    /// `none`, `constant:D`, `vanishing:D:Q:P` or `state:D:S`; replaces the configured rules.
    #[arg(long)]
    trigger: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// `redcho` or `derivative-free`.
    #[arg(long)]
    variant: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,
    /// `start:end:count` or a comma-separated list.
    #[arg(long)]
    deltas: String,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Adds a `c1 √δ` column; defaults to the configured value.
    #[arg(long)]
    c1: Option<f64>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, default_value = "ring:5")]
    graph: String,
    /// Comma-separated subset of the property names.
    #[arg(long, value_delimiter = ',')]
    only: Vec<String>,
    #[arg(long, default_value_t = 500)]
    samples: usize,
    #[arg(long, env = "NETDIFF_SEED", default_value_t = 1)]
    seed: u64,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
    /// Replace a kernel function by a wrong-sign version (suite self-test).
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gains(a) => cmd_gains(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Check(a) => cmd_check(a),
    };
    match result {
        Ok(code) => code,
        Err(e) if e.downcast_ref::<Usage>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn graph_arg(arg: &str) -> Result<netdiff_core::Graph> {
    let spec = GraphSpec::from_arg(arg).map_err(|e| Usage(e.to_string()))?;
    Ok(spec.build()?)
}

fn cmd_gains(a: GainsArgs) -> Result<ExitCode> {
    let g = graph_arg(&a.graph)?;
    let cp = Coupling::from_graph(&g)?;
    let opts = SearchOptions { seed: a.seed, ..Default::default() };
    let k1_lower = k1_lower_bound(&g)?;
    if !(a.k1 > k1_lower) {
        eprintln!("k1 = {} must exceed 1/sqrt(lambda_2) = {k1_lower}", a.k1);
        return Ok(ExitCode::from(1));
    }
    let k0 = match a.k0 {
        Some(v) => v,
        None => synthesize_k0(&cp, a.k1, a.beta, 1.1, &opts)?,
    };
    let gains = GainSet::new(k0, a.k1, a.gamma, a.l, a.beta).map_err(|e| Usage(e.to_string()))?;
    match certify(&cp, &gains, &opts) {
        Ok(c) => {
            println!("{}", serde_json::to_string_pretty(&c)?);
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            eprintln!("gains ({k0}, {}) not certified on {}: {e}", a.k1, a.graph);
            Ok(ExitCode::from(1))
        }
    }
}

#[derive(Serialize)]
struct RunReport {
    regime: String,
    rule: Option<ThresholdRule>,
    metrics: RunMetrics,
    /// Windows of one second.
    inter_event: Option<InterEventStats>,
    lyapunov_increases: Option<usize>,
}

#[derive(Serialize)]
struct SimulationReport {
    gains: GainSet,
    assumption: AssumptionReport,
    runs: Vec<RunReport>,
}

fn unique_label(used: &mut BTreeSet<String>, base: &str) -> String {
    let mut label = base.to_string();
    let mut k = 2;
    while !used.insert(label.clone()) {
        label = format!("{base}_{k}");
        k += 1;
    }
    label
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(cfg)? + "\n")?;
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Result<ExitCode> {
    let mut cfg = a.source.load(None)?;
    if let Some(t) = &a.trigger {
        cfg.triggers = parse_trigger(t).map_err(|e| Usage(e.to_string()))?.into_iter().collect();
    }
    if let Some(dt) = a.dt {
        cfg.sim.dt = dt;
    }
    if let Some(h) = a.horizon {
        cfg.sim.horizon = h;
    }
    if let Some(v) = &a.variant {
        cfg.sim.variant = match v.as_str() {
            "redcho" => Variant::Redcho,
            "derivative-free" => Variant::DerivativeFree,
            other => return usage(format!("unknown variant `{other}`")),
        };
    }
    cfg.sim.validate().map_err(|e| Usage(e.to_string()))?;

    let g = cfg.graph.build()?;
    if cfg.signals.n_agents() != g.n_agents() {
        return usage(format!("{} signals for {} agents", cfg.signals.n_agents(), g.n_agents()));
    }
    let gains = cfg.gains.resolve(&g, cfg.sim.seed)?;
    let out = cfg.output.clone();
    write_config(&out, &cfg)?;
    let assumption = check_assumption(&cfg.signals, gains.gamma, gains.l, &uniform_grid(cfg.sim.horizon, 1e-3))?;
    if !assumption.satisfied {
        eprintln!(
            "note: the signal mismatch needs L >= {:.3} on the grid; the run uses L = {}",
            assumption.l_required, gains.l
        );
    }

    let rules: Vec<Option<ThresholdRule>> =
        if cfg.triggers.is_empty() { vec![None] } else { cfg.triggers.iter().copied().map(Some).collect() };
    let cp = Coupling::from_graph(&g)?;
    let mut used = BTreeSet::new();
    let mut runs: Vec<(String, Trace)> = Vec::new();
    let mut reports = Vec::new();
    for rule in &rules {
        let label = unique_label(&mut used, rule.as_ref().map_or("ideal", |r| r.label()));
        let tr = integrate(&g, &cfg.signals, &gains, rule.as_ref(), &cfg.sim)?;
        let monitor = (cfg.monitor_every > 0 && cfg.sim.variant == Variant::Redcho && !tr.t.is_empty())
            .then(|| sim::lyapunov_monitor(&cp, &tr, &gains, cfg.monitor_every, 1e-3, 1e-6))
            .transpose()?;
        if !tr.t.is_empty() {
            sim::write_trace_csv(&out.join(format!("trace_{label}.csv")), &tr, monitor.as_ref())?;
            let bound = cfg.c1.zip(rule.as_ref()).map(|(c1, r)| c1 * r.delta().sqrt());
            sim::write_figure1_csv(&out.join(format!("figure1_{label}.csv")), &tr, bound)?;
        }
        if rule.is_some() {
            sim::write_events_csv(&out.join(format!("events_{label}.csv")), &tr)?;
        }
        println!(
            "{label}: steady-state error {:.4}, event fraction {:.4}, epsilon violations {}",
            tr.metrics.steady_state_error, tr.metrics.event_fraction, tr.metrics.epsilon_violations
        );
        reports.push(RunReport {
            regime: label.clone(),
            rule: *rule,
            metrics: tr.metrics.clone(),
            inter_event: rule.is_some().then(|| inter_event_stats(&tr.channels, cfg.sim.horizon, cfg.sim.dt, 1.0)),
            lyapunov_increases: monitor.map(|m| m.increases.len()),
        });
        runs.push((label, tr));
    }
    let triggered: Vec<(&str, &Trace)> = runs
        .iter()
        .zip(&rules)
        .filter(|(r, rule)| rule.is_some() && !r.1.t.is_empty())
        .map(|((l, t), _)| (l.as_str(), t))
        .collect();
    if !triggered.is_empty() {
        sim::write_figure2_csv(&out.join("figure2.csv"), &triggered, 1.0)?;
    }
    let report = SimulationReport { gains, assumption, runs: reports };
    fs::write(out.join("metrics.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(a: SweepArgs) -> Result<ExitCode> {
    let mut cfg = a.source.load(Some("paper-fig1"))?;
    let deltas = parse_deltas(&a.deltas).map_err(|e| Usage(e.to_string()))?;
    if a.reps == 0 {
        return usage("--reps must be at least 1");
    }
    if a.source.out.is_none() {
        cfg.output = cfg.output.join("sweep");
    }
    cfg.sim.validate().map_err(|e| Usage(e.to_string()))?;
    let g = cfg.graph.build()?;
    let gains = cfg.gains.resolve(&g, cfg.sim.seed)?;
    let c1 = a.c1.or(cfg.c1);
    write_config(&cfg.output, &cfg)?;
    let rows = sim::sweep_delta(&g, &cfg.signals, &gains, &cfg.sim, &deltas, a.reps, cfg.sim.seed)?;
    let summary = sim::summarize_sweep(&rows, c1);
    sim::write_sweep_csv(&cfg.output.join("sweep.csv"), &rows)?;
    sim::write_sweep_summary_csv(&cfg.output.join("sweep_summary.csv"), &summary)?;
    println!("delta,max_sse,mean_event_fraction,bound");
    for s in &summary {
        let bound = s.bound.map(|b| b.to_string()).unwrap_or_default();
        println!("{},{},{},{bound}", s.delta, s.max_sse, s.mean_event_fraction);
    }
    Ok(ExitCode::SUCCESS)
}

fn flipped_gradient(cp: &Coupling, x: &[f64]) -> netdiff_core::Result<Vec<f64>> {
    Ok(potential_gradient(cp, x)?.iter().map(|v| -v).collect())
}

fn flipped_selection(cp: &Coupling, x: &[f64]) -> netdiff_core::Result<Vec<f64>> {
    Ok(sign_selection(cp, x)?.iter().map(|v| -v).collect())
}

fn cmd_check(a: CheckArgs) -> Result<ExitCode> {
    let g = graph_arg(&a.graph)?;
    let cp = Coupling::from_graph(&g)?;
    if let Some(bad) = a.only.iter().find(|n| !PROPERTY_NAMES.contains(&n.as_str())) {
        return usage(format!("unknown property `{bad}`; expected one of {}", PROPERTY_NAMES.join(", ")));
    }
    let fns = match a.inject_fault.as_deref() {
        None => KernelFns::default(),
        Some("flipped-gradient") => KernelFns { gradient: flipped_gradient, ..Default::default() },
        Some("flipped-selection") => KernelFns { selection: flipped_selection, ..Default::default() },
        Some(other) => return usage(format!("unknown fault `{other}`")),
    };
    let cfg = PropertyConfig { seed: a.seed, samples: a.samples, cs_samples: 2 * a.samples, ..Default::default() };
    let out = run_properties(&cp, &fns, &cfg, &a.only)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        for o in &out {
            println!("{:<12} {} ({} checks)", o.name, if o.passed { "pass" } else { "FAIL" }, o.checked);
            if let Some(c) = &o.counterexample {
                println!("  counterexample: {c}");
            }
        }
    }
    Ok(if out.iter().all(|o| o.passed) { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

//! Command-line front end for the chainwave toolkit.
//!
//! Subcommands cover the whole pipeline:
//!
//! - `stationary` — endorsement-chain stationary sweeps and amplification curves
//! - `simulate` — one seeded experiment run, persisted as a trace CSV
//! - `fit` — hierarchical psychometric model fit on a judgment CSV
//! - `resample` — importance resampling of judgment sets for a recipient panel
//! - `analyze` — condition summaries, LR tests, and plot data from a trace
//! - `power` — multi-simulation directional power analysis
//!
//! Every command writes its outputs into `--out-dir` together with
//! `config_resolved.json` (the fully resolved configuration it ran under)
//! and `manifest.json` (toolkit version, master seed, per-stage sub-seeds,
//! config digest, and a SHA-256 inventory of every output file). Reruns
//! with identical inputs and seed are byte-identical except for the
//! manifest timestamp. `--threads` is a parallelism hint only; results
//! are scheduling-independent.
//!
//! Exit codes: 0 success, 2 config error (bad flags, config files, or
//! input values), 3 runtime/convergence error, 4 I/O or parse error.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use chainwave::chain::{
    amplification_curve, default_beta_grid, stationary_sweep, DEFAULT_ALPHAS,
};
use chainwave::error::{Error, Result};
use chainwave::exec::{self, ExecMode};
use chainwave::inference::{
    fit_posterior, InferenceDataset, InferenceRow, McmcConfig, ModelSpec, ModelVariant,
    NutsOptions,
};
use chainwave::judgment::Color;
use chainwave::manifest::{sha256_hex, RunManifest};
use chainwave::plot::{emit_plot_data, PlotKind, PlotSource};
use chainwave::resample::{
    normalize_weights, presented_signal, resample_for_recipient, JudgmentRecord, JudgmentSet,
    WeightVector,
};
use chainwave::seed::{self, tag};
use chainwave::sim::{
    build_experiment, default_hypotheses, run_experiment, run_power_analysis, ExperimentConfig,
    RunOptions,
};
use chainwave::stats::{
    compare_conditions, condition_summaries, priming_test, tie_trial_rows, TracePartition,
};
use chainwave::trace::{load_trace, persist_trace, Condition};

/// Biased-judgment transmission chains: simulation, inference, and mitigation.
#[derive(Parser)]
#[command(name = "chainwave", version, about)]
struct Cli {
    /// Master seed override (defaults to the config seed; 0 for commands
    /// without a config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory receiving all output files and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Worker-thread hint; outputs are identical for any thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stationary distributions and amplification curves of the endorsement chain.
    Stationary(StationaryArgs),
    /// Simulate one experiment and persist its trace.
    Simulate(SimulateArgs),
    /// Fit the hierarchical psychometric model to a judgment CSV.
    Fit(FitArgs),
    /// Importance-resample judgment sets for a panel of recipients.
    Resample(ResampleArgs),
    /// Condition summaries, LR tests, and plot data from a trace.
    Analyze(AnalyzeArgs),
    /// Multi-simulation directional power analysis.
    Power(PowerArgs),
}

#[derive(Args)]
struct StationaryArgs {
    /// Social weight; repeat for several curves (default: 0, 0.25, 0.5, 1).
    #[arg(long = "alpha", value_name = "ALPHA", allow_negative_numbers = true)]
    alphas: Vec<f64>,

    /// Prior log-odds toward green; repeat for a custom grid
    /// (default: -3..3 in steps of 0.1).
    #[arg(long = "beta", value_name = "BETA", allow_negative_numbers = true)]
    betas: Vec<f64>,

    /// Stimulus log-likelihood ratio shared across the sweep.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    gamma: f64,

    /// Group size (the chain ranges over 0..=n endorsements).
    #[arg(long, default_value_t = 8)]
    set_size: u32,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON experiment config.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,

    /// Built-in experiment design.
    #[arg(long, value_enum)]
    preset: Option<Preset>,

    /// Run the color-exchanged mirror of the configured experiment.
    #[arg(long)]
    mirror: bool,
}

#[derive(Args)]
struct FitArgs {
    /// Judgment CSV with columns participant_id, stimulus_level,
    /// chose_green, motivated_color, social_k (blank when asocial).
    #[arg(long)]
    data: PathBuf,

    /// Model variant to fit.
    #[arg(long, value_enum)]
    variant: VariantArg,

    /// Independent MCMC chains.
    #[arg(long, default_value_t = 4)]
    chains: u32,

    /// Iterations per chain, warmup included.
    #[arg(long, default_value_t = 1000)]
    iterations: u32,

    /// Warmup iterations discarded from each chain.
    #[arg(long, default_value_t = 500)]
    warmup: u32,

    /// Social set size n (for centering social_k as k - n/2).
    #[arg(long, default_value_t = 8)]
    set_size: u32,
}

#[derive(Args)]
struct ResampleArgs {
    /// Judgment-set CSV with columns participant_id, stimulus_id,
    /// chose_green, q_green, p_green.
    #[arg(long)]
    sets: PathBuf,

    /// Number of recipients, each with an independent resampling stream.
    #[arg(long, default_value_t = 8)]
    recipients: u32,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Trace CSV produced by `simulate`.
    #[arg(long)]
    trace: PathBuf,

    /// Row partition for the summary tables (condition tests always use
    /// the full trace).
    #[arg(long, value_enum, default_value_t = PartitionArg::All)]
    partition: PartitionArg,
}

#[derive(Args)]
struct PowerArgs {
    /// JSON experiment config.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,

    /// Built-in experiment design.
    #[arg(long, value_enum)]
    preset: Option<Preset>,

    /// Number of simulated experiments.
    #[arg(long, default_value_t = 20)]
    n_sims: u32,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// First experiment: asocial and social motivated conditions.
    Exp1,
    /// Second experiment: adds the social resampling condition.
    Exp2,
    /// Reduced-scale variant of the second experiment.
    Desk,
}

impl Preset {
    fn config(self) -> ExperimentConfig {
        match self {
            Preset::Exp1 => ExperimentConfig::exp1(),
            Preset::Exp2 => ExperimentConfig::exp2(),
            Preset::Desk => ExperimentConfig::desk(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    /// No social covariate.
    Exp1Asocial,
    /// Adds the weight on the centered observed green count.
    Exp1Social,
    /// Resampling-pipeline variant: no social weight, tighter gamma prior.
    Resampling,
}

impl VariantArg {
    fn model(self) -> ModelVariant {
        match self {
            VariantArg::Exp1Asocial => ModelVariant::Exp1Asocial,
            VariantArg::Exp1Social => ModelVariant::Exp1Social,
            VariantArg::Resampling => ModelVariant::Resampling,
        }
    }

    fn name(self) -> &'static str {
        match self {
            VariantArg::Exp1Asocial => "exp1_asocial",
            VariantArg::Exp1Social => "exp1_social",
            VariantArg::Resampling => "resampling",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PartitionArg {
    All,
    MatchedOnly,
    NonmatchedOnly,
    TieTrialsOnly,
}

impl PartitionArg {
    fn partition(self) -> TracePartition {
        match self {
            PartitionArg::All => TracePartition::All,
            PartitionArg::MatchedOnly => TracePartition::MatchedOnly,
            PartitionArg::NonmatchedOnly => TracePartition::NonmatchedOnly,
            PartitionArg::TieTrialsOnly => TracePartition::TieTrialsOnly,
        }
    }
}

/// Shared command context: global flags plus the execution mode.
struct Ctx {
    seed: Option<u64>,
    out_dir: PathBuf,
    mode: ExecMode,
}

impl Ctx {
    fn master_seed(&self, default: u64) -> u64 {
        self.seed.unwrap_or(default)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        exec::configure_threads(threads);
    }
    let ctx = Ctx { seed: cli.seed, out_dir: cli.out_dir, mode: ExecMode::default() };
    let result = match cli.command {
        Command::Stationary(args) => cmd_stationary(&args, &ctx),
        Command::Simulate(args) => cmd_simulate(&args, &ctx),
        Command::Fit(args) => cmd_fit(&args, &ctx),
        Command::Resample(args) => cmd_resample(&args, &ctx),
        Command::Analyze(args) => cmd_analyze(&args, &ctx),
        Command::Power(args) => cmd_power(&args, &ctx),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// Exit-code classes: bad configuration or arguments are 2, I/O and parse
/// failures are 4, and everything else (convergence, rank deficiency,
/// invalid datasets, sequencing) is a runtime error, 3.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::InvalidArgument(_) => 2,
        Error::Io { .. } | Error::Parse { .. } => 4,
        _ => 3,
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

/// Writer that pairs every output file with its manifest record, so no
/// file can be written without being inventoried.
struct Outputs {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Outputs {
    fn new(dir: &Path, master_seed: u64, canonical_config: &str) -> Result<Outputs> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let mut outputs =
            Outputs { dir: dir.to_path_buf(), manifest: RunManifest::new(master_seed, canonical_config) };
        outputs.write("config_resolved.json", canonical_config)?;
        Ok(outputs)
    }

    fn write(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, content).map_err(|e| Error::io(path.display().to_string(), e))?;
        self.manifest.record_file(&path)
    }

    /// Record a file some library routine already wrote into the run dir.
    fn record(&mut self, name: &str) -> Result<()> {
        self.manifest.record_file(&self.dir.join(name))
    }

    fn finish(self) -> Result<()> {
        let names: Vec<&str> =
            self.manifest.artifacts.iter().map(|a| a.name.as_str()).collect();
        println!("wrote {} + manifest.json in {}", names.join(", "), self.dir.display());
        self.manifest.save(&self.dir.join("manifest.json"))
    }
}

fn pretty(value: &serde_json::Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("JSON value serializes");
    text.push('\n');
    text
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(sha256_hex(&bytes))
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    let message = err.to_string();
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path.display().to_string(), e),
        _ => Error::Parse { source_name: path.display().to_string(), line, message },
    }
}

fn load_config(path: Option<&Path>, preset: Option<Preset>, seed: Option<u64>) -> Result<ExperimentConfig> {
    let config = match (path, preset) {
        (Some(p), None) => ExperimentConfig::from_json(&read_text(p)?)?,
        (None, Some(preset)) => preset.config(),
        // clap enforces exactly one; this covers direct construction.
        _ => return Err(Error::invalid("exactly one of --config or --preset is required")),
    };
    let mut config = config.resolve()?;
    if let Some(s) = seed {
        config.seed = s;
    }
    Ok(config)
}

// ---------------------------------------------------------------------------
// stationary
// ---------------------------------------------------------------------------

fn cmd_stationary(args: &StationaryArgs, ctx: &Ctx) -> Result<()> {
    let alphas: Vec<f64> =
        if args.alphas.is_empty() { DEFAULT_ALPHAS.to_vec() } else { args.alphas.clone() };
    let betas = if args.betas.is_empty() { default_beta_grid() } else { args.betas.clone() };

    let sweep = stationary_sweep(&alphas, &betas, args.gamma, args.set_size, ctx.mode)?;
    let curve = amplification_curve(&alphas, &betas, args.gamma, args.set_size, ctx.mode)?;

    let mut sweep_csv = String::from("alpha,beta,gamma,n,k,pi_k\n");
    for r in &sweep {
        sweep_csv
            .push_str(&format!("{},{},{},{},{},{}\n", r.alpha, r.beta, r.gamma, r.n, r.k, r.pi_k));
    }

    let resolved = json!({
        "alphas": alphas,
        "betas": betas,
        "gamma": args.gamma,
        "set_size": args.set_size,
    });
    let mut outputs = Outputs::new(&ctx.out_dir, ctx.master_seed(0), &pretty(&resolved))?;
    outputs.write("stationary_sweep.csv", &sweep_csv)?;
    emit_plot_data(
        PlotSource::Curves(&curve),
        PlotKind::Fig2Stationary,
        &ctx.path("stationary_curve.csv"),
    )?;
    outputs.record("stationary_curve.csv")?;
    outputs.finish()
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn cmd_simulate(args: &SimulateArgs, ctx: &Ctx) -> Result<()> {
    let config = load_config(args.config.as_deref(), args.preset, ctx.seed)?;
    let plan = build_experiment(config)?;
    let canonical = plan.config().to_canonical_json();
    let master = plan.config().seed;

    let options = RunOptions {
        exec: ctx.mode,
        simulation_id: 0,
        master_seed: None,
        mirror: args.mirror,
    };
    let output = run_experiment(&plan, &options)?;

    let mut outputs = Outputs::new(&ctx.out_dir, master, &canonical)?;
    persist_trace(&output.trace, &ctx.path("trace.csv"))?;
    outputs.record("trace.csv")?;
    outputs.write(
        "audit.json",
        &pretty(&json!({
            "mirror": args.mirror,
            "rows": output.trace.rows.len(),
            "floored_sets": output.audit.floored_sets,
            "uniform_fallback_sets": output.audit.uniform_fallback_sets,
            "fit_warnings": output.audit.fit_warnings,
        })),
    )?;
    outputs.finish()
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

fn cmd_fit(args: &FitArgs, ctx: &Ctx) -> Result<()> {
    let rows = read_inference_rows(&args.data)?;
    let social = rows.iter().any(|r| r.social_k.is_some());
    let social_set_size = social.then_some(args.set_size);
    let dataset = InferenceDataset::new(rows, social_set_size)?;
    let spec = ModelSpec::new(args.variant.model());
    let master = ctx.master_seed(0);
    let mcmc = McmcConfig {
        chains: args.chains,
        iterations: args.iterations,
        warmup: args.warmup,
        seed: master,
        options: NutsOptions::default(),
    };
    let draws = fit_posterior(&spec, &dataset, &mcmc, ctx.mode)?;

    let resolved = json!({
        "data": args.data.display().to_string(),
        "data_sha256": file_sha256(&args.data)?,
        "variant": args.variant.name(),
        "chains": args.chains,
        "iterations": args.iterations,
        "warmup": args.warmup,
        "social_set_size": social_set_size,
        "seed": master,
    });
    let mut outputs = Outputs::new(&ctx.out_dir, master, &pretty(&resolved))?;
    outputs.write(
        "posterior_summary.json",
        &pretty(&json!({
            "parameters": draws.summaries,
            "divergences": draws.divergences,
            "step_sizes": draws.step_sizes,
            "warnings": draws.warnings,
        })),
    )?;
    outputs.finish()
}

fn read_inference_rows(path: &Path) -> Result<Vec<InferenceRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    reader
        .deserialize()
        .map(|record| record.map_err(|e| csv_error(path, e)))
        .collect()
}

// ---------------------------------------------------------------------------
// resample
// ---------------------------------------------------------------------------

fn cmd_resample(args: &ResampleArgs, ctx: &Ctx) -> Result<()> {
    let sets = read_judgment_sets(&args.sets)?;
    let master = ctx.master_seed(0);

    let mut resampled_csv =
        String::from("recipient,stimulus_id,slot,source_index,source_participant,chose_green\n");
    let mut presented_csv =
        String::from("recipient,stimulus_id,presented_color,presented_count,tie_broken\n");
    for recipient in 0..args.recipients {
        // One draw stream and one tie-coin stream per recipient, consumed
        // across stimuli in ascending id order, so each recipient sees an
        // independent but reproducible panel of resamples.
        let mut draw_rng = seed::rng_for(master, &[tag::RESAMPLE, u64::from(recipient)]);
        let mut tie_rng = seed::rng_for(master, &[tag::TIE, u64::from(recipient)]);
        for (stimulus_id, set, weights) in &sets {
            let resampled = resample_for_recipient(set, weights, &mut draw_rng)?;
            let shown: Vec<bool> = resampled.judgments(set).map(|j| j.chose_green).collect();
            let signal = presented_signal(&shown, Color::Green, &mut tie_rng)?;
            for (slot, &source) in resampled.indices.iter().enumerate() {
                let record = &set.records()[source];
                resampled_csv.push_str(&format!(
                    "{recipient},{stimulus_id},{slot},{source},{},{}\n",
                    record.participant_id, record.chose_green
                ));
            }
            presented_csv.push_str(&format!(
                "{recipient},{stimulus_id},{},{},{}\n",
                signal.color, signal.count, signal.tie_broken
            ));
        }
    }

    let floored = sets.iter().filter(|(_, _, w)| w.floored).count();
    let uniform = sets.iter().filter(|(_, _, w)| w.uniform_fallback).count();
    let resolved = json!({
        "sets": args.sets.display().to_string(),
        "sets_sha256": file_sha256(&args.sets)?,
        "recipients": args.recipients,
        "stimuli": sets.len(),
        "seed": master,
    });
    let mut outputs = Outputs::new(&ctx.out_dir, master, &pretty(&resolved))?;
    outputs.write("resampled.csv", &resampled_csv)?;
    outputs.write("presented.csv", &presented_csv)?;
    outputs.write(
        "audit.json",
        &pretty(&json!({
            "floored_sets": floored,
            "uniform_fallback_sets": uniform,
        })),
    )?;
    outputs.finish()
}

/// Read a judgment-set CSV and normalize weights per stimulus set.
fn read_judgment_sets(path: &Path) -> Result<Vec<(u32, JudgmentSet, WeightVector)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            source_name: path.display().to_string(),
            line: 1,
            message: format!("missing column {name}"),
        })
    };
    let participant_col = column("participant_id")?;
    let stimulus_col = column("stimulus_id")?;
    let chose_col = column("chose_green")?;
    let q_col = column("q_green")?;
    let p_col = column("p_green")?;

    let mut by_stimulus: BTreeMap<u32, Vec<JudgmentRecord>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |col: usize, name: &str| {
            record.get(col).ok_or_else(|| Error::Parse {
                source_name: path.display().to_string(),
                line,
                message: format!("missing value for column {name}"),
            })
        };
        let parse_error = |name: &str, raw: &str, detail: String| Error::Parse {
            source_name: path.display().to_string(),
            line,
            message: format!("column {name}: cannot parse {raw:?}: {detail}"),
        };
        let participant_id = field(participant_col, "participant_id")?.to_string();
        if participant_id.contains([',', '"', '\n']) {
            return Err(Error::Parse {
                source_name: path.display().to_string(),
                line,
                message: "participant_id must not contain commas, quotes, or newlines".into(),
            });
        }
        let raw = field(stimulus_col, "stimulus_id")?;
        let stimulus_id = u32::from_str(raw)
            .map_err(|e| parse_error("stimulus_id", raw, e.to_string()))?;
        let raw = field(chose_col, "chose_green")?;
        let chose_green =
            bool::from_str(raw).map_err(|e| parse_error("chose_green", raw, e.to_string()))?;
        let raw = field(q_col, "q_green")?;
        let q_green =
            f64::from_str(raw).map_err(|e| parse_error("q_green", raw, e.to_string()))?;
        let raw = field(p_col, "p_green")?;
        let p_green =
            f64::from_str(raw).map_err(|e| parse_error("p_green", raw, e.to_string()))?;
        by_stimulus
            .entry(stimulus_id)
            .or_default()
            .push(JudgmentRecord::new(participant_id, stimulus_id, chose_green, q_green, p_green)?);
    }
    if by_stimulus.is_empty() {
        return Err(Error::invalid("judgment-set CSV contains no rows"));
    }

    by_stimulus
        .into_iter()
        .map(|(stimulus_id, records)| {
            let set = JudgmentSet::new(records)?;
            let weights = normalize_weights(&set);
            Ok((stimulus_id, set, weights))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

fn cmd_analyze(args: &AnalyzeArgs, ctx: &Ctx) -> Result<()> {
    let trace = load_trace(&args.trace)?;
    let partition = args.partition.partition();
    let table = condition_summaries(&trace, partition)?;

    // Condition tests run on the full trace for every designed directional
    // comparison whose two conditions are both present.
    let present: BTreeSet<Condition> = trace.rows.iter().map(|r| r.condition).collect();
    let mut tests_csv = String::from(
        "condition_a,condition_b,metric,prop_a,prop_b,chi_square,df,p_value,stars\n",
    );
    for hypothesis in default_hypotheses() {
        if present.contains(&hypothesis.baseline) && present.contains(&hypothesis.favored) {
            let test = compare_conditions(
                &trace,
                hypothesis.baseline,
                hypothesis.favored,
                hypothesis.metric,
                false,
            )?;
            tests_csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                test.condition_a,
                test.condition_b,
                test.metric.as_str(),
                test.prop_a,
                test.prop_b,
                test.chi_square,
                test.df,
                test.p_value,
                test.stars,
            ));
        }
    }

    // Tie-trial priming check: does the motivated color predict choices on
    // trials whose observed set split evenly? Degenerate tie data is
    // reported in place rather than failing the whole analysis.
    let ties = tie_trial_rows(&trace)?;
    let priming = if ties.is_empty() {
        json!({ "n_tie_trials": 0 })
    } else {
        match priming_test(&ties) {
            Ok(test) => json!({ "n_tie_trials": ties.len(), "test": test }),
            Err(err) => json!({ "n_tie_trials": ties.len(), "error": err.to_string() }),
        }
    };

    let resolved = json!({
        "trace": args.trace.display().to_string(),
        "trace_sha256": file_sha256(&args.trace)?,
        "partition": partition.as_str(),
    });
    let mut outputs = Outputs::new(&ctx.out_dir, ctx.master_seed(0), &pretty(&resolved))?;
    emit_plot_data(PlotSource::Summaries(&table), PlotKind::Fig3Bars, &ctx.path("fig3_bars.csv"))?;
    outputs.record("fig3_bars.csv")?;
    emit_plot_data(
        PlotSource::Summaries(&table),
        PlotKind::FigS4Waves,
        &ctx.path("figS4_waves.csv"),
    )?;
    outputs.record("figS4_waves.csv")?;
    outputs.write("condition_tests.csv", &tests_csv)?;
    outputs.write("priming_test.json", &pretty(&priming))?;
    outputs.finish()
}

// ---------------------------------------------------------------------------
// power
// ---------------------------------------------------------------------------

fn cmd_power(args: &PowerArgs, ctx: &Ctx) -> Result<()> {
    let config = load_config(args.config.as_deref(), args.preset, ctx.seed)?;
    let canonical = config.to_canonical_json();
    let master = config.seed;
    let hypotheses = default_hypotheses();
    let report = run_power_analysis(&config, args.n_sims, &hypotheses, ctx.mode)?;

    let mut results_csv = String::from("simulation_id,hypothesis_id,statistic,p_value,confirmed\n");
    for row in &report.rows {
        let statistic = row.statistic.map(|v| v.to_string()).unwrap_or_default();
        let p_value = row.p_value.map(|v| v.to_string()).unwrap_or_default();
        results_csv.push_str(&format!(
            "{},{},{statistic},{p_value},{}\n",
            row.simulation_id, row.hypothesis_id, row.confirmed
        ));
    }

    let mut outputs = Outputs::new(&ctx.out_dir, master, &canonical)?;
    outputs.write("power_results.csv", &results_csv)?;
    outputs.write(
        "power_report.json",
        &pretty(&serde_json::to_value(&report).expect("power report serializes")),
    )?;
    outputs.finish()?;
    for (id, fraction) in &report.confirmed_fraction {
        println!("{id}: confirmed in {:.0}% of {} simulations", 100.0 * fraction, report.n_simulations);
    }
    if let Some(all) = report.all_confirmed_fraction {
        println!("all hypotheses confirmed in {:.0}% of simulations", 100.0 * all);
    }
    Ok(())
}

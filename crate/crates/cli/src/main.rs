//! `mldcc`: train, predict, evaluate, benchmark and trace multi-label chain
//! classifiers.
//!
//! Errors go to stderr as one line, `error: <reason>`. Exit code 2 means a
//! missing input file (or a usage error), 1 anything else.

mod commands;
mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mldcc::dataset::DatasetError;
use mldcc::mlboost::SplitGain;
use mldcc::model::ModelError;

use crate::config::{Algorithm, RunConfig};

#[derive(Parser)]
#[command(
    name = "mldcc",
    version,
    about = "Dynamic classifier chains for multi-label data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it with a run manifest.
    Train(TrainArgs),
    /// Write predicted label vectors as CSV.
    Predict(PredictArgs),
    /// Score a model on a labeled test set.
    Eval(EvalArgs),
    /// Train and score several configurations and compare them.
    Bench(BenchArgs),
    /// Per-iteration chain decisions as CSV.
    Trace(TraceArgs),
    /// Dataset statistics as JSON.
    Stats(StatsArgs),
    /// Write a synthetic dataset (train/test ARFF plus label XML).
    Synth(SynthArgs),
}

/// Run configuration flags; each overrides the `--config` file.
#[derive(Args, Default)]
struct ConfigArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "algo", value_enum)]
    algorithm: Option<Algorithm>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Label XML path, trailing label count, or `names:a,b`.
    #[arg(long)]
    labels: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Chain length (xdcc).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    trees: Option<usize>,
    /// Tree depth limit of the selected algorithm family.
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    min_leaf: Option<usize>,
    /// Fraction of label tests among RDT splits.
    #[arg(long)]
    label_tests: Option<f64>,
    /// Share of label tests that stay active.
    #[arg(long)]
    sigma: Option<f64>,
    /// Static order: random, random:<seed>, given:2,0,1, rare-first, frequent-first.
    #[arg(long)]
    order: Option<String>,
    /// Boosting rounds.
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    min_gain: Option<f64>,
    /// sumGain, maxGain, sumSigned, maxSigned, sumAbsG or maxAbsG.
    #[arg(long)]
    split_gain: Option<SplitGain>,
    #[arg(long)]
    cumulate_overrides: bool,
    #[arg(long)]
    early_stop: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field.clone() { $target = v.into(); })*
            };
        }
        set!(
            algorithm => c.algorithm,
            train => c.train,
            test => c.test,
            labels => c.labels,
            seed => c.seed,
            k => c.k,
            trees => c.rdt.trees,
            min_leaf => c.rdt.min_leaf,
            label_tests => c.rdt.label_tests,
            sigma => c.rdt.sigma,
            order => c.order,
            rounds => c.boost.rounds,
            eta => c.boost.learning_rate,
            l2 => c.boost.l2_reg,
            gamma => c.boost.complexity,
            min_gain => c.boost.min_split_gain,
            split_gain => c.boost.split_gain,
            early_stop => c.early_stop,
        );
        if let Some(d) = self.max_depth {
            if c.algorithm.is_rdt() {
                c.rdt.max_depth = d;
            } else {
                c.boost.max_depth = d;
            }
        }
        c.cumulate_overrides_propagated |= self.cumulate_overrides;
        if self.config.is_none() && self.algorithm.is_none() {
            anyhow::bail!("no algorithm: pass --algo or --config");
        }
        Ok(c)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Model output path.
    #[arg(long)]
    out: PathBuf,
    /// Run manifest path (default: `<out>.manifest.json`).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Loss CSV path (default: `<out>.loss.csv`, boosted models only).
    #[arg(long)]
    loss_csv: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    labels: Option<String>,
    /// CSV output (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Test set (default: the `test` path stored with the model).
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    labels: Option<String>,
    /// Report JSON output (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Chain lengths to score, e.g. `1..6`, `1..N` or `3` (xdcc models).
    #[arg(long)]
    sweep_k: Option<String>,
    /// Curve CSV for a sweep.
    #[arg(long)]
    sweep_csv: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Run configurations (JSON); at least two. The first is the baseline.
    #[arg(long = "config", required = true)]
    configs: Vec<PathBuf>,
    /// Table CSV (default: stdout).
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    labels: Option<String>,
    /// CSV output (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    labels: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    /// emotions, scene, yeast or flags.
    #[arg(long)]
    preset: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

fn init_threads() {
    if let Some(n) = std::env::var("MLDCC_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if matches!(cause.downcast_ref(), Some(DatasetError::NotFound(_)))
            || matches!(cause.downcast_ref(), Some(ModelError::NotFound(_)))
        {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    let result = match cli.command {
        Command::Train(a) => a.config.resolve().and_then(|c| {
            commands::train(&c, &a.out, a.manifest.as_deref(), a.loss_csv.as_deref())
        }),
        Command::Predict(a) => {
            commands::predict(&a.model, &a.data, a.labels.as_deref(), a.out.as_deref())
        }
        Command::Eval(a) => commands::eval(
            &a.model,
            a.test.as_deref(),
            a.labels.as_deref(),
            a.out.as_deref(),
            a.sweep_k.as_deref(),
            a.sweep_csv.as_deref(),
        ),
        Command::Bench(a) => {
            commands::bench(&a.configs, a.out_csv.as_deref(), a.out_json.as_deref())
        }
        Command::Trace(a) => commands::trace(
            &a.model,
            a.test.as_deref(),
            a.labels.as_deref(),
            a.out.as_deref(),
        ),
        Command::Stats(a) => commands::stats(&a.data, a.labels.as_deref()),
        Command::Synth(a) => commands::synth(&a.preset, a.seed, &a.out_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace(['\n', '\r'], " ");
            eprintln!("error: {msg}");
            ExitCode::from(exit_code(&e))
        }
    }
}

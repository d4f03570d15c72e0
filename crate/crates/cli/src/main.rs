mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};

use centroid_htc::{Error, ErrorClass};
use commands::{BenchArgs, EvaluateArgs, PredictArgs, SynthArgs, TrainArgs, UpdateArgs};
use config::RunConfig;

/// Invalid flags, config files, or command preconditions.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "htc", version, about = "Hierarchical ticket classification with lexical and semantic centroids")]
struct Cli {
    /// Seed for splitting, sampling, and synthetic data (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Only print errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    /// More logging; repeat for trace output.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Preprocess a dataset, split it, and train a model.
    Train(TrainArgs),
    /// Rank categories for one or more queries.
    Predict(PredictArgs),
    /// Score a model on a test file, or run repeated end-to-end experiments.
    Evaluate(EvaluateArgs),
    /// Add labeled samples to an existing model.
    Update(UpdateArgs),
    /// Time incremental updates against full retraining.
    Bench(BenchArgs),
    /// Generate a synthetic labeled corpus.
    Synth(SynthArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e.class() {
                ErrorClass::Validation => 2,
                ErrorClass::Data => 3,
                ErrorClass::ModelFormat => 4,
                ErrorClass::Internal => 1,
            };
        }
        if cause.is::<UsageError>() {
            return 2;
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return 3;
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), cli.seed)?;
    let name = match &cli.command {
        Command::Train(a) => {
            a.apply(&mut cfg);
            "train"
        }
        Command::Predict(a) => {
            if let Some(k) = a.k {
                cfg.top_k = k;
            }
            "predict"
        }
        Command::Evaluate(a) => {
            a.apply(&mut cfg);
            if let Some(k) = a.k {
                cfg.top_k = k;
            }
            "evaluate"
        }
        Command::Update(_) => "update",
        Command::Bench(a) => {
            a.apply(&mut cfg);
            "bench"
        }
        Command::Synth(a) => {
            a.apply(&mut cfg);
            "synth"
        }
    };
    cfg.validate()?;
    cfg.log(name);
    match &cli.command {
        Command::Train(a) => commands::train(&cfg, a),
        Command::Predict(a) => commands::predict_cmd(&cfg, a),
        Command::Evaluate(a) => commands::evaluate_cmd(&cfg, a),
        Command::Update(a) => commands::update(&cfg, a),
        Command::Bench(a) => commands::bench(&cfg, a),
        Command::Synth(a) => commands::synth(&cfg, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Info,
        (false, 1) => log::LevelFilter::Debug,
        (false, _) => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

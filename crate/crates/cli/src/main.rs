//! `mfk`: synthesize, preprocess, train, evaluate, predict and report.

mod commands;
mod config;
mod runlog;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{extract_overrides, resolve, UsageError, SEED_ENV};

#[derive(Debug, Parser)]
#[command(
    name = "mfk",
    version,
    about = "Multi-person 3D motion forecasting benchmark",
    after_help = "Any config field can be set with --section.key VALUE (sections: data, synth, model, train, eval, run).\nPrecedence: defaults < --config file < MFK_SEED < flags."
)]
struct Cli {
    /// TOML config file with [data], [synth], [model], [train], [eval], [run] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Processed dataset directory (data.root).
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Output directory for checkpoints, reports and logs (run.out_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// run.seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// synth.persons
    #[arg(long, global = true)]
    persons: Option<usize>,
    /// synth.samples
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// synth.frames
    #[arg(long, global = true)]
    frames: Option<usize>,
    /// train.epochs
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// train.learning_rate
    #[arg(long, global = true)]
    lr: Option<f64>,
    /// train.batch_size
    #[arg(long, global = true)]
    batch: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset into data.root.
    Synth,
    /// Convert raw JSON exports (data.raw) into a processed dataset.
    Preprocess {
        /// Directory of raw JSON files; overrides data.raw.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Train a model on the train split.
    Train,
    /// Evaluate a checkpoint and both naive baselines on the test split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Forecast from the last observed frames of an NPY motion file.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Autoregressive rounds; each adds one output window.
        #[arg(long, default_value_t = 1)]
        steps: usize,
    },
    /// Merge metric reports into comparison tables and PS curves.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

fn shorthand(cli: &Cli) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut push = |key: &str, v: Option<String>| {
        if let Some(v) = v {
            out.push((key.to_string(), v));
        }
    };
    let quoted = |p: &Option<PathBuf>| {
        p.as_ref()
            .map(|p| toml::Value::String(p.display().to_string()).to_string())
    };
    push("data.root", quoted(&cli.data));
    push("run.out_dir", quoted(&cli.out));
    push("run.seed", cli.seed.map(|v| v.to_string()));
    push("synth.persons", cli.persons.map(|v| v.to_string()));
    push("synth.samples", cli.samples.map(|v| v.to_string()));
    push("synth.frames", cli.frames.map(|v| v.to_string()));
    push("train.epochs", cli.epochs.map(|v| v.to_string()));
    push("train.learning_rate", cli.lr.map(|v| format!("{v:?}")));
    push("train.batch_size", cli.batch.map(|v| v.to_string()));
    if let Command::Preprocess { input } = &cli.command {
        push("data.raw", quoted(input));
    }
    out
}

fn run(cli: Cli, dotted: Vec<(String, String)>) -> anyhow::Result<()> {
    let mut overrides = dotted;
    overrides.extend(shorthand(&cli));
    let env_seed = std::env::var(SEED_ENV).ok();
    let cfg = resolve(cli.config.as_deref(), env_seed.as_deref(), &overrides)?;
    match cli.command {
        Command::Synth => commands::synth(&cfg),
        Command::Preprocess { .. } => commands::preprocess(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Eval { checkpoint } => commands::eval(&cfg, &checkpoint),
        Command::Predict {
            checkpoint,
            input,
            output,
            steps,
        } => commands::predict(&cfg, &checkpoint, &input, &output, steps),
        Command::Report { reports } => commands::report(&cfg, &reports),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<mfk_core::Error>() {
        Some(mfk_core::Error::Config(_)) | Some(mfk_core::Error::Compatibility(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let (args, dotted) = extract_overrides(std::env::args().collect());
    let cli = Cli::parse_from(args);
    match run(cli, dotted) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

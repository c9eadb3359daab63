//! `bsarec`: prepare data, train, evaluate, analyze and sweep.

mod cache;
mod commands;
mod failure;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use bsarec_core::experiment::ExperimentConfig;
use bsarec_core::signal::{PaddingMode, SpectralBackend};
use clap::{Args, Parser, Subcommand};

use crate::failure::Failure;

#[derive(Parser)]
#[command(
    name = "bsarec",
    version,
    about = "Sequential recommendation with frequency-rescaled self-attention"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

/// Flags shared by every command. Each overrides one key of the config document.
#[derive(Args, Debug, Default)]
struct Common {
    /// Experiment config (JSON). Defaults apply to anything it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run this single seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Interaction file, one user per line.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Item-to-category map.
    #[arg(long, global = true)]
    category_map: Option<PathBuf>,
    #[arg(long, global = true)]
    padding: Option<PaddingMode>,
    #[arg(long, global = true)]
    backend: Option<SpectralBackend>,
    /// Mixing weight of the rescaler branch.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Low-pass cutoff.
    #[arg(long, global = true)]
    c: Option<usize>,
    /// Encoded sequence length.
    #[arg(long, global = true)]
    max_len: Option<usize>,
    /// Any other key, e.g. `--set train.learning_rate=5e-4`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and split the corpus into the content-addressed cache.
    Prepare,
    /// Train one checkpoint per seed; completed seeds are skipped.
    Train,
    /// Rank held-out items, write metrics, grouped tables and norm profiles.
    Eval(commands::eval::EvalArgs),
    /// Scaled-DC summary and target-category occurrence distribution.
    Analyze,
    /// Train and evaluate across the values of one config key.
    Sweep(commands::sweep::SweepArgs),
}

fn resolve_config(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Failure::usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            ExperimentConfig::from_json(&text)
                .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    let mut overrides: Vec<(String, serde_json::Value)> = Vec::new();
    let mut put = |k: &str, v: serde_json::Value| overrides.push((k.to_string(), v));
    if let Some(v) = &common.data {
        put("dataset", v.to_string_lossy().into());
    }
    if let Some(v) = &common.category_map {
        put("category_map", v.to_string_lossy().into());
    }
    if let Some(v) = &common.out {
        put("output_dir", v.to_string_lossy().into());
    }
    if let Some(v) = common.seed {
        put("seeds", serde_json::json!([v]));
    }
    if let Some(v) = common.padding {
        put("padding", v.as_str().into());
    }
    if let Some(v) = common.backend {
        put("backend", v.as_str().into());
    }
    if let Some(v) = common.alpha {
        put("alpha", v.into());
    }
    if let Some(v) = common.c {
        put("cutoff", v.into());
    }
    if let Some(v) = common.max_len {
        put("max_len", v.into());
    }
    for (k, v) in overrides {
        cfg = cfg
            .with_override(&k, v)
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg = cfg
            .with_override_str(k.trim(), v.trim())
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = resolve_config(&cli.common)?;
    match cli.command {
        Command::Prepare => commands::prepare::run(&cfg),
        Command::Train => commands::train::run(&cfg),
        Command::Eval(args) => commands::eval::run(&cfg, &args),
        Command::Analyze => commands::analyze::run(&cfg),
        Command::Sweep(args) => commands::sweep::run(&cfg, &args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { failure::USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

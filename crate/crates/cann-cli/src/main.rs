//! Command-line pipeline: synthesize data, build features, fit benchmark
//! and combined models, tune, evaluate, and explain.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "cann",
    about = "Claim count regression with telematics driving data",
    version
)]
struct Cli {
    /// Configuration file (TOML); flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (required here or in the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Distribution head: poisson | negbin | mvnb.
    #[arg(long, global = true)]
    head: Option<String>,
    /// Covariate mode: trad | handcrafted | televector | cann.
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Freeze the log-linear coefficients at their initialization.
    #[arg(long, global = true)]
    fixed_beta: bool,
    /// Worker threads for grid search.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic portfolio (contracts, trips, ground truth).
    Synth,
    /// Link trips, build features, split by vehicle, fit the recipe.
    Prepare,
    /// Fit a log-linear benchmark model.
    FitGlm,
    /// Train the combined log-linear + network model.
    FitCann,
    /// Grid search over learning rate, plateau factor, and dropout.
    Tune,
    /// Score models against the baseline and report balance.
    Evaluate,
    /// Permutation feature importance and partial dependence.
    Explain,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        head: cli.head.clone(),
        mode: cli.mode.clone(),
        fixed_beta: cli.fixed_beta,
        workers: cli.workers,
    };
    let run = RunConfig::resolve(cli.config.as_deref(), &overrides).and_then(|cfg| {
        match cli.command {
            Command::Synth => commands::synth::run(&cfg),
            Command::Prepare => commands::prepare::run(&cfg),
            Command::FitGlm => commands::fit_glm::run(&cfg),
            Command::FitCann => commands::fit_cann::run(&cfg),
            Command::Tune => commands::tune::run(&cfg),
            Command::Evaluate => commands::evaluate::run(&cfg),
            Command::Explain => commands::explain::run(&cfg),
        }
    });
    match run {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

//! `stochwave` command-line runner.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error,
//! 4 acceptance-check failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{ConfigError, ExperimentConfig};
use output::Artifacts;

#[derive(Parser)]
#[command(name = "stochwave", version, about = "Pathwise experiments for the damped stochastic wave equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check parameters and blocks; report σ, ε_max and energy constants.
    Validate(Common),
    /// Forward trajectory with the stochastic Gronwall check.
    Simulate(Common),
    /// Pullback convergence over the ensemble.
    Pullback(Common),
    /// Entry of large initial data into the absorbing ball.
    Absorb(Common),
    /// Tail-smallness experiment.
    Tails(Common),
    /// Attractor surrogate and invariance check.
    Attractor(Common),
    /// Vitali criterion on bundled and user-supplied families.
    Vitali(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `noise.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads. Affects scheduling only, never results.
    #[arg(long)]
    threads: Option<usize>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_FAILED: u8 = 4;

type Runner = fn(&ExperimentConfig, &mut Artifacts) -> commands::Result<bool>;

fn config_failure(diagnostics: Vec<String>) -> ExitCode {
    let doc = json!({ "error": "config", "diagnostics": diagnostics });
    eprintln!("{}", serde_json::to_string_pretty(&doc).expect("json"));
    ExitCode::from(EXIT_CONFIG)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common, run): (&str, Common, Runner) = match cli.command {
        Command::Validate(c) => ("validate", c, commands::validate),
        Command::Simulate(c) => ("simulate", c, commands::simulate),
        Command::Pullback(c) => ("pullback", c, commands::pullback_cmd),
        Command::Absorb(c) => ("absorb", c, commands::absorb),
        Command::Tails(c) => ("tails", c, commands::tails),
        Command::Attractor(c) => ("attractor", c, commands::attractor),
        Command::Vitali(c) => ("vitali", c, commands::vitali),
    };

    let mut config = match ExperimentConfig::load(&common.config) {
        Ok(c) => c,
        Err(e) => return config_failure(e.diagnostics()),
    };
    if let Some(seed) = common.seed {
        config.noise.seed = seed;
    }
    if let Some(dir) = common.out {
        config.output.directory = dir;
    }
    // `validate` reports on inadmissible configs instead of refusing them.
    if name != "validate" {
        config = match config.validated() {
            Ok(c) => c,
            Err(e @ ConfigError::Invalid(_)) => return config_failure(e.diagnostics()),
            Err(e) => return config_failure(vec![e.to_string()]),
        };
    }

    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: cannot size thread pool: {e}");
        }
    }
    let threads = rayon::current_num_threads();

    let mut out = match Artifacts::create(&config.output.directory, &config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: cannot create {}: {e}", config.output.directory.display());
            return ExitCode::from(EXIT_RUNTIME);
        }
    };

    let result = run(&config, &mut out);
    let status = match &result {
        Ok(true) => "passed",
        Ok(false) => "failed",
        Err(_) => "partial",
    };
    if let Err(e) = out.finish(name, status, threads) {
        eprintln!("error: cannot write metadata: {e}");
        return ExitCode::from(EXIT_RUNTIME);
    }
    match result {
        Ok(true) => {
            println!("{name}: passed ({} artifacts, config {})", out.written().len(), &out.hash()[..12]);
            ExitCode::SUCCESS
        }
        Ok(false) if name == "validate" => {
            println!("validate: configuration is not admissible, see validate.json");
            ExitCode::from(EXIT_CONFIG)
        }
        Ok(false) => {
            println!("{name}: acceptance check failed ({} artifacts)", out.written().len());
            ExitCode::from(EXIT_FAILED)
        }
        Err(e) => {
            let doc = json!({ "error": "runtime", "subcommand": name, "message": e.to_string(), "partial_artifacts": out.written() });
            eprintln!("{}", serde_json::to_string_pretty(&doc).expect("json"));
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use explore_cli::bounds::run_bounds_suite;
use explore_cli::experiment::bound_failures;
use explore_cli::{run_experiment, write_outputs, ExperimentConfig, Result};

#[derive(Parser)]
#[command(
    name = "explore",
    version,
    about = "Run count and pseudo-count exploration experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config and write CSV/SVG outputs.
    Run {
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a JSON config without running it.
    Validate { config: PathBuf },
    /// Check every closed form and bound on randomized instances.
    BoundsSuite {
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the default config of an experiment
    /// (overestimation, ninerooms, counterexample or bounds-suite).
    DefaultConfig { experiment: String },
}

/// `Ok(true)` when the command succeeded and every checked bound held.
fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Run { config, out } => {
            let config = ExperimentConfig::load(&config)?;
            let table = run_experiment(&config)?;
            let dir = out.unwrap_or_else(|| config.output_dir.clone());
            write_outputs(&table, &dir)?;
            for metric in &table.metrics {
                println!("{}", dir.join(format!("{}.csv", metric.name)).display());
            }
            Ok(bound_failures(&table) == 0.0)
        }
        Command::Validate { config } => {
            ExperimentConfig::load(&config)?;
            println!("ok");
            Ok(true)
        }
        Command::BoundsSuite { trials, seed } => {
            let mut ok = true;
            for outcome in run_bounds_suite(trials, seed) {
                let status = if outcome.passed() { "PASS" } else { "FAIL" };
                println!(
                    "{status} {}: {} cases, {} failures, {} skipped, worst excess {:e}",
                    outcome.name, outcome.cases, outcome.failures, outcome.skipped, outcome.worst
                );
                ok &= outcome.passed();
            }
            Ok(ok)
        }
        Command::DefaultConfig { experiment } => {
            println!("{}", ExperimentConfig::default_for(&experiment)?.to_json());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

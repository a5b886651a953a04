//! Command-line front end: run a scenario file or compare two finished runs.

use clap::{Parser, ValueEnum};
use shiresim::config::TraceLevel;
use shiresim::harness::{compare_runs, run_simulation, Comparison};
use shiresim::ScenarioConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TraceArg {
    Full,
    Stats,
    Off,
}

#[derive(Parser, Debug)]
#[command(
    name = "shiresim",
    about = "Parallel time-stepped simulator for large mobile-entity scenarios"
)]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, required_unless_present = "compare")]
    scenario: Option<PathBuf>,

    /// Override the number of logical processes.
    #[arg(long)]
    lps: Option<u32>,

    /// Override the number of coarse steps.
    #[arg(long)]
    steps: Option<u64>,

    /// Override the global seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Enable or disable adaptive migration.
    #[arg(long, value_enum)]
    migration: Option<Toggle>,

    /// Enable or disable multi-level refinement.
    #[arg(long, value_enum)]
    multilevel: Option<Toggle>,

    /// Trace verbosity.
    #[arg(long, value_enum)]
    trace: Option<TraceArg>,

    /// Output directory for run artifacts.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Compare two previously written run directories.
    #[arg(long, num_args = 2, value_names = ["RUN_A", "RUN_B"])]
    compare: Option<Vec<PathBuf>>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(dirs) = &cli.compare {
        return match compare_runs(&dirs[0], &dirs[1]) {
            Ok(Comparison::Equal) => {
                println!("runs are equivalent: digests match");
                ExitCode::SUCCESS
            }
            Ok(Comparison::Diverged { first_divergent_step }) => {
                match first_divergent_step {
                    Some(s) => println!("runs diverge: first divergent step {s}"),
                    None => println!("runs diverge: digests differ, checksums inconclusive"),
                }
                ExitCode::from(2)
            }
            Err(e) => {
                eprintln!("compare failed: {e}");
                ExitCode::FAILURE
            }
        };
    }

    let path = cli.scenario.as_ref().expect("clap enforces --scenario");
    let mut cfg = match ScenarioConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("failed to load scenario {}: {e}", path.display());
            return ExitCode::FAILURE;
        }
    };
    if let Some(lps) = cli.lps {
        cfg.n_lps = lps;
    }
    if let Some(steps) = cli.steps {
        cfg.total_coarse_steps = steps;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(m) = cli.migration {
        cfg.migration.enabled = matches!(m, Toggle::On);
    }
    if let Some(m) = cli.multilevel {
        cfg.multilevel.enabled = matches!(m, Toggle::On);
    }
    if let Some(t) = cli.trace {
        cfg.trace = match t {
            TraceArg::Full => TraceLevel::Full,
            TraceArg::Stats => TraceLevel::Stats,
            TraceArg::Off => TraceLevel::Off,
        };
    }
    if let Err(e) = cfg.validate() {
        eprintln!("invalid scenario: {e}");
        return ExitCode::FAILURE;
    }

    match run_simulation(&cfg, cli.out.as_deref()) {
        Ok(outcome) => {
            println!(
                "completed {} steps, {} entities, {} lps",
                cfg.total_coarse_steps, outcome.totals.entities, cfg.n_lps
            );
            println!(
                "events: {} sent, {} delivered, {} undelivered",
                outcome.totals.sent, outcome.totals.delivered, outcome.totals.undelivered
            );
            println!("digest: {}", outcome.digest.hex());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("simulation failed: {e}");
            ExitCode::FAILURE
        }
    }
}

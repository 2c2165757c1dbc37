//! Command-line driver: validate scenario bundles, compute optimal
//! placements, run failure simulations, and compare solution documents.
//!
//! Exit codes: 0 success, 2 infeasible scheduling problem, 3 validation
//! failure, 4 bundle parse error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fedsched::bundle::{load_bundle, LoadError, LoadOutcome};
use fedsched::cloud::Pricing;
use fedsched::report::{
    read_solution_doc, render_comparison, render_event_logs, render_map_table, render_sim_table,
    run_map, run_simulation, to_jsonl, MapError, SimOverrides,
};
use fedsched::sim::Scenario;
use fedsched::solver::SolveError;
use fedsched::units::ratio_to_micros;

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_PARSE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "fedsched",
    about = "VM selection and spot-revocation simulation for cross-silo federated learning",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PricingArg {
    OnDemand,
    Spot,
}

impl From<PricingArg> for Pricing {
    fn from(p: PricingArg) -> Self {
        match p {
            PricingArg::OnDemand => Pricing::OnDemand,
            PricingArg::Spot => Pricing::Spot,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    AllSpot,
    ServerOnDemand,
    AllOnDemand,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::AllSpot => Scenario::AllSpot,
            ScenarioArg::ServerOnDemand => Scenario::ServerOnDemandClientsSpot,
            ScenarioArg::AllOnDemand => Scenario::AllOnDemand,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a scenario bundle.
    Validate {
        bundle: PathBuf,
    },
    /// Solve the one-round placement problem and evaluate the named
    /// baseline assignments against the optimum.
    Map {
        bundle: PathBuf,
        /// Override the bundle's cost-vs-time weight (0 = time, 1 = cost).
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, value_enum, default_value = "on-demand")]
        pricing: PricingArg,
        /// Write the structured solution document (JSON lines) here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate FL executions with spot revocations over the optimal map.
    Simulate {
        bundle: PathBuf,
        /// Mean seconds between revocations per spot VM; repeat for a grid.
        #[arg(long = "k-r")]
        k_r: Vec<f64>,
        /// Spot/on-demand scenario; repeat for a grid.
        #[arg(long)]
        scenario: Vec<ScenarioArg>,
        #[arg(long)]
        trials: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write line-delimited event logs of every trial here.
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Compare two structured solution documents row by row.
    Compare {
        solution_a: PathBuf,
        solution_b: PathBuf,
    },
}

fn load_or_exit(path: &Path) -> Result<LoadOutcome, u8> {
    match load_bundle(path) {
        Ok(outcome) => Ok(outcome),
        Err(e @ LoadError::Validation(_)) => {
            eprintln!("error: {e}");
            Err(EXIT_VALIDATION)
        }
        Err(e @ LoadError::Version { .. }) | Err(e @ LoadError::Parse { .. }) => {
            eprintln!("error: {e}");
            Err(EXIT_PARSE)
        }
        Err(e) => {
            eprintln!("error: {e}");
            Err(1)
        }
    }
}

fn run() -> Result<(), u8> {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { bundle } => {
            let outcome = load_or_exit(&bundle)?;
            for w in &outcome.warnings {
                println!("warning: {w}");
            }
            println!(
                "{}: ok ({} VM types, {} clients, {} fixed assignments)",
                outcome.bundle.name,
                outcome.bundle.env.vm_count(),
                outcome.bundle.app.clients.len(),
                outcome.bundle.fixed_assignments.len(),
            );
            Ok(())
        }
        Command::Map {
            bundle,
            alpha,
            pricing,
            out,
        } => {
            let outcome = load_or_exit(&bundle)?;
            let alpha = alpha.map(|a| {
                if !(0.0..=1.0).contains(&a) {
                    eprintln!("error: --alpha must lie in [0, 1]");
                    std::process::exit(EXIT_VALIDATION as i32);
                }
                ratio_to_micros(a)
            });
            let doc = run_map(&outcome.bundle, alpha, pricing.into()).map_err(|e| match e {
                MapError::Solve(SolveError::Infeasible { .. }) => {
                    eprintln!("error: {e}");
                    EXIT_INFEASIBLE
                }
                e => {
                    eprintln!("error: {e}");
                    1
                }
            })?;
            print!("{}", render_map_table(&doc));
            if let Some(path) = out {
                std::fs::write(&path, to_jsonl(&doc)).map_err(|e| {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    1
                })?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Simulate {
            bundle,
            k_r,
            scenario,
            trials,
            seed,
            events,
        } => {
            let outcome = load_or_exit(&bundle)?;
            let overrides = SimOverrides {
                k_r_seconds: k_r,
                scenarios: scenario.into_iter().map(Into::into).collect(),
                trials,
                seed,
            };
            let grid = run_simulation(&outcome.bundle, &overrides).map_err(|e| {
                eprintln!("error: {e}");
                1
            })?;
            print!("{}", render_sim_table(&grid));
            if let Some(path) = events {
                std::fs::write(&path, render_event_logs(&grid)).map_err(|e| {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    1
                })?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Compare {
            solution_a,
            solution_b,
        } => {
            let a = read_solution_doc(&solution_a).map_err(|e| {
                eprintln!("error: {e}");
                EXIT_PARSE
            })?;
            let b = read_solution_doc(&solution_b).map_err(|e| {
                eprintln!("error: {e}");
                EXIT_PARSE
            })?;
            print!("{}", render_comparison(&a, &b));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}

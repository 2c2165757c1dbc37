//! Scheduling engine and failure simulator for cross-silo federated
//! learning on multi-cloud platforms.
//!
//! The crate selects the cost/time-optimal VM for every FL client and the
//! server over a multi-provider catalog, re-schedules tasks after spot-VM
//! revocations with greedy re-selection, and simulates whole FL executions
//! under Poisson revocation processes with checkpoint-based recovery.
//!
//! Modules follow the pipeline:
//!
//! - [`cloud`]: the provider/region/VM catalog with prices and quotas
//! - [`app`]: the FL application (clients, baselines, messages, limits)
//! - [`slowdowns`]: measurement-derived slowdown tables and expected times
//! - [`assign`]: assignment evaluation (costs, makespan, objective)
//! - [`solver`]: the exact one-round placement search plus its brute-force
//!   oracle
//! - [`reschedule`]: greedy replacement selection after revocations
//! - [`sim`]: the seeded discrete-event failure simulator
//! - [`bundle`] / [`report`]: scenario files and report emission
//!
//! Data-parallel inner loops (server-placement branches, simulation trials)
//! run on rayon when the default `parallel` feature is enabled and fall back
//! to sequential iteration without it; results are identical either way.

pub mod app;
pub mod assign;
pub mod bundle;
pub mod cloud;
pub mod report;
pub mod reschedule;
pub mod sim;
pub mod slowdowns;
pub mod solver;
pub mod units;

#[cfg(test)]
pub(crate) mod testenv;

pub use app::{round_limits, validate_app, FlApplication, RoundLimits};
pub use assign::{evaluate_fixed, Assignment, NormalizationConstants, SchedulingSolution};
pub use bundle::{load_bundle, save_bundle, LoadError, ScenarioBundle};
pub use cloud::{capacity_usage, price_of, validate_env, MultiCloudEnv, Pricing, VmAddress};
pub use reschedule::{select_replacement, CandidateSet, RevocationPolicy, TaskRef};
pub use sim::{aggregate_trials, sample_revocation_times, simulate, SimConfig, SimResult};
pub use solver::{brute_force_solve, solve, SolveError};

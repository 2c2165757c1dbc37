//! Report generation: the human-readable result tables, the line-oriented
//! structured output behind them, and the orchestration entry points the CLI
//! drives (map, simulate, validate, compare).
//!
//! Human tables print times as H:MM:SS (floored to the second) and costs
//! with two decimals; the structured records keep full micro precision so
//! the table is a pure formatting projection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::app::round_limits;
use crate::assign::{evaluate_fixed, feasible, SchedulingSolution};
use crate::bundle::ScenarioBundle;
use crate::cloud::{Pricing, VmAddress};
use crate::sim::{
    aggregate_trials, percent_difference, run_trials, Scenario, SimConfig, SimError, SimResult,
    TrialStats,
};
use crate::solver::{solve, SolveError};
use crate::units::{format_hms, format_usd, RatioMicros, TimeMicros, UsdMicros};

pub const SOLUTION_SCHEMA: &str = "fedsched.solution/1";
pub const SIM_SCHEMA: &str = "fedsched.simulation/1";

/// One row of the mapping report: a named setup with its round time, cost,
/// and signed differences against the optimal row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionRow {
    pub name: String,
    pub setup: String,
    pub makespan_us: TimeMicros,
    pub vm_costs_micro: UsdMicros,
    pub comm_costs_micro: UsdMicros,
    pub total_costs_micro: UsdMicros,
    pub objective: f64,
    /// (baseline - optimal)/baseline, percent; None on the optimal row.
    pub diff_time_pct: Option<f64>,
    pub diff_cost_pct: Option<f64>,
    pub server_vm: String,
    pub client_vms: BTreeMap<String, String>,
    /// violated constraints under the round limits, if any
    pub violations: Vec<String>,
}

/// The structured solution document written by `map --out` and read back by
/// `compare`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionDoc {
    pub schema: String,
    pub scenario: String,
    pub alpha: f64,
    pub pricing: String,
    pub rows: Vec<SolutionRow>,
}

fn describe_setup(solution: &SchedulingSolution) -> String {
    // group clients by VM for a compact setup description
    let mut by_vm: BTreeMap<&VmAddress, usize> = BTreeMap::new();
    for vm in solution.assignment.client_vm.values() {
        *by_vm.entry(vm).or_insert(0) += 1;
    }
    let clients = by_vm
        .iter()
        .map(|(vm, n)| format!("{n} clients on {vm}"))
        .collect::<Vec<_>>()
        .join(", ");
    format!("{clients}; server on {}", solution.assignment.server_vm)
}

fn row_from_solution(
    name: &str,
    solution: &SchedulingSolution,
    optimal: Option<&SchedulingSolution>,
    violations: Vec<String>,
) -> SolutionRow {
    let diffs = optimal.map(|opt| {
        (
            percent_difference(opt.makespan as f64, solution.makespan as f64).ok(),
            percent_difference(opt.total_costs as f64, solution.total_costs as f64).ok(),
        )
    });
    SolutionRow {
        name: name.to_string(),
        setup: describe_setup(solution),
        makespan_us: solution.makespan,
        vm_costs_micro: solution.vm_costs,
        comm_costs_micro: solution.comm_costs,
        total_costs_micro: solution.total_costs,
        objective: solution.objective,
        diff_time_pct: diffs.as_ref().and_then(|(t, _)| *t),
        diff_cost_pct: diffs.as_ref().and_then(|(_, c)| *c),
        server_vm: solution.assignment.server_vm.to_string(),
        client_vms: solution
            .assignment
            .client_vm
            .iter()
            .map(|(id, vm)| (id.clone(), vm.to_string()))
            .collect(),
        violations,
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MapError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Eval(#[from] crate::assign::EvalError),
}

/// Solves the bundle's scenario and evaluates every named fixed assignment
/// against the optimum.
pub fn run_map(
    bundle: &ScenarioBundle,
    alpha: Option<RatioMicros>,
    pricing: Pricing,
) -> Result<SolutionDoc, MapError> {
    let alpha = alpha.unwrap_or(bundle.app.alpha);
    let limits = round_limits(&bundle.app);
    let optimal = solve(&bundle.app, &bundle.env, &bundle.tables, &limits, alpha, pricing)?;
    let mut rows = vec![row_from_solution("optimal", &optimal, None, Vec::new())];
    for (name, assignment) in &bundle.fixed_assignments {
        let mut assignment = assignment.clone();
        assignment.pricing = pricing;
        let solution = evaluate_fixed(&assignment, &bundle.app, &bundle.env, &bundle.tables)?;
        let violations = feasible(&assignment, &bundle.app, &bundle.env, &bundle.tables, &limits)?
            .into_iter()
            .map(|v| v.to_string())
            .collect();
        rows.push(row_from_solution(name, &solution, Some(&optimal), violations));
    }
    Ok(SolutionDoc {
        schema: SOLUTION_SCHEMA.to_string(),
        scenario: bundle.name.clone(),
        alpha: alpha as f64 / 1e6,
        pricing: pricing.to_string(),
        rows,
    })
}

/// Renders the human mapping table.
pub fn render_map_table(doc: &SolutionDoc) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "scenario {}  (alpha = {}, pricing = {})\n",
        doc.scenario, doc.alpha, doc.pricing
    ));
    out.push_str(&format!(
        "{:<14} {:>10} {:>10} {:>10} {:>10}  setup\n",
        "selection", "exec time", "costs($)", "dt(%)", "dcost(%)"
    ));
    for row in &doc.rows {
        out.push_str(&format!(
            "{:<14} {:>10} {:>10} {:>10} {:>10}  {}\n",
            row.name,
            format_hms(row.makespan_us),
            format_usd(row.total_costs_micro),
            row.diff_time_pct.map_or("-".into(), |v| format!("{v:.2}")),
            row.diff_cost_pct.map_or("-".into(), |v| format!("{v:.2}")),
            row.setup,
        ));
        for v in &row.violations {
            out.push_str(&format!("{:<14} ! violates {}\n", "", v));
        }
    }
    out
}

/// Serializes a document as line-oriented JSON records: a schema header
/// followed by one record per row.
pub fn to_jsonl(doc: &SolutionDoc) -> String {
    let mut out = String::new();
    out.push_str(&serde_json::json!({"schema": doc.schema, "scenario": doc.scenario, "alpha": doc.alpha, "pricing": doc.pricing}).to_string());
    out.push('\n');
    for row in &doc.rows {
        out.push_str(&serde_json::to_string(row).expect("row serialization"));
        out.push('\n');
    }
    out
}

#[derive(Debug, thiserror::Error)]
pub enum DocError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad solution document {path}: {message}")]
    Format { path: String, message: String },
}

/// Reads a structured solution document (JSON lines) back.
pub fn read_solution_doc(path: &std::path::Path) -> Result<SolutionDoc, DocError> {
    let text = std::fs::read_to_string(path).map_err(|source| DocError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: serde_json::Value = lines
        .next()
        .ok_or_else(|| DocError::Format {
            path: path.display().to_string(),
            message: "empty document".into(),
        })
        .and_then(|l| {
            serde_json::from_str(l).map_err(|e| DocError::Format {
                path: path.display().to_string(),
                message: e.to_string(),
            })
        })?;
    let schema = header["schema"].as_str().unwrap_or_default().to_string();
    if schema != SOLUTION_SCHEMA {
        return Err(DocError::Format {
            path: path.display().to_string(),
            message: format!("unsupported schema {schema:?}"),
        });
    }
    let mut rows = Vec::new();
    for line in lines {
        rows.push(serde_json::from_str(line).map_err(|e| DocError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })?);
    }
    Ok(SolutionDoc {
        schema,
        scenario: header["scenario"].as_str().unwrap_or_default().to_string(),
        alpha: header["alpha"].as_f64().unwrap_or(f64::NAN),
        pricing: header["pricing"].as_str().unwrap_or_default().to_string(),
        rows,
    })
}

/// Row-by-row comparison of two solution documents (first row each).
pub fn render_comparison(a: &SolutionDoc, b: &SolutionDoc) -> String {
    let mut out = String::new();
    out.push_str(&format!("a: {} ({} rows)\n", a.scenario, a.rows.len()));
    out.push_str(&format!("b: {} ({} rows)\n", b.scenario, b.rows.len()));
    if let (Some(ra), Some(rb)) = (a.rows.first(), b.rows.first()) {
        let time = percent_difference(ra.makespan_us as f64, rb.makespan_us as f64);
        let cost = percent_difference(ra.total_costs_micro as f64, rb.total_costs_micro as f64);
        out.push_str(&format!(
            "exec time: {} vs {}  diff {}\n",
            format_hms(ra.makespan_us),
            format_hms(rb.makespan_us),
            time.map_or("n/a".into(), |v| format!("{v:.2}%")),
        ));
        out.push_str(&format!(
            "costs:     {} vs {}  diff {}\n",
            format_usd(ra.total_costs_micro),
            format_usd(rb.total_costs_micro),
            cost.map_or("n/a".into(), |v| format!("{v:.2}%")),
        ));
    }
    out
}

/// One cell of the simulation grid: a (scenario, k_r) combination.
#[derive(Debug, Serialize)]
pub struct SimCell {
    pub scenario: String,
    pub k_r_seconds: Option<f64>,
    pub stats: TrialStats,
    pub failed_trials: usize,
}

#[derive(Debug, Serialize)]
pub struct SimGrid {
    pub schema: String,
    pub scenario_name: String,
    pub cells: Vec<SimCell>,
    #[serde(skip)]
    pub event_logs: Vec<(String, u32, SimResult)>,
}

#[derive(Debug, thiserror::Error)]
pub enum SimulateError {
    #[error("bundle has no [sim] section and no overrides supplied")]
    MissingConfig,
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Grid overrides from the command line.
#[derive(Debug, Default, Clone)]
pub struct SimOverrides {
    pub k_r_seconds: Vec<f64>,
    pub scenarios: Vec<Scenario>,
    pub trials: Option<u32>,
    pub seed: Option<u64>,
}

/// Runs the simulation grid over the optimal mapping of the bundle.
pub fn run_simulation(
    bundle: &ScenarioBundle,
    overrides: &SimOverrides,
) -> Result<SimGrid, SimulateError> {
    let base = bundle
        .sim
        .clone()
        .or_else(|| {
            if overrides.k_r_seconds.is_empty() && overrides.scenarios.is_empty() {
                None
            } else {
                Some(SimConfig::default())
            }
        })
        .ok_or(SimulateError::MissingConfig)?;

    let doc_pricing = Pricing::OnDemand;
    let mapping = {
        let limits = round_limits(&bundle.app);
        solve(
            &bundle.app,
            &bundle.env,
            &bundle.tables,
            &limits,
            bundle.app.alpha,
            doc_pricing,
        )
        .map_err(MapError::from)?
    };

    let k_rs: Vec<Option<f64>> = if overrides.k_r_seconds.is_empty() {
        vec![base.k_r.map(|k| k as f64 / 1e6)]
    } else {
        overrides.k_r_seconds.iter().copied().map(Some).collect()
    };
    let scenarios = if overrides.scenarios.is_empty() {
        vec![base.scenario]
    } else {
        overrides.scenarios.clone()
    };

    let mut cells = Vec::new();
    let mut event_logs = Vec::new();
    for scenario in &scenarios {
        for k_r in &k_rs {
            let cfg = SimConfig {
                k_r: k_r.map(crate::units::secs_to_micros),
                scenario: *scenario,
                trials: overrides.trials.unwrap_or(base.trials),
                seed: overrides.seed.unwrap_or(base.seed),
                ..base.clone()
            };
            let outcomes = run_trials(&mapping, &bundle.app, &bundle.env, &bundle.tables, &cfg);
            let mut ok = Vec::new();
            let mut failed = 0;
            for (i, outcome) in outcomes.into_iter().enumerate() {
                match outcome {
                    Ok(r) => {
                        event_logs.push((scenario.to_string(), i as u32, r.clone()));
                        ok.push(r);
                    }
                    Err(SimError::Unrecoverable { partial, .. }) => {
                        failed += 1;
                        event_logs.push((scenario.to_string(), i as u32, *partial));
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            if ok.is_empty() {
                continue;
            }
            cells.push(SimCell {
                scenario: scenario.to_string(),
                k_r_seconds: *k_r,
                stats: aggregate_trials(&ok),
                failed_trials: failed,
            });
        }
    }
    Ok(SimGrid {
        schema: SIM_SCHEMA.to_string(),
        scenario_name: bundle.name.clone(),
        cells,
        event_logs,
    })
}

pub fn render_sim_table(grid: &SimGrid) -> String {
    let mut out = String::new();
    out.push_str(&format!("failure simulation for {}\n", grid.scenario_name));
    out.push_str(&format!(
        "{:<22} {:>10} {:>12} {:>14} {:>14} {:>8}\n",
        "scenario", "k_r(s)", "avg #revoc", "avg exec time", "avg costs($)", "trials"
    ));
    for cell in &grid.cells {
        out.push_str(&format!(
            "{:<22} {:>10} {:>12.2} {:>14} {:>14} {:>8}\n",
            cell.scenario,
            cell.k_r_seconds.map_or("off".into(), |k| format!("{k:.0}")),
            cell.stats.mean_revocations,
            format_hms((cell.stats.mean_time_secs * 1e6) as TimeMicros),
            format!("{:.2}", cell.stats.mean_cost_usd),
            cell.stats.trials,
        ));
        if cell.failed_trials > 0 {
            out.push_str(&format!(
                "{:<22} ! {} trial(s) ended unrecoverable\n",
                "", cell.failed_trials
            ));
        }
    }
    out
}

/// Line-delimited event-log export: one event per line.
pub fn render_event_logs(grid: &SimGrid) -> String {
    let mut out = String::new();
    for (scenario, trial, result) in &grid.event_logs {
        for e in &result.events {
            let (kind, detail) = match &e.kind {
                crate::sim::EventKind::RoundStart { round } => ("round_start", format!("round={round}")),
                crate::sim::EventKind::RoundEnd { round } => ("round_end", format!("round={round}")),
                crate::sim::EventKind::Checkpoint { round } => ("checkpoint", format!("round={round}")),
                crate::sim::EventKind::Revocation { task, vm } => {
                    ("revocation", format!("task={task} vm={vm}"))
                }
                crate::sim::EventKind::Replacement { task, vm } => {
                    ("replacement", format!("task={task} vm={vm}"))
                }
                crate::sim::EventKind::RecoveryComplete { round } => {
                    ("recovery_complete", format!("round={round}"))
                }
            };
            out.push_str(&format!(
                "scenario={scenario} trial={trial} t={:.6} kind={kind} {detail}\n",
                e.time as f64 / 1e6
            ));
        }
    }
    out
}

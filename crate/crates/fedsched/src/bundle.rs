//! Scenario bundle ingestion: one self-describing TOML file carries the
//! multi-cloud catalog, the FL application, slowdown tables (or the raw
//! measurements behind them), named fixed assignments used as comparison
//! baselines, and an optional simulation config.
//!
//! Field names carry explicit units (`price_per_hour`, `*_seconds`, `*_gb`);
//! the loader converts everything to the internal integer units once. When a
//! bundle carries both raw measurements and slowdown tables, the tables are
//! recomputed from the raw data (raw wins) and a mismatch beyond 0.01 is
//! reported as a warning.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::app::{ClientSpec, FlApplication, MessageProfile};
use crate::assign::Assignment;
use crate::cloud::{
    default_spot_price, validate_env, MultiCloudEnv, Pricing, ProviderSpec, Quota, RegionSpec,
    VmAddress, VmTypeSpec, Violation,
};
use crate::reschedule::RevocationPolicy;
use crate::sim::{Scenario, SimConfig};
use crate::slowdowns::{
    comm_slowdown, exec_slowdown, CommMeasurement, ExecMeasurement, ExecTable, RegionPair,
    SlowdownTables,
};
use crate::units::{gb_to_bytes, ratio_to_micros, secs_to_micros, usd_to_micros};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("unsupported format_version {found} (supported: {supported})")]
    Version { found: u32, supported: u32 },
    #[error("validation failed:\n{}", format_violations(.0))]
    Validation(Vec<Violation>),
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// A fully validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioBundle {
    pub name: String,
    pub env: MultiCloudEnv,
    pub app: FlApplication,
    pub tables: SlowdownTables,
    pub fixed_assignments: BTreeMap<String, Assignment>,
    pub sim: Option<SimConfig>,
}

/// Result of loading: the bundle plus non-fatal warnings.
#[derive(Debug)]
pub struct LoadOutcome {
    pub bundle: ScenarioBundle,
    pub warnings: Vec<String>,
}

// ---------------------------------------------------------------------------
// File schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum QuotaFile {
    Count(u64),
    Keyword(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VmTypeFile {
    id: String,
    vcpus: u64,
    #[serde(default)]
    gpus: u64,
    price_per_hour: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spot_price_per_hour: Option<f64>,
    #[serde(default)]
    aggregation_time_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RegionFile {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gpu_quota: Option<QuotaFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vcpu_quota: Option<QuotaFile>,
    #[serde(default)]
    vm_types: Vec<VmTypeFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProviderFile {
    id: String,
    transfer_cost_per_gb: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gpu_quota: Option<QuotaFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vcpu_quota: Option<QuotaFile>,
    #[serde(default)]
    regions: Vec<RegionFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MessagesFile {
    server_train_gb: f64,
    server_aggreg_gb: f64,
    client_train_gb: f64,
    client_test_gb: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ClientFile {
    id: String,
    /// "provider/region" of the dataset store
    dataset: String,
    baseline_train_seconds: f64,
    baseline_test_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ClientGroupFile {
    id_prefix: String,
    count: u32,
    dataset: String,
    baseline_train_seconds: f64,
    baseline_test_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AppFile {
    n_rounds: u32,
    #[serde(default = "default_epochs")]
    epochs_per_round: u32,
    budget: f64,
    deadline_seconds: f64,
    alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    baseline_comm_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    baseline_train_comm_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    baseline_test_comm_seconds: Option<f64>,
    messages: MessagesFile,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    clients: Vec<ClientFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    client_groups: Vec<ClientGroupFile>,
}

fn default_epochs() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ExecTableFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dataset: Option<String>,
    /// vm address -> dimensionless slowdown
    entries: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CommEntryFile {
    pair: [String; 2],
    slowdown: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ExecMeasurementFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dataset: Option<String>,
    vm: String,
    round1_train_seconds: f64,
    round1_test_seconds: f64,
    round2_train_seconds: f64,
    round2_test_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CommMeasurementFile {
    pair: [String; 2],
    train_seconds: f64,
    test_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SlowdownsFile {
    baseline_vm: String,
    baseline_pair: [String; 2],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    exec_tables: Vec<ExecTableFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    comm: Vec<CommEntryFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    exec_measurements: Vec<ExecMeasurementFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    comm_measurements: Vec<CommMeasurementFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FixedAssignmentFile {
    server: String,
    /// pattern -> vm address; patterns are exact ids, `prefix*`, or `*`
    clients: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SimFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k_r_seconds: Option<f64>,
    #[serde(default = "default_scenario")]
    scenario: Scenario,
    #[serde(default = "default_interval")]
    checkpoint_interval: u32,
    #[serde(default)]
    checkpoint_save_seconds: f64,
    #[serde(default)]
    client_checkpoint_seconds: f64,
    #[serde(default)]
    vm_prep_seconds: f64,
    #[serde(default = "default_multiplier")]
    first_round_multiplier: f64,
    #[serde(default = "default_policy")]
    revocation_policy: RevocationPolicy,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_trials")]
    trials: u32,
}

fn default_scenario() -> Scenario {
    Scenario::AllSpot
}
fn default_interval() -> u32 {
    10
}
fn default_multiplier() -> f64 {
    1.0
}
fn default_policy() -> RevocationPolicy {
    RevocationPolicy::RemoveType
}
fn default_trials() -> u32 {
    3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BundleFile {
    format_version: u32,
    #[serde(default)]
    name: String,
    providers: Vec<ProviderFile>,
    app: AppFile,
    slowdowns: SlowdownsFile,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    fixed_assignments: BTreeMap<String, FixedAssignmentFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sim: Option<SimFile>,
}

// ---------------------------------------------------------------------------
// Conversion
// ---------------------------------------------------------------------------

struct Check {
    violations: Vec<Violation>,
}

impl Check {
    fn new() -> Self {
        Self { violations: Vec::new() }
    }

    fn non_negative(&mut self, path: &str, value: f64) {
        if !value.is_finite() || value < 0.0 {
            self.violations.push(Violation {
                path: path.to_string(),
                message: format!("must be a non-negative number, got {value}"),
            });
        }
    }

    fn in_unit_interval(&mut self, path: &str, value: f64) {
        if !value.is_finite() || !(0.0..=1.0).contains(&value) {
            self.violations.push(Violation {
                path: path.to_string(),
                message: format!("must lie in [0, 1], got {value}"),
            });
        }
    }
}

fn quota(q: &Option<QuotaFile>, path: &str, check: &mut Check) -> Quota {
    match q {
        None => Quota::Unbounded,
        Some(QuotaFile::Count(n)) => Quota::Limited(*n),
        Some(QuotaFile::Keyword(s)) if s == "unbounded" => Quota::Unbounded,
        Some(QuotaFile::Keyword(s)) => {
            check.violations.push(Violation {
                path: path.to_string(),
                message: format!("unknown quota keyword {s:?} (expected \"unbounded\" or a count)"),
            });
            Quota::Unbounded
        }
    }
}

fn parse_region_key(s: &str, path: &str, check: &mut Check) -> (String, String) {
    let mut parts = s.splitn(2, '/');
    match (parts.next(), parts.next()) {
        (Some(p), Some(r)) if !p.is_empty() && !r.is_empty() => (p.to_string(), r.to_string()),
        _ => {
            check.violations.push(Violation {
                path: path.to_string(),
                message: format!("expected \"provider/region\", got {s:?}"),
            });
            (s.to_string(), String::new())
        }
    }
}

fn parse_vm_addr(s: &str, path: &str, check: &mut Check) -> VmAddress {
    match VmAddress::parse(s) {
        Some(a) => a,
        None => {
            check.violations.push(Violation {
                path: path.to_string(),
                message: format!("expected \"provider/region/vm-type\", got {s:?}"),
            });
            VmAddress::new(s, "", "")
        }
    }
}

fn convert_env(file: &BundleFile, check: &mut Check) -> MultiCloudEnv {
    let providers = file
        .providers
        .iter()
        .map(|p| {
            let ppath = format!("providers({})", p.id);
            check.non_negative(&format!("{ppath}.transfer_cost_per_gb"), p.transfer_cost_per_gb);
            ProviderSpec {
                id: p.id.clone(),
                transfer_cost_per_gb: usd_to_micros(p.transfer_cost_per_gb.max(0.0)),
                gpu_quota: quota(&p.gpu_quota, &format!("{ppath}.gpu_quota"), check),
                vcpu_quota: quota(&p.vcpu_quota, &format!("{ppath}.vcpu_quota"), check),
                regions: p
                    .regions
                    .iter()
                    .map(|r| {
                        let rpath = format!("{ppath}.regions({})", r.id);
                        RegionSpec {
                            id: r.id.clone(),
                            gpu_quota: quota(&r.gpu_quota, &format!("{rpath}.gpu_quota"), check),
                            vcpu_quota: quota(&r.vcpu_quota, &format!("{rpath}.vcpu_quota"), check),
                            vm_types: r
                                .vm_types
                                .iter()
                                .map(|v| {
                                    let vpath = format!("{rpath}.vm_types({})", v.id);
                                    check.non_negative(
                                        &format!("{vpath}.price_per_hour"),
                                        v.price_per_hour,
                                    );
                                    if let Some(s) = v.spot_price_per_hour {
                                        check.non_negative(
                                            &format!("{vpath}.spot_price_per_hour"),
                                            s,
                                        );
                                    }
                                    check.non_negative(
                                        &format!("{vpath}.aggregation_time_seconds"),
                                        v.aggregation_time_seconds,
                                    );
                                    let on_demand = usd_to_micros(v.price_per_hour.max(0.0));
                                    VmTypeSpec {
                                        id: v.id.clone(),
                                        vcpus: v.vcpus,
                                        gpus: v.gpus,
                                        on_demand_price: on_demand,
                                        spot_price: v
                                            .spot_price_per_hour
                                            .map(|s| usd_to_micros(s.max(0.0)))
                                            .unwrap_or_else(|| default_spot_price(on_demand)),
                                        aggregation_time: secs_to_micros(
                                            v.aggregation_time_seconds.max(0.0),
                                        ),
                                    }
                                })
                                .collect(),
                        }
                    })
                    .collect(),
            }
        })
        .collect();
    MultiCloudEnv { providers }
}

fn convert_app(file: &AppFile, check: &mut Check) -> FlApplication {
    check.non_negative("app.budget", file.budget);
    check.non_negative("app.deadline_seconds", file.deadline_seconds);
    check.in_unit_interval("app.alpha", file.alpha);
    for (name, v) in [
        ("server_train_gb", file.messages.server_train_gb),
        ("server_aggreg_gb", file.messages.server_aggreg_gb),
        ("client_train_gb", file.messages.client_train_gb),
        ("client_test_gb", file.messages.client_test_gb),
    ] {
        check.non_negative(&format!("app.messages.{name}"), v);
    }

    let baseline_comm = match (
        file.baseline_comm_seconds,
        file.baseline_train_comm_seconds,
        file.baseline_test_comm_seconds,
    ) {
        (Some(total), _, _) => total,
        (None, train, test) => train.unwrap_or(0.0) + test.unwrap_or(0.0),
    };
    check.non_negative("app.baseline_comm_seconds", baseline_comm);

    let mut clients = Vec::new();
    for c in &file.clients {
        let path = format!("app.clients({})", c.id);
        check.non_negative(&format!("{path}.baseline_train_seconds"), c.baseline_train_seconds);
        check.non_negative(&format!("{path}.baseline_test_seconds"), c.baseline_test_seconds);
        clients.push(ClientSpec {
            id: c.id.clone(),
            dataset_location: parse_region_key(&c.dataset, &format!("{path}.dataset"), check),
            baseline_train_time: secs_to_micros(c.baseline_train_seconds.max(0.0)),
            baseline_test_time: secs_to_micros(c.baseline_test_seconds.max(0.0)),
        });
    }
    for g in &file.client_groups {
        let width = if g.count >= 100 { 3 } else { 2 };
        for i in 1..=g.count {
            clients.push(ClientSpec {
                id: format!("{}{:0width$}", g.id_prefix, i, width = width),
                dataset_location: parse_region_key(
                    &g.dataset,
                    &format!("app.client_groups({}).dataset", g.id_prefix),
                    check,
                ),
                baseline_train_time: secs_to_micros(g.baseline_train_seconds.max(0.0)),
                baseline_test_time: secs_to_micros(g.baseline_test_seconds.max(0.0)),
            });
        }
    }

    FlApplication {
        clients,
        n_rounds: file.n_rounds,
        epochs_per_round: file.epochs_per_round,
        messages: MessageProfile {
            server_train_msg: gb_to_bytes(file.messages.server_train_gb.max(0.0)),
            server_aggreg_msg: gb_to_bytes(file.messages.server_aggreg_gb.max(0.0)),
            client_train_msg: gb_to_bytes(file.messages.client_train_gb.max(0.0)),
            client_test_msg: gb_to_bytes(file.messages.client_test_gb.max(0.0)),
        },
        budget: usd_to_micros(file.budget.max(0.0)),
        deadline: secs_to_micros(file.deadline_seconds.max(0.0)),
        alpha: ratio_to_micros(file.alpha.clamp(0.0, 1.0)),
        baseline_comm_time: secs_to_micros(baseline_comm.max(0.0)),
    }
}

fn convert_tables(
    file: &SlowdownsFile,
    check: &mut Check,
    warnings: &mut Vec<String>,
) -> SlowdownTables {
    let baseline_vm = parse_vm_addr(&file.baseline_vm, "slowdowns.baseline_vm", check);
    let baseline_pair = RegionPair::new(
        parse_region_key(&file.baseline_pair[0], "slowdowns.baseline_pair[0]", check),
        parse_region_key(&file.baseline_pair[1], "slowdowns.baseline_pair[1]", check),
    );

    // Tables as supplied.
    let mut supplied_exec: Vec<ExecTable> = Vec::new();
    for (i, t) in file.exec_tables.iter().enumerate() {
        let mut entries = BTreeMap::new();
        for (vm, sl) in &t.entries {
            let path = format!("slowdowns.exec_tables[{i}].entries({vm})");
            check.non_negative(&path, *sl);
            entries.insert(parse_vm_addr(vm, &path, check), ratio_to_micros(sl.max(0.0)));
        }
        supplied_exec.push(ExecTable {
            dataset_location: t
                .dataset
                .as_ref()
                .map(|d| parse_region_key(d, &format!("slowdowns.exec_tables[{i}].dataset"), check)),
            entries,
        });
    }
    // the two directions of a pair were measured separately; duplicate
    // entries for the same unordered pair average out
    let mut comm_samples: BTreeMap<RegionPair, Vec<u64>> = BTreeMap::new();
    for (i, c) in file.comm.iter().enumerate() {
        let path = format!("slowdowns.comm[{i}]");
        check.non_negative(&format!("{path}.slowdown"), c.slowdown);
        let pair = RegionPair::new(
            parse_region_key(&c.pair[0], &format!("{path}.pair[0]"), check),
            parse_region_key(&c.pair[1], &format!("{path}.pair[1]"), check),
        );
        comm_samples
            .entry(pair)
            .or_default()
            .push(ratio_to_micros(c.slowdown.max(0.0)));
    }
    let supplied_comm: BTreeMap<RegionPair, u64> = comm_samples
        .into_iter()
        .map(|(pair, xs)| {
            let mean = crate::units::div_round(
                xs.iter().map(|&x| x as i128).sum::<i128>(),
                xs.len() as i128,
            ) as u64;
            (pair, mean)
        })
        .collect();

    // Tables recomputed from raw measurements, when present (raw wins).
    let mut exec = supplied_exec.clone();
    if !file.exec_measurements.is_empty() {
        let mut sets: BTreeMap<Option<(String, String)>, Vec<ExecMeasurement>> = BTreeMap::new();
        for (i, m) in file.exec_measurements.iter().enumerate() {
            let path = format!("slowdowns.exec_measurements[{i}]");
            let location = m
                .dataset
                .as_ref()
                .map(|d| parse_region_key(d, &format!("{path}.dataset"), check));
            sets.entry(location).or_default().push(ExecMeasurement {
                vm: parse_vm_addr(&m.vm, &format!("{path}.vm"), check),
                round1_train: secs_to_micros(m.round1_train_seconds.max(0.0)),
                round1_test: secs_to_micros(m.round1_test_seconds.max(0.0)),
                round2_train: secs_to_micros(m.round2_train_seconds.max(0.0)),
                round2_test: secs_to_micros(m.round2_test_seconds.max(0.0)),
            });
        }
        exec = Vec::new();
        for (location, set) in sets {
            let Some(baseline) = set.iter().find(|m| m.vm == baseline_vm) else {
                check.violations.push(Violation {
                    path: "slowdowns.exec_measurements".into(),
                    message: format!(
                        "measurement set {:?} lacks the baseline VM {}",
                        location, baseline_vm
                    ),
                });
                continue;
            };
            let mut entries = BTreeMap::new();
            for m in &set {
                match exec_slowdown(m, baseline) {
                    Ok(sl) => {
                        entries.insert(m.vm.clone(), sl);
                    }
                    Err(e) => check.violations.push(Violation {
                        path: "slowdowns.exec_measurements".into(),
                        message: e.to_string(),
                    }),
                }
            }
            exec.push(ExecTable {
                dataset_location: location,
                entries,
            });
        }
        compare_exec_tables(&supplied_exec, &exec, warnings);
    }

    let mut comm = supplied_comm.clone();
    if !file.comm_measurements.is_empty() {
        let measurements: Vec<CommMeasurement> = file
            .comm_measurements
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let path = format!("slowdowns.comm_measurements[{i}]");
                CommMeasurement {
                    region_pair: RegionPair::new(
                        parse_region_key(&m.pair[0], &format!("{path}.pair[0]"), check),
                        parse_region_key(&m.pair[1], &format!("{path}.pair[1]"), check),
                    ),
                    train_time: secs_to_micros(m.train_seconds.max(0.0)),
                    test_time: secs_to_micros(m.test_seconds.max(0.0)),
                }
            })
            .collect();
        // average both measured directions of each pair
        let mut merged: BTreeMap<RegionPair, Vec<&CommMeasurement>> = BTreeMap::new();
        for m in &measurements {
            merged.entry(m.region_pair.clone()).or_default().push(m);
        }
        let averaged: Vec<CommMeasurement> = merged
            .into_iter()
            .map(|(pair, ms)| CommMeasurement {
                region_pair: pair,
                train_time: crate::units::div_round(
                    ms.iter().map(|m| m.train_time as i128).sum::<i128>(),
                    ms.len() as i128,
                ) as i64,
                test_time: crate::units::div_round(
                    ms.iter().map(|m| m.test_time as i128).sum::<i128>(),
                    ms.len() as i128,
                ) as i64,
            })
            .collect();
        if let Some(baseline) = averaged.iter().find(|m| m.region_pair == baseline_pair) {
            comm = BTreeMap::new();
            for m in &averaged {
                match comm_slowdown(m, baseline) {
                    Ok(sl) => {
                        comm.insert(m.region_pair.clone(), sl);
                    }
                    Err(e) => check.violations.push(Violation {
                        path: "slowdowns.comm_measurements".into(),
                        message: e.to_string(),
                    }),
                }
            }
            for (pair, supplied) in &supplied_comm {
                if let Some(recomputed) = comm.get(pair) {
                    if supplied.abs_diff(*recomputed) > 10_000 {
                        warnings.push(format!(
                            "comm slowdown for {:?} differs from raw measurements: {} vs {}",
                            pair.sides(),
                            *supplied as f64 / 1e6,
                            *recomputed as f64 / 1e6,
                        ));
                    }
                }
            }
        } else {
            check.violations.push(Violation {
                path: "slowdowns.comm_measurements".into(),
                message: "measurements lack the baseline region pair".into(),
            });
        }
    }

    if exec.is_empty() {
        check.violations.push(Violation {
            path: "slowdowns".into(),
            message: "no execution slowdowns supplied (tables or measurements required)".into(),
        });
    }
    if comm.is_empty() {
        check.violations.push(Violation {
            path: "slowdowns".into(),
            message: "no communication slowdowns supplied (tables or measurements required)".into(),
        });
    }

    SlowdownTables {
        exec,
        comm,
        baseline_vm,
        baseline_pair,
    }
}

fn compare_exec_tables(supplied: &[ExecTable], recomputed: &[ExecTable], warnings: &mut Vec<String>) {
    for s in supplied {
        let Some(r) = recomputed
            .iter()
            .find(|r| r.dataset_location == s.dataset_location)
        else {
            continue;
        };
        for (vm, sl) in &s.entries {
            if let Some(rsl) = r.entries.get(vm) {
                if sl.abs_diff(*rsl) > 10_000 {
                    warnings.push(format!(
                        "exec slowdown for {} differs from raw measurements: {} vs {}",
                        vm,
                        *sl as f64 / 1e6,
                        *rsl as f64 / 1e6,
                    ));
                }
            }
        }
    }
}

/// Resolves a client id against the pattern map: exact id first, then the
/// longest `prefix*` pattern, then `*`.
fn resolve_pattern<'a>(
    patterns: &'a BTreeMap<String, String>,
    client_id: &str,
) -> Option<&'a String> {
    if let Some(v) = patterns.get(client_id) {
        return Some(v);
    }
    let mut best: Option<(&String, usize)> = None;
    for (pattern, v) in patterns {
        if let Some(prefix) = pattern.strip_suffix('*') {
            if client_id.starts_with(prefix) {
                let len = prefix.len();
                if best.is_none_or(|(_, l)| len > l) {
                    best = Some((v, len));
                }
            }
        }
    }
    best.map(|(v, _)| v)
}

fn convert_assignments(
    file: &BTreeMap<String, FixedAssignmentFile>,
    app: &FlApplication,
    check: &mut Check,
) -> BTreeMap<String, Assignment> {
    let mut out = BTreeMap::new();
    for (name, a) in file {
        let path = format!("fixed_assignments({name})");
        let server = parse_vm_addr(&a.server, &format!("{path}.server"), check);
        let mut client_vm = BTreeMap::new();
        for c in &app.clients {
            match resolve_pattern(&a.clients, &c.id) {
                Some(addr) => {
                    client_vm.insert(
                        c.id.clone(),
                        parse_vm_addr(addr, &format!("{path}.clients({})", c.id), check),
                    );
                }
                None => check.violations.push(Violation {
                    path: format!("{path}.clients"),
                    message: format!("no pattern matches client {}", c.id),
                }),
            }
        }
        out.insert(
            name.clone(),
            Assignment {
                client_vm,
                server_vm: server,
                pricing: Pricing::OnDemand,
            },
        );
    }
    out
}

fn convert_sim(file: &SimFile, check: &mut Check) -> SimConfig {
    if let Some(k) = file.k_r_seconds {
        check.non_negative("sim.k_r_seconds", k);
    }
    check.non_negative("sim.checkpoint_save_seconds", file.checkpoint_save_seconds);
    check.non_negative("sim.client_checkpoint_seconds", file.client_checkpoint_seconds);
    check.non_negative("sim.vm_prep_seconds", file.vm_prep_seconds);
    check.non_negative("sim.first_round_multiplier", file.first_round_multiplier);
    if file.checkpoint_interval == 0 {
        check.violations.push(Violation {
            path: "sim.checkpoint_interval".into(),
            message: "checkpoint interval must be >= 1".into(),
        });
    }
    if file.trials == 0 {
        check.violations.push(Violation {
            path: "sim.trials".into(),
            message: "trial count must be >= 1".into(),
        });
    }
    SimConfig {
        k_r: file
            .k_r_seconds
            .filter(|k| *k > 0.0)
            .map(secs_to_micros),
        scenario: file.scenario,
        checkpoint_interval: file.checkpoint_interval.max(1),
        checkpoint_save_time: secs_to_micros(file.checkpoint_save_seconds.max(0.0)),
        client_checkpoint_time: secs_to_micros(file.client_checkpoint_seconds.max(0.0)),
        vm_prep_time: secs_to_micros(file.vm_prep_seconds.max(0.0)),
        first_round_multiplier: ratio_to_micros(file.first_round_multiplier.max(0.0)),
        revocation_policy: file.revocation_policy,
        seed: file.seed,
        trials: file.trials.max(1),
    }
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

/// Parses and fully validates a bundle file. Parsing failures, version
/// mismatches, and validation violations are errors; slowdown-table
/// mismatches against raw measurements and tables missing catalog VMs are
/// warnings.
pub fn load_bundle(path: &Path) -> Result<LoadOutcome, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_bundle_str(&text, &path.display().to_string())
}

pub fn load_bundle_str(text: &str, origin: &str) -> Result<LoadOutcome, LoadError> {
    let file: BundleFile = toml::from_str(text).map_err(|e| LoadError::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    if file.format_version != FORMAT_VERSION {
        return Err(LoadError::Version {
            found: file.format_version,
            supported: FORMAT_VERSION,
        });
    }

    let mut check = Check::new();
    let mut warnings = Vec::new();
    let env = convert_env(&file, &mut check);
    let app = convert_app(&file.app, &mut check);
    let tables = convert_tables(&file.slowdowns, &mut check, &mut warnings);
    let fixed_assignments = convert_assignments(&file.fixed_assignments, &app, &mut check);
    let sim = file.sim.as_ref().map(|s| convert_sim(s, &mut check));

    check.violations.extend(validate_env(&env));
    check.violations.extend(crate::app::validate_app(&app, &env));
    // fixed assignments must resolve against the catalog
    for (name, a) in &fixed_assignments {
        for addr in a.client_vm.values().chain(std::iter::once(&a.server_vm)) {
            if env.resolve(addr).is_err() {
                check.violations.push(Violation {
                    path: format!("fixed_assignments({name})"),
                    message: format!("unresolvable VM address {addr}"),
                });
            }
        }
    }
    if !check.violations.is_empty() {
        return Err(LoadError::Validation(check.violations));
    }

    // lazy strictness: a VM without a slowdown is only a warning until a
    // solve actually needs it
    for addr in env.vm_addresses() {
        let covered = tables.exec.iter().any(|t| t.entries.contains_key(&addr));
        if !covered {
            warnings.push(format!(
                "VM {addr} has no execution slowdown; it can only host the server"
            ));
        }
    }

    let name = if file.name.is_empty() {
        Path::new(origin)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into())
    } else {
        file.name.clone()
    };

    Ok(LoadOutcome {
        bundle: ScenarioBundle {
            name,
            env,
            app,
            tables,
            fixed_assignments,
            sim,
        },
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Serialization back out
// ---------------------------------------------------------------------------

fn quota_to_file(q: Quota) -> Option<QuotaFile> {
    match q {
        Quota::Unbounded => Some(QuotaFile::Keyword("unbounded".into())),
        Quota::Limited(n) => Some(QuotaFile::Count(n)),
    }
}

/// Serializes a bundle back to canonical TOML. The output re-loads to a
/// semantically identical bundle (spot prices and recomputed slowdown tables
/// become explicit).
pub fn save_bundle(bundle: &ScenarioBundle) -> String {
    let file = BundleFile {
        format_version: FORMAT_VERSION,
        name: bundle.name.clone(),
        providers: bundle
            .env
            .providers
            .iter()
            .map(|p| ProviderFile {
                id: p.id.clone(),
                transfer_cost_per_gb: p.transfer_cost_per_gb as f64 / 1e6,
                gpu_quota: quota_to_file(p.gpu_quota),
                vcpu_quota: quota_to_file(p.vcpu_quota),
                regions: p
                    .regions
                    .iter()
                    .map(|r| RegionFile {
                        id: r.id.clone(),
                        gpu_quota: quota_to_file(r.gpu_quota),
                        vcpu_quota: quota_to_file(r.vcpu_quota),
                        vm_types: r
                            .vm_types
                            .iter()
                            .map(|v| VmTypeFile {
                                id: v.id.clone(),
                                vcpus: v.vcpus,
                                gpus: v.gpus,
                                price_per_hour: v.on_demand_price as f64 / 1e6,
                                spot_price_per_hour: Some(v.spot_price as f64 / 1e6),
                                aggregation_time_seconds: v.aggregation_time as f64 / 1e6,
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect(),
        app: AppFile {
            n_rounds: bundle.app.n_rounds,
            epochs_per_round: bundle.app.epochs_per_round,
            budget: bundle.app.budget as f64 / 1e6,
            deadline_seconds: bundle.app.deadline as f64 / 1e6,
            alpha: bundle.app.alpha as f64 / 1e6,
            baseline_comm_seconds: Some(bundle.app.baseline_comm_time as f64 / 1e6),
            baseline_train_comm_seconds: None,
            baseline_test_comm_seconds: None,
            messages: MessagesFile {
                server_train_gb: bundle.app.messages.server_train_msg as f64 / 1e9,
                server_aggreg_gb: bundle.app.messages.server_aggreg_msg as f64 / 1e9,
                client_train_gb: bundle.app.messages.client_train_msg as f64 / 1e9,
                client_test_gb: bundle.app.messages.client_test_msg as f64 / 1e9,
            },
            clients: bundle
                .app
                .clients
                .iter()
                .map(|c| ClientFile {
                    id: c.id.clone(),
                    dataset: format!("{}/{}", c.dataset_location.0, c.dataset_location.1),
                    baseline_train_seconds: c.baseline_train_time as f64 / 1e6,
                    baseline_test_seconds: c.baseline_test_time as f64 / 1e6,
                })
                .collect(),
            client_groups: Vec::new(),
        },
        slowdowns: SlowdownsFile {
            baseline_vm: bundle.tables.baseline_vm.to_string(),
            baseline_pair: {
                let (a, b) = bundle.tables.baseline_pair.sides();
                [format!("{}/{}", a.0, a.1), format!("{}/{}", b.0, b.1)]
            },
            exec_tables: bundle
                .tables
                .exec
                .iter()
                .map(|t| ExecTableFile {
                    dataset: t
                        .dataset_location
                        .as_ref()
                        .map(|(p, r)| format!("{p}/{r}")),
                    entries: t
                        .entries
                        .iter()
                        .map(|(vm, sl)| (vm.to_string(), *sl as f64 / 1e6))
                        .collect(),
                })
                .collect(),
            comm: bundle
                .tables
                .comm
                .iter()
                .map(|(pair, sl)| {
                    let (a, b) = pair.sides();
                    CommEntryFile {
                        pair: [format!("{}/{}", a.0, a.1), format!("{}/{}", b.0, b.1)],
                        slowdown: *sl as f64 / 1e6,
                    }
                })
                .collect(),
            exec_measurements: Vec::new(),
            comm_measurements: Vec::new(),
        },
        fixed_assignments: bundle
            .fixed_assignments
            .iter()
            .map(|(name, a)| {
                (
                    name.clone(),
                    FixedAssignmentFile {
                        server: a.server_vm.to_string(),
                        clients: a
                            .client_vm
                            .iter()
                            .map(|(id, vm)| (id.clone(), vm.to_string()))
                            .collect(),
                    },
                )
            })
            .collect(),
        sim: bundle.sim.as_ref().map(|s| SimFile {
            k_r_seconds: s.k_r.map(|k| k as f64 / 1e6),
            scenario: s.scenario,
            checkpoint_interval: s.checkpoint_interval,
            checkpoint_save_seconds: s.checkpoint_save_time as f64 / 1e6,
            client_checkpoint_seconds: s.client_checkpoint_time as f64 / 1e6,
            vm_prep_seconds: s.vm_prep_time as f64 / 1e6,
            first_round_multiplier: s.first_round_multiplier as f64 / 1e6,
            revocation_policy: s.revocation_policy,
            seed: s.seed,
            trials: s.trials,
        }),
    };
    toml::to_string_pretty(&file).expect("bundle serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
format_version = 1
name = "minimal"

[[providers]]
id = "p1"
transfer_cost_per_gb = 0.09

  [[providers.regions]]
  id = "r1"
  vcpu_quota = 16

    [[providers.regions.vm_types]]
    id = "v1"
    vcpus = 8
    gpus = 1
    price_per_hour = 0.752
    aggregation_time_seconds = 0.3

    [[providers.regions.vm_types]]
    id = "v2"
    vcpus = 4
    price_per_hour = 0.10
    aggregation_time_seconds = 0.3

[app]
n_rounds = 2
epochs_per_round = 5
budget = 100.0
deadline_seconds = 2000.0
alpha = 0.5
baseline_comm_seconds = 10.0

[app.messages]
server_train_gb = 0.5
server_aggreg_gb = 0.5
client_train_gb = 0.5
client_test_gb = 0.000002

[[app.clients]]
id = "c1"
dataset = "p1/r1"
baseline_train_seconds = 100.0
baseline_test_seconds = 20.0

[slowdowns]
baseline_vm = "p1/r1/v1"
baseline_pair = ["p1/r1", "p1/r1"]

[[slowdowns.exec_tables]]
entries = { "p1/r1/v1" = 1.0 }

[[slowdowns.comm]]
pair = ["p1/r1", "p1/r1"]
slowdown = 1.0

[fixed_assignments.by-hand]
server = "p1/r1/v2"
clients = { "*" = "p1/r1/v1" }
"#;

    #[test]
    fn minimal_bundle_loads() {
        let outcome = load_bundle_str(MINIMAL, "minimal.toml").unwrap();
        let b = outcome.bundle;
        assert_eq!(b.name, "minimal");
        assert_eq!(b.env.vm_count(), 2);
        assert_eq!(b.app.clients.len(), 1);
        assert_eq!(b.app.alpha, 500_000);
        assert_eq!(b.fixed_assignments.len(), 1);
        let a = &b.fixed_assignments["by-hand"];
        assert_eq!(a.client_vm["c1"], VmAddress::new("p1", "r1", "v1"));
        // v2 has no slowdown -> server-only warning
        assert!(outcome.warnings.iter().any(|w| w.contains("p1/r1/v2")));
    }

    #[test]
    fn alpha_out_of_range_names_the_field() {
        let text = MINIMAL.replace("alpha = 0.5", "alpha = 1.5");
        let err = load_bundle_str(&text, "x.toml").unwrap_err();
        match err {
            LoadError::Validation(violations) => {
                assert!(violations.iter().any(|v| v.path.contains("alpha")), "{violations:?}");
            }
            other => panic!("expected validation failure, got {other}"),
        }
    }

    #[test]
    fn parse_error_is_distinguished() {
        let err = load_bundle_str("not really toml [", "x.toml").unwrap_err();
        assert!(matches!(err, LoadError::Parse { .. }));
    }

    #[test]
    fn raw_measurements_win_and_mismatches_warn() {
        let extra = r#"
[[slowdowns.exec_measurements]]
vm = "p1/r1/v1"
round1_train_seconds = 10.0
round1_test_seconds = 1.0
round2_train_seconds = 8.0
round2_test_seconds = 1.0

[[slowdowns.exec_measurements]]
vm = "p1/r1/v2"
round1_train_seconds = 10.0
round1_test_seconds = 1.0
round2_train_seconds = 17.0
round2_test_seconds = 1.0
"#;
        // supplied table says v1 = 1.0 (consistent); v2 absent from tables
        let text = format!("{MINIMAL}\n{extra}");
        let outcome = load_bundle_str(&text, "x.toml").unwrap();
        let sl = outcome
            .bundle
            .tables
            .exec_slowdown_for(&("p1".into(), "r1".into()), &VmAddress::new("p1", "r1", "v2"))
            .unwrap();
        assert_eq!(sl, 2_000_000); // 18/9

        // now make the supplied table disagree with the measurements
        let text = text.replace("entries = { \"p1/r1/v1\" = 1.0 }", "entries = { \"p1/r1/v1\" = 1.2 }");
        let outcome = load_bundle_str(&text, "x.toml").unwrap();
        assert!(outcome
            .warnings
            .iter()
            .any(|w| w.contains("differs from raw measurements")));
        // and the recomputed (raw) value is the one in force
        let sl = outcome
            .bundle
            .tables
            .exec_slowdown_for(&("p1".into(), "r1".into()), &VmAddress::new("p1", "r1", "v1"))
            .unwrap();
        assert_eq!(sl, 1_000_000);
    }

    #[test]
    fn duplicate_comm_pairs_average() {
        let extra = r#"
[[slowdowns.comm]]
pair = ["p1/r1", "p1/r2"]
slowdown = 2.0

[[slowdowns.comm]]
pair = ["p1/r2", "p1/r1"]
slowdown = 4.0
"#;
        let second_region = "  [[providers.regions]]\n  id = \"r2\"\n";
        let text = format!("{MINIMAL}\n{extra}").replace("[app]\n", &format!("{second_region}\n[app]\n"));
        let outcome = load_bundle_str(&text, "x.toml").unwrap();
        let sl = outcome
            .bundle
            .tables
            .comm_slowdown_for(&("p1".into(), "r1".into()), &("p1".into(), "r2".into()))
            .unwrap();
        assert_eq!(sl, 3_000_000); // mean of the two measured directions
    }

    #[test]
    fn bundle_round_trips_through_save() {
        let outcome = load_bundle_str(MINIMAL, "minimal.toml").unwrap();
        let text = save_bundle(&outcome.bundle);
        let reloaded = load_bundle_str(&text, "minimal.toml").unwrap();
        assert_eq!(outcome.bundle, reloaded.bundle);
    }
}

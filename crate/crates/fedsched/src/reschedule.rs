//! Replacement selection after a spot-VM revocation.
//!
//! A revocation hands the faulty task (the server or one client) to a greedy
//! selector: every admissible VM is scored by re-computing the round
//! makespan and financial cost it would produce against the *current* map,
//! then weighting both through the same normalized objective the initial
//! mapping used. The revoked VM leaves that task's candidate set
//! persistently under the default remove policy; the retain policy keeps it
//! (reservation-style platforms allow relaunching the same instance type).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::app::FlApplication;
use crate::assign::{
    comm_cost_pair, objective_key, Assignment, EvalError, NormalizationConstants,
};
use crate::cloud::{MultiCloudEnv, VmAddress};
use crate::slowdowns::{expected_comm_time, expected_exec_time, SlowdownTables};
use crate::units::{charge, RatioMicros, TimeMicros, UsdMicros};

/// The task a revocation hit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskRef {
    Server,
    Client(String),
}

impl std::fmt::Display for TaskRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TaskRef::Server => write!(f, "server"),
            TaskRef::Client(id) => write!(f, "client:{id}"),
        }
    }
}

/// What happens to the revoked instance type in the task's candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevocationPolicy {
    /// Commercial-cloud behavior: the type cannot be relaunched in that
    /// region right away, so it leaves the set.
    RemoveType,
    /// Reservation-style behavior: the same type may be relaunched.
    RetainType,
}

/// A revocation observed by the monitor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevocationEvent {
    pub task: TaskRef,
    pub revoked_vm: VmAddress,
    pub time: TimeMicros,
}

/// Per-task pools of admissible VM addresses. Each task owns its pool:
/// removing a type for one task leaves every other task's pool untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    server: BTreeSet<VmAddress>,
    clients: BTreeMap<String, BTreeSet<VmAddress>>,
}

impl CandidateSet {
    /// Initial pools: every catalog VM for the server; for each client,
    /// every VM that has an execution slowdown for its dataset location.
    pub fn full(env: &MultiCloudEnv, app: &FlApplication, tables: &SlowdownTables) -> Self {
        let all: BTreeSet<VmAddress> = env.vm_addresses().collect();
        let clients = app
            .clients
            .iter()
            .map(|c| {
                let admissible = all
                    .iter()
                    .filter(|a| tables.exec_slowdown_for(&c.dataset_location, a).is_ok())
                    .cloned()
                    .collect();
                (c.id.clone(), admissible)
            })
            .collect();
        Self { server: all, clients }
    }

    pub fn for_task(&self, task: &TaskRef) -> Option<&BTreeSet<VmAddress>> {
        match task {
            TaskRef::Server => Some(&self.server),
            TaskRef::Client(id) => self.clients.get(id),
        }
    }

    fn for_task_mut(&mut self, task: &TaskRef) -> Option<&mut BTreeSet<VmAddress>> {
        match task {
            TaskRef::Server => Some(&mut self.server),
            TaskRef::Client(id) => self.clients.get_mut(id),
        }
    }

    pub fn remove(&mut self, task: &TaskRef, vm: &VmAddress) {
        if let Some(set) = self.for_task_mut(task) {
            set.remove(vm);
        }
    }
}

/// Returns the candidate set with the revoked address retained: the
/// retain-policy variant of the pre-selection step.
pub fn reallow_same_type(candidates: &CandidateSet, _revoked: &VmAddress) -> CandidateSet {
    candidates.clone()
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum ReplanError {
    #[error("task {task} has no remaining candidate VM")]
    UnrecoverableTask { task: String },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Round makespan if `task` moved onto `candidate_vm` while every other task
/// kept its current VM.
pub fn recompute_makespan(
    task: &TaskRef,
    candidate_vm: &VmAddress,
    current_map: &Assignment,
    app: &FlApplication,
    tables: &SlowdownTables,
    env: &MultiCloudEnv,
) -> Result<TimeMicros, ReplanError> {
    let candidate = env.resolve(candidate_vm).map_err(EvalError::Cloud)?;
    let mut makespan: TimeMicros = 0;
    match task {
        TaskRef::Server => {
            let aggreg = candidate.vm.aggregation_time;
            let server_region = candidate_vm.region_key();
            for client in &app.clients {
                let vm = &current_map.client_vm[&client.id];
                let exec = expected_exec_time(client, vm, tables).map_err(EvalError::from)?;
                let comm = expected_comm_time(&vm.region_key(), &server_region, app, tables)
                    .map_err(EvalError::from)?;
                makespan = makespan.max(exec + comm + aggreg);
            }
        }
        TaskRef::Client(faulty) => {
            let server_vm = env
                .resolve(&current_map.server_vm)
                .map_err(EvalError::Cloud)?;
            let aggreg = server_vm.vm.aggregation_time;
            let server_region = current_map.server_vm.region_key();
            for client in &app.clients {
                let vm = if &client.id == faulty {
                    candidate_vm
                } else {
                    &current_map.client_vm[&client.id]
                };
                let exec = expected_exec_time(client, vm, tables).map_err(EvalError::from)?;
                let comm = expected_comm_time(&vm.region_key(), &server_region, app, tables)
                    .map_err(EvalError::from)?;
                makespan = makespan.max(exec + comm + aggreg);
            }
        }
    }
    Ok(makespan)
}

/// Round cost if `task` moved onto `candidate_vm`: every task's price times
/// the makespan, plus each client's message-exchange cost against whichever
/// VM serves as the server in the hypothetical map.
pub fn recompute_cost(
    task: &TaskRef,
    candidate_vm: &VmAddress,
    makespan: TimeMicros,
    current_map: &Assignment,
    app: &FlApplication,
    env: &MultiCloudEnv,
) -> Result<UsdMicros, ReplanError> {
    let server_vm = match task {
        TaskRef::Server => candidate_vm,
        TaskRef::Client(_) => &current_map.server_vm,
    };
    let server_provider = server_vm.provider.clone();
    let mut price_sum = env
        .resolve(server_vm)
        .map_err(EvalError::Cloud)?
        .price(current_map.pricing);
    let mut comm_sum: UsdMicros = 0;
    for client in &app.clients {
        let vm = match task {
            TaskRef::Client(faulty) if &client.id == faulty => candidate_vm,
            _ => &current_map.client_vm[&client.id],
        };
        price_sum += env.resolve(vm).map_err(EvalError::Cloud)?.price(current_map.pricing);
        comm_sum += comm_cost_pair(&vm.provider, &server_provider, &app.messages, env)
            .map_err(EvalError::Cloud)?;
    }
    Ok(charge(price_sum, makespan) + comm_sum)
}

/// Removes the revoked VM from the task's pool (under the remove policy) and
/// returns the candidate minimizing the weighted normalized objective, with
/// ties broken by address. The pool mutation persists in `candidates`.
#[allow(clippy::too_many_arguments)]
pub fn select_replacement(
    task: &TaskRef,
    candidates: &mut CandidateSet,
    revoked: &VmAddress,
    current_map: &Assignment,
    app: &FlApplication,
    tables: &SlowdownTables,
    env: &MultiCloudEnv,
    norms: &NormalizationConstants,
    alpha: RatioMicros,
    policy: RevocationPolicy,
) -> Result<VmAddress, ReplanError> {
    if policy == RevocationPolicy::RemoveType {
        candidates.remove(task, revoked);
    }
    let pool = candidates
        .for_task(task)
        .ok_or_else(|| ReplanError::UnrecoverableTask { task: task.to_string() })?;
    let mut best: Option<(i128, VmAddress)> = None;
    for vm in pool {
        let makespan = recompute_makespan(task, vm, current_map, app, tables, env)?;
        let cost = recompute_cost(task, vm, makespan, current_map, app, env)?;
        let key = objective_key(cost, makespan, norms, alpha);
        if best.as_ref().is_none_or(|(k, a)| (key, vm) < (*k, a)) {
            best = Some((key, vm.clone()));
        }
    }
    best.map(|(_, vm)| vm)
        .ok_or_else(|| ReplanError::UnrecoverableTask { task: task.to_string() })
}

/// Re-scores every remaining candidate; used by tests to confirm the
/// selection attains the minimum.
#[allow(clippy::too_many_arguments)]
pub fn score_candidates(
    task: &TaskRef,
    candidates: &CandidateSet,
    current_map: &Assignment,
    app: &FlApplication,
    tables: &SlowdownTables,
    env: &MultiCloudEnv,
    norms: &NormalizationConstants,
    alpha: RatioMicros,
) -> Result<Vec<(VmAddress, i128)>, ReplanError> {
    let pool = candidates
        .for_task(task)
        .ok_or_else(|| ReplanError::UnrecoverableTask { task: task.to_string() })?;
    let mut out = Vec::new();
    for vm in pool {
        let makespan = recompute_makespan(task, vm, current_map, app, tables, env)?;
        let cost = recompute_cost(task, vm, makespan, current_map, app, env)?;
        out.push((vm.clone(), objective_key(cost, makespan, norms, alpha)));
    }
    Ok(out)
}

//! Assignment evaluation: message costs, VM costs, round makespan,
//! normalization constants, the weighted objective, and feasibility checks.
//!
//! Every quantity is integer micro-units; the objective is compared through
//! an exact integer key so the solver and the brute-force oracle rank
//! candidates identically on every platform.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::app::{FlApplication, MessageProfile, RoundLimits};
use crate::cloud::{
    capacity_usage, CloudError, FlatCatalog, MultiCloudEnv, Pricing, Quota, VmAddress,
};
use crate::slowdowns::{expected_comm_time, expected_exec_time, SlowdownError, SlowdownTables};
use crate::units::{charge, div_round, RatioMicros, TimeMicros, UsdMicros, MICROS_PER_UNIT};

/// Per-client (execution, communication) time breakdown.
pub type PerClientTimes = BTreeMap<String, (TimeMicros, TimeMicros)>;

/// A complete placement: one VM per client plus one for the server. The
/// one-VM-per-task constraints hold by construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub client_vm: BTreeMap<String, VmAddress>,
    pub server_vm: VmAddress,
    pub pricing: Pricing,
}

impl Assignment {
    /// VM prices of all tasks (clients plus server) summed, micro-$/hour.
    pub fn price_sum(&self, env: &MultiCloudEnv) -> Result<UsdMicros, CloudError> {
        let mut total = 0;
        for addr in self.client_vm.values().chain(std::iter::once(&self.server_vm)) {
            total += env.resolve(addr)?.price(self.pricing);
        }
        Ok(total)
    }
}

/// Normalization constants that put cost and makespan on a shared 0-1 scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationConstants {
    pub t_max: TimeMicros,
    pub cost_max: UsdMicros,
}

/// Fully evaluated placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulingSolution {
    pub assignment: Assignment,
    pub makespan: TimeMicros,
    pub vm_costs: UsdMicros,
    pub comm_costs: UsdMicros,
    pub total_costs: UsdMicros,
    pub objective: f64,
    /// client id -> (execution time, communication time)
    pub per_client_times: PerClientTimes,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error(transparent)]
    Slowdown(#[from] SlowdownError),
}

/// Cost of exchanging one round of FL messages between a client hosted in
/// `client_provider` and the server hosted in `server_provider`: server
/// messages pay the server provider's egress rate, client messages the
/// client's.
pub fn comm_cost_pair(
    client_provider: &str,
    server_provider: &str,
    messages: &MessageProfile,
    env: &MultiCloudEnv,
) -> Result<UsdMicros, CloudError> {
    let client_rate = env
        .provider(client_provider)
        .ok_or_else(|| CloudError::UnresolvableAddress(client_provider.to_string()))?
        .transfer_cost_per_gb;
    let server_rate = env
        .provider(server_provider)
        .ok_or_else(|| CloudError::UnresolvableAddress(server_provider.to_string()))?
        .transfer_cost_per_gb;
    Ok(comm_cost_from_rates(messages, client_rate, server_rate))
}

/// Same computation from pre-resolved per-GB rates (micro-$ per GB).
pub fn comm_cost_from_rates(
    messages: &MessageProfile,
    client_rate: UsdMicros,
    server_rate: UsdMicros,
) -> UsdMicros {
    let server_part = div_round(
        messages.server_bytes() as i128 * server_rate as i128,
        1_000_000_000,
    );
    let client_part = div_round(
        messages.client_bytes() as i128 * client_rate as i128,
        1_000_000_000,
    );
    (server_part + client_part) as UsdMicros
}

/// Total VM hiring cost of a round: every task's VM runs for the whole
/// round, so each price multiplies the makespan.
pub fn vm_costs(
    assignment: &Assignment,
    makespan: TimeMicros,
    env: &MultiCloudEnv,
) -> Result<UsdMicros, CloudError> {
    Ok(charge(assignment.price_sum(env)?, makespan))
}

/// Message costs summed over all client-server pairs plus the VM costs.
/// Returns (vm, comm, total).
pub fn total_costs(
    assignment: &Assignment,
    makespan: TimeMicros,
    app: &FlApplication,
    env: &MultiCloudEnv,
) -> Result<(UsdMicros, UsdMicros, UsdMicros), CloudError> {
    let vm = vm_costs(assignment, makespan, env)?;
    let mut comm = 0;
    for addr in assignment.client_vm.values() {
        comm += comm_cost_pair(
            &addr.provider,
            &assignment.server_vm.provider,
            &app.messages,
            env,
        )?;
    }
    Ok((vm, comm, vm + comm))
}

/// Round makespan: the slowest client's execution plus communication time,
/// plus the server's aggregation time. Returns the makespan together with
/// the per-client breakdown.
pub fn round_makespan(
    assignment: &Assignment,
    app: &FlApplication,
    tables: &SlowdownTables,
    env: &MultiCloudEnv,
) -> Result<(TimeMicros, PerClientTimes), EvalError> {
    let server = env.resolve(&assignment.server_vm)?;
    let aggreg = server.vm.aggregation_time;
    let server_region = assignment.server_vm.region_key();
    let mut per_client = BTreeMap::new();
    let mut makespan = 0;
    for client in &app.clients {
        let addr = assignment
            .client_vm
            .get(&client.id)
            .ok_or_else(|| CloudError::UnresolvableAddress(format!("client {}", client.id)))?;
        env.resolve(addr)?;
        let exec = expected_exec_time(client, addr, tables)?;
        let comm = expected_comm_time(&addr.region_key(), &server_region, app, tables)?;
        makespan = makespan.max(exec + comm + aggreg);
        per_client.insert(client.id.clone(), (exec, comm));
    }
    Ok((makespan + if app.clients.is_empty() { aggreg } else { 0 }, per_client))
}

/// Largest per-round time any client could take over every (client VM,
/// server VM) combination, capped at the per-round deadline, and the cost of
/// hiring the most expensive VM for that long for every task plus the most
/// expensive message exchange for every client.
pub fn normalization(
    app: &FlApplication,
    env: &MultiCloudEnv,
    tables: &SlowdownTables,
    limits: &RoundLimits,
) -> Result<NormalizationConstants, EvalError> {
    let catalog = FlatCatalog::new(env);
    let mut t_max: TimeMicros = 0;
    for client in &app.clients {
        for server in &catalog.vms {
            let server_region = server.addr.region_key();
            for vm in &catalog.vms {
                let Ok(sl) = tables.exec_slowdown_for(&client.dataset_location, &vm.addr) else {
                    continue; // VM without an execution slowdown cannot host clients
                };
                let exec = crate::units::scale_time(client.baseline_total(), sl);
                let comm =
                    expected_comm_time(&vm.addr.region_key(), &server_region, app, tables)?;
                t_max = t_max.max(exec + comm + server.aggregation_time);
            }
        }
    }
    if limits.deadline_per_round > 0 {
        t_max = t_max.min(limits.deadline_per_round);
    }

    let max_price = catalog
        .vms
        .iter()
        .map(|v| v.on_demand_price)
        .max()
        .unwrap_or(0);
    let mut max_comm = 0;
    for a in &env.providers {
        for b in &env.providers {
            max_comm = max_comm.max(comm_cost_pair(&a.id, &b.id, &app.messages, env)?);
        }
    }
    let n_tasks = app.clients.len() as i64 + 1;
    let cost_max = charge(max_price, t_max) * n_tasks + max_comm * app.clients.len() as i64;
    Ok(NormalizationConstants {
        t_max: t_max.max(1),
        cost_max: cost_max.max(1),
    })
}

/// Exact integer ranking key for the weighted objective. Lower is better.
/// Equal keys mean exactly equal objectives.
pub fn objective_key(
    total_costs: UsdMicros,
    makespan: TimeMicros,
    norms: &NormalizationConstants,
    alpha: RatioMicros,
) -> i128 {
    let alpha = alpha as i128;
    let inv = MICROS_PER_UNIT as i128 - alpha;
    alpha * total_costs as i128 * norms.t_max as i128
        + inv * makespan as i128 * norms.cost_max as i128
}

/// The weighted objective as a float, for reports.
pub fn objective(
    total_costs: UsdMicros,
    makespan: TimeMicros,
    norms: &NormalizationConstants,
    alpha: RatioMicros,
) -> f64 {
    let a = alpha as f64 / MICROS_PER_UNIT as f64;
    a * total_costs as f64 / norms.cost_max as f64
        + (1.0 - a) * makespan as f64 / norms.t_max as f64
}

/// Constraint classes in the report ordering: budget, deadline, then the
/// four capacity families.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ConstraintViolation {
    Budget {
        total_costs: UsdMicros,
        budget: UsdMicros,
    },
    Deadline {
        makespan: TimeMicros,
        deadline: TimeMicros,
    },
    ProviderGpu {
        provider: String,
        used: u64,
        quota: u64,
    },
    ProviderVcpu {
        provider: String,
        used: u64,
        quota: u64,
    },
    RegionGpu {
        provider: String,
        region: String,
        used: u64,
        quota: u64,
    },
    RegionVcpu {
        provider: String,
        region: String,
        used: u64,
        quota: u64,
    },
}

impl std::fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConstraintViolation::Budget { total_costs, budget } => write!(
                f,
                "budget: round cost {} exceeds {}",
                crate::units::format_usd(*total_costs),
                crate::units::format_usd(*budget)
            ),
            ConstraintViolation::Deadline { makespan, deadline } => write!(
                f,
                "deadline: round makespan {} exceeds {}",
                crate::units::format_hms(*makespan),
                crate::units::format_hms(*deadline)
            ),
            ConstraintViolation::ProviderGpu { provider, used, quota } => {
                write!(f, "provider {provider}: {used} GPUs exceed quota {quota}")
            }
            ConstraintViolation::ProviderVcpu { provider, used, quota } => {
                write!(f, "provider {provider}: {used} vCPUs exceed quota {quota}")
            }
            ConstraintViolation::RegionGpu { provider, region, used, quota } => {
                write!(f, "region {provider}/{region}: {used} GPUs exceed quota {quota}")
            }
            ConstraintViolation::RegionVcpu { provider, region, used, quota } => {
                write!(f, "region {provider}/{region}: {used} vCPUs exceed quota {quota}")
            }
        }
    }
}

/// Capacity violations only (the per-provider and per-region quota checks).
pub fn capacity_violations(
    env: &MultiCloudEnv,
    assignment: &Assignment,
) -> Result<Vec<ConstraintViolation>, CloudError> {
    let usage = capacity_usage(env, assignment)?;
    let mut out = Vec::new();
    for p in &env.providers {
        let (vcpus, gpus) = usage.per_provider.get(&p.id).copied().unwrap_or((0, 0));
        if let Quota::Limited(q) = p.gpu_quota {
            if gpus > q {
                out.push(ConstraintViolation::ProviderGpu {
                    provider: p.id.clone(),
                    used: gpus,
                    quota: q,
                });
            }
        }
        if let Quota::Limited(q) = p.vcpu_quota {
            if vcpus > q {
                out.push(ConstraintViolation::ProviderVcpu {
                    provider: p.id.clone(),
                    used: vcpus,
                    quota: q,
                });
            }
        }
        for r in &p.regions {
            let key = (p.id.clone(), r.id.clone());
            let (vcpus, gpus) = usage.per_region.get(&key).copied().unwrap_or((0, 0));
            if let Quota::Limited(q) = r.gpu_quota {
                if gpus > q {
                    out.push(ConstraintViolation::RegionGpu {
                        provider: p.id.clone(),
                        region: r.id.clone(),
                        used: gpus,
                        quota: q,
                    });
                }
            }
            if let Quota::Limited(q) = r.vcpu_quota {
                if vcpus > q {
                    out.push(ConstraintViolation::RegionVcpu {
                        provider: p.id.clone(),
                        region: r.id.clone(),
                        used: vcpus,
                        quota: q,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Checks the budget, deadline, and capacity constraints for an assignment.
/// Returns the violations in the canonical order; empty means feasible.
pub fn feasible(
    assignment: &Assignment,
    app: &FlApplication,
    env: &MultiCloudEnv,
    tables: &SlowdownTables,
    limits: &RoundLimits,
) -> Result<Vec<ConstraintViolation>, EvalError> {
    let (makespan, _) = round_makespan(assignment, app, tables, env)?;
    let (_, _, total) = total_costs(assignment, makespan, app, env)?;
    let mut out = Vec::new();
    if total > limits.budget_per_round {
        out.push(ConstraintViolation::Budget {
            total_costs: total,
            budget: limits.budget_per_round,
        });
    }
    if makespan > limits.deadline_per_round {
        out.push(ConstraintViolation::Deadline {
            makespan,
            deadline: limits.deadline_per_round,
        });
    }
    out.extend(capacity_violations(env, assignment)?);
    Ok(out)
}

/// Evaluates a user-supplied assignment without optimizing: times, costs,
/// and the objective under the application's own weight. Constraint
/// violations do not reject the assignment; callers that care run
/// [`feasible`] separately.
pub fn evaluate_fixed(
    assignment: &Assignment,
    app: &FlApplication,
    env: &MultiCloudEnv,
    tables: &SlowdownTables,
) -> Result<SchedulingSolution, EvalError> {
    let limits = crate::app::round_limits(app);
    let norms = normalization(app, env, tables, &limits)?;
    evaluate_with_norms(assignment, app, env, tables, &norms, app.alpha)
}

/// Evaluation with externally fixed normalization constants and weight.
pub fn evaluate_with_norms(
    assignment: &Assignment,
    app: &FlApplication,
    env: &MultiCloudEnv,
    tables: &SlowdownTables,
    norms: &NormalizationConstants,
    alpha: RatioMicros,
) -> Result<SchedulingSolution, EvalError> {
    let (makespan, per_client_times) = round_makespan(assignment, app, tables, env)?;
    let (vm, comm, total) = total_costs(assignment, makespan, app, env)?;
    Ok(SchedulingSolution {
        assignment: assignment.clone(),
        makespan,
        vm_costs: vm,
        comm_costs: comm,
        total_costs: total,
        objective: objective(total, makespan, norms, alpha),
        per_client_times,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testenv;
    use crate::units::{secs_to_micros, usd_to_micros};

    #[test]
    fn comm_cost_examples() {
        let env = testenv::aws_gcp_env();
        let zero = MessageProfile {
            server_train_msg: 0,
            server_aggreg_msg: 0,
            client_train_msg: 0,
            client_test_msg: 0,
        };
        assert_eq!(comm_cost_pair("aws", "gcp", &zero, &env).unwrap(), 0);

        let msgs = testenv::til_messages();
        // client AWS ($0.09/GB), server GCP ($0.12/GB):
        // 1.08 GB x 0.12 + 0.5400018 GB x 0.09 = 0.1782 (to the micro-dollar)
        let c = comm_cost_pair("aws", "gcp", &msgs, &env).unwrap();
        assert_eq!(c, 178_200);
        // both in GCP: 1.08 x 0.12 + 0.5400018 x 0.12 = 0.1944
        let c = comm_cost_pair("gcp", "gcp", &msgs, &env).unwrap();
        assert_eq!(c, 194_400);
        // both in AWS
        let c = comm_cost_pair("aws", "aws", &msgs, &env).unwrap();
        assert_eq!(c, 145_800);
    }

    #[test]
    fn vm_costs_examples() {
        let env = testenv::aws_gcp_env();
        let assignment = testenv::uniform_assignment(
            &testenv::aws_app(4),
            &VmAddress::new("aws", "us-west-2", "g4dn.2xlarge"),
            &VmAddress::new("aws", "us-west-2", "t2.xlarge"),
        );
        assert_eq!(vm_costs(&assignment, 0, &env).unwrap(), 0);
        // 4 x $0.752/h + $0.1856/h over 616.4951 s
        let c = vm_costs(&assignment, 616_495_100, &env).unwrap();
        assert!((crate::units::micros_to_usd(c) - 0.5469).abs() < 0.001, "{c}");

        // 50 x $2.86/h + $0.134/h over 105 s => about $4.17
        let app50 = testenv::gcp_app(50);
        let a50 = testenv::uniform_assignment(
            &app50,
            &VmAddress::new("gcp", "us-central1", "n1-standard-8-v100"),
            &VmAddress::new("gcp", "us-central1", "e2-standard-4"),
        );
        let c = vm_costs(&a50, secs_to_micros(105.0), &env).unwrap();
        assert_eq!(c, 4_174_742);
    }

    #[test]
    fn makespan_and_total_costs_reproduce_hand_values() {
        let env = testenv::aws_gcp_env();
        let tables = testenv::measured_tables();

        // AWS(4) optimal: clients on us-west-2 g4dn, server on us-west-2 t2.
        let app = testenv::aws_app(4);
        let assignment = testenv::uniform_assignment(
            &app,
            &VmAddress::new("aws", "us-west-2", "g4dn.2xlarge"),
            &VmAddress::new("aws", "us-west-2", "t2.xlarge"),
        );
        let (mk, per_client) = round_makespan(&assignment, &app, &tables, &env).unwrap();
        assert_eq!(mk, 616_495_100); // 589.7529 + 26.4422 + 0.3 s
        assert_eq!(per_client.len(), 4);
        let (vm, comm, total) = total_costs(&assignment, mk, &app, &env).unwrap();
        assert_eq!(vm, 546_900);
        assert_eq!(comm, 583_200);
        assert_eq!(total, 1_130_100); // $1.13

        // GCP(4) optimal: clients on V100, server on e2-standard-4.
        let app = testenv::gcp_app(4);
        let assignment = testenv::uniform_assignment(
            &app,
            &VmAddress::new("gcp", "us-central1", "n1-standard-8-v100"),
            &VmAddress::new("gcp", "us-central1", "e2-standard-4"),
        );
        let (mk, _) = round_makespan(&assignment, &app, &tables, &env).unwrap();
        assert_eq!(mk, 107_328_400); // 97.86 + 9.2684 + 0.2 s -> 0:01:47
        let (_, _, total) = total_costs(&assignment, mk, &app, &env).unwrap();
        assert_eq!(total, 1_122_661); // $1.12

        // One identical client: makespan equals that client's own total.
        let app1 = testenv::gcp_app(1);
        let a1 = testenv::uniform_assignment(
            &app1,
            &VmAddress::new("gcp", "us-central1", "n1-standard-8-v100"),
            &VmAddress::new("gcp", "us-central1", "e2-standard-4"),
        );
        let (mk1, per) = round_makespan(&a1, &app1, &tables, &env).unwrap();
        let (exec, comm) = per.values().next().unwrap();
        assert_eq!(mk1, exec + comm + 200_000);
        assert_eq!(mk1, mk);
    }

    #[test]
    fn objective_weights_behave_at_extremes() {
        let norms = NormalizationConstants {
            t_max: secs_to_micros(100.0),
            cost_max: usd_to_micros(10.0),
        };
        let total = usd_to_micros(5.0);
        let mk = secs_to_micros(50.0);
        assert!((objective(total, mk, &norms, 0) - 0.5).abs() < 1e-12);
        assert!((objective(total, mk, &norms, 1_000_000) - 0.5).abs() < 1e-12);
        let half = objective(total, mk, &norms, 500_000);
        assert!((half - 0.5).abs() < 1e-12);

        // key ordering agrees with the float objective on exact values
        let k1 = objective_key(total, mk, &norms, 500_000);
        let k2 = objective_key(total + 1, mk, &norms, 500_000);
        assert!(k1 < k2);
    }

    #[test]
    fn feasibility_reports_quota_classes() {
        let env = testenv::aws_gcp_env();
        let tables = testenv::measured_tables();
        let app = testenv::gcp_app(50);
        let limits = RoundLimits {
            budget_per_round: usd_to_micros(30_000.0),
            deadline_per_round: secs_to_micros(10_000.0),
        };
        // 50 GPUs into a region with a 4-GPU quota
        let mut env_quota = env.clone();
        let gcp = env_quota.providers.iter_mut().find(|p| p.id == "gcp").unwrap();
        gcp.gpu_quota = Quota::Limited(4);
        gcp.regions
            .iter_mut()
            .for_each(|r| r.gpu_quota = Quota::Limited(4));
        let assignment = testenv::uniform_assignment(
            &app,
            &VmAddress::new("gcp", "us-central1", "n1-standard-8-v100"),
            &VmAddress::new("gcp", "us-central1", "e2-standard-4"),
        );
        let violations = feasible(&assignment, &app, &env_quota, &tables, &limits).unwrap();
        assert!(violations
            .iter()
            .any(|v| matches!(v, ConstraintViolation::RegionGpu { used: 50, quota: 4, .. })));

        // unbounded quotas and huge limits are feasible
        let violations = feasible(&assignment, &app, &env, &tables, &limits).unwrap();
        assert!(violations.is_empty(), "{violations:?}");
    }

    #[test]
    fn capacity_usage_is_additive() {
        let env = testenv::aws_gcp_env();
        let app = testenv::aws_app(4);
        let g4 = VmAddress::new("aws", "us-west-2", "g4dn.2xlarge");
        let t2 = VmAddress::new("aws", "us-west-2", "t2.xlarge");
        let assignment = testenv::uniform_assignment(&app, &g4, &t2);
        let usage = capacity_usage(&env, &assignment).unwrap();
        assert_eq!(
            usage.per_region.get(&("aws".into(), "us-west-2".into())),
            Some(&(36, 4))
        );
    }
}

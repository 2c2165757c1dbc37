//! Exact one-round placement search.
//!
//! Fixing the server VM makes every client's round time and message cost
//! independent of the other clients, so the bilinear client-server terms
//! disappear. For each server the search walks the sorted set of candidate
//! makespans; for a candidate M each client picks the cheapest VM that
//! finishes within M, subject to the provider/region capacity quotas
//! (branch-and-bound with a capacity-relaxed lower bound). The returned
//! objective is provably the minimum over all feasible assignments, compared
//! through the exact integer key, with lexicographic tie-breaking on
//! (server address, per-client addresses in client-id order).
//!
//! `brute_force_solve` enumerates every assignment outright and serves as
//! the verification oracle for the search above.

use std::collections::BTreeMap;

use crate::app::{FlApplication, RoundLimits};
use crate::assign::{
    comm_cost_pair, evaluate_with_norms, feasible, normalization, objective_key, Assignment,
    ConstraintViolation, EvalError, NormalizationConstants, SchedulingSolution,
};
use crate::cloud::{FlatCatalog, MultiCloudEnv, Pricing, Quota};
use crate::slowdowns::{SlowdownError, SlowdownTables};
use crate::units::{charge, RatioMicros, TimeMicros, UsdMicros, MICROS_PER_HOUR, MICROS_PER_UNIT};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum SolveError {
    #[error("VM catalog is empty")]
    EmptyCatalog,
    #[error("application has no clients")]
    NoClients,
    #[error("client {client}: no VM has an execution slowdown for its dataset location")]
    NoClientPlacement { client: String },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("no feasible assignment: {}", format_violations(.violations))]
    Infeasible { violations: Vec<ConstraintViolation> },
    #[error("{candidates} candidate assignments exceed the enumeration guard of {guard}")]
    EnumerationGuard { candidates: u128, guard: u128 },
}

fn format_violations(violations: &[ConstraintViolation]) -> String {
    if violations.is_empty() {
        return "no assignment satisfies the capacity constraints".into();
    }
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl From<SlowdownError> for SolveError {
    fn from(e: SlowdownError) -> Self {
        SolveError::Eval(EvalError::Slowdown(e))
    }
}

/// Upper bound on assignments brute force will enumerate.
pub const BRUTE_FORCE_GUARD: u128 = 10_000_000;

/// Clients sharing dataset location and baseline times are interchangeable;
/// the search treats each such group once.
struct ClientGroups {
    /// group index per client (in `app.clients` order)
    of_client: Vec<usize>,
    /// number of clients per group
    sizes: Vec<usize>,
    /// representative client index per group
    representative: Vec<usize>,
}

fn group_clients(app: &FlApplication) -> ClientGroups {
    let mut keys: BTreeMap<((String, String), TimeMicros), usize> = BTreeMap::new();
    let mut of_client = Vec::with_capacity(app.clients.len());
    let mut sizes = Vec::new();
    let mut representative = Vec::new();
    for (i, c) in app.clients.iter().enumerate() {
        let key = (c.dataset_location.clone(), c.baseline_total());
        let g = *keys.entry(key).or_insert_with(|| {
            sizes.push(0);
            representative.push(i);
            sizes.len() - 1
        });
        sizes[g] += 1;
        of_client.push(g);
    }
    ClientGroups {
        of_client,
        sizes,
        representative,
    }
}

type RegionKey = (String, String);

/// Everything precomputed once per solve call.
struct Prep {
    catalog: FlatCatalog,
    groups: ClientGroups,
    /// exec_us[g][v]: execution time of a group-g client on VM v
    /// (None when the VM has no slowdown for that dataset location).
    exec_us: Vec<Vec<Option<TimeMicros>>>,
    /// comm_us[server_vm][client_vm] region-pair time, indexed by region ids.
    comm_us: BTreeMap<(RegionKey, RegionKey), TimeMicros>,
    /// comm_cost[client_provider][server_provider] in micro-dollars.
    comm_cost: BTreeMap<(String, String), UsdMicros>,
    /// VM order for lexicographic tie-breaking (rank by address).
    addr_rank: Vec<usize>,
    /// provider / region index per VM for quota bookkeeping.
    provider_of: Vec<usize>,
    region_of: Vec<usize>,
    provider_quota: Vec<(Quota, Quota)>, // (vcpu, gpu)
    region_quota: Vec<(Quota, Quota)>,
}

fn prepare(
    app: &FlApplication,
    env: &MultiCloudEnv,
    tables: &SlowdownTables,
) -> Result<Prep, SolveError> {
    let catalog = FlatCatalog::new(env);
    if catalog.is_empty() {
        return Err(SolveError::EmptyCatalog);
    }
    if app.clients.is_empty() {
        return Err(SolveError::NoClients);
    }
    let groups = group_clients(app);

    let mut exec_us = Vec::with_capacity(groups.sizes.len());
    for (g, &rep) in groups.representative.iter().enumerate() {
        let client = &app.clients[rep];
        let row: Vec<Option<TimeMicros>> = catalog
            .vms
            .iter()
            .map(|vm| {
                tables
                    .exec_slowdown_for(&client.dataset_location, &vm.addr)
                    .ok()
                    .map(|sl| crate::units::scale_time(client.baseline_total(), sl))
            })
            .collect();
        if row.iter().all(|t| t.is_none()) {
            return Err(SolveError::NoClientPlacement {
                client: app.clients[groups.representative[g]].id.clone(),
            });
        }
        exec_us.push(row);
    }

    // Region-pair communication times for every pair of regions that can
    // host a task. Missing table entries are hard errors.
    let mut comm_us = BTreeMap::new();
    let regions: Vec<(String, String)> = {
        let mut seen = std::collections::BTreeSet::new();
        catalog
            .vms
            .iter()
            .map(|v| v.addr.region_key())
            .filter(|k| seen.insert(k.clone()))
            .collect()
    };
    for a in &regions {
        for b in &regions {
            let sl = tables.comm_slowdown_for(a, b)?;
            comm_us.insert(
                (a.clone(), b.clone()),
                crate::units::scale_time(app.baseline_comm_time, sl),
            );
        }
    }

    let mut comm_cost = BTreeMap::new();
    for a in &env.providers {
        for b in &env.providers {
            comm_cost.insert(
                (a.id.clone(), b.id.clone()),
                comm_cost_pair(&a.id, &b.id, &app.messages, env)
                    .map_err(EvalError::Cloud)?,
            );
        }
    }

    let mut order: Vec<usize> = (0..catalog.len()).collect();
    order.sort_by(|&a, &b| catalog.vms[a].addr.cmp(&catalog.vms[b].addr));
    let mut addr_rank = vec![0usize; catalog.len()];
    for (rank, &idx) in order.iter().enumerate() {
        addr_rank[idx] = rank;
    }

    let mut provider_quota = Vec::new();
    let mut region_quota = Vec::new();
    let mut provider_idx = BTreeMap::new();
    let mut region_idx = BTreeMap::new();
    for p in &env.providers {
        provider_idx.insert(p.id.clone(), provider_quota.len());
        provider_quota.push((p.vcpu_quota, p.gpu_quota));
        for r in &p.regions {
            region_idx.insert((p.id.clone(), r.id.clone()), region_quota.len());
            region_quota.push((r.vcpu_quota, r.gpu_quota));
        }
    }
    let provider_of = catalog
        .vms
        .iter()
        .map(|v| provider_idx[&v.addr.provider])
        .collect();
    let region_of = catalog
        .vms
        .iter()
        .map(|v| region_idx[&v.addr.region_key()])
        .collect();

    Ok(Prep {
        catalog,
        groups,
        exec_us,
        comm_us,
        comm_cost,
        addr_rank,
        provider_of,
        region_of,
        provider_quota,
        region_quota,
    })
}

/// Capacity bookkeeping during the search. The server VM is applied first.
#[derive(Clone)]
struct Usage {
    provider_vcpu: Vec<u64>,
    provider_gpu: Vec<u64>,
    region_vcpu: Vec<u64>,
    region_gpu: Vec<u64>,
}

impl Usage {
    fn new(prep: &Prep) -> Self {
        Self {
            provider_vcpu: vec![0; prep.provider_quota.len()],
            provider_gpu: vec![0; prep.provider_quota.len()],
            region_vcpu: vec![0; prep.region_quota.len()],
            region_gpu: vec![0; prep.region_quota.len()],
        }
    }

    fn fits(&self, prep: &Prep, vm: usize) -> bool {
        let p = prep.provider_of[vm];
        let r = prep.region_of[vm];
        let v = &prep.catalog.vms[vm];
        prep.provider_quota[p].0.allows(self.provider_vcpu[p] + v.vcpus)
            && prep.provider_quota[p].1.allows(self.provider_gpu[p] + v.gpus)
            && prep.region_quota[r].0.allows(self.region_vcpu[r] + v.vcpus)
            && prep.region_quota[r].1.allows(self.region_gpu[r] + v.gpus)
    }

    fn apply(&mut self, prep: &Prep, vm: usize) {
        let p = prep.provider_of[vm];
        let r = prep.region_of[vm];
        let v = &prep.catalog.vms[vm];
        self.provider_vcpu[p] += v.vcpus;
        self.provider_gpu[p] += v.gpus;
        self.region_vcpu[r] += v.vcpus;
        self.region_gpu[r] += v.gpus;
    }

    fn undo(&mut self, prep: &Prep, vm: usize) {
        let p = prep.provider_of[vm];
        let r = prep.region_of[vm];
        let v = &prep.catalog.vms[vm];
        self.provider_vcpu[p] -= v.vcpus;
        self.provider_gpu[p] -= v.gpus;
        self.region_vcpu[r] -= v.vcpus;
        self.region_gpu[r] -= v.gpus;
    }
}

/// One fully evaluated candidate, ordered by objective key then by the
/// lexicographic tie-break.
#[derive(Debug, Clone)]
struct Candidate {
    key: i128,
    /// (server addr rank, client vm addr ranks in client order)
    tiebreak: (usize, Vec<usize>),
    server: usize,
    client_vms: Vec<usize>,
    makespan: TimeMicros,
    total_costs: UsdMicros,
}

impl Candidate {
    fn better_than(&self, other: &Candidate) -> bool {
        (self.key, &self.tiebreak) < (other.key, &other.tiebreak)
    }
}

fn min_candidate(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if b.better_than(&a) { b } else { a }),
        (a, None) => a,
        (None, b) => b,
    }
}

/// Per-client selection for one (server, candidate makespan) pair: exact
/// minimum of the summed proxy weights under the quota constraints.
/// The proxy weight of VM v is price(v)*M + comm_cost(v)*3.6e9, which orders
/// assignments identically to their round cost at makespan M.
struct GroupChoices {
    /// sorted ascending by (weight, addr rank); (weight, vm index)
    vms: Vec<(i128, usize)>,
}

#[allow(clippy::too_many_arguments)]
fn branch_and_bound(
    prep: &Prep,
    order: &[usize], // client indices grouped by group id
    choices: &[GroupChoices],
    suffix_min: &[i128],
    usage: &mut Usage,
    acc: i128,
    depth: usize,
    start_rank: usize,
    best: &mut Option<(i128, Vec<usize>)>,
    chosen: &mut Vec<usize>,
) {
    if let Some((best_acc, _)) = best {
        if acc + suffix_min[depth] >= *best_acc {
            return;
        }
    }
    if depth == order.len() {
        let ranks = chosen.clone();
        *best = Some((acc, ranks));
        return;
    }
    let client = order[depth];
    let group = prep.groups.of_client[client];
    let list = &choices[group].vms;
    let next_same_group = depth + 1 < order.len()
        && prep.groups.of_client[order[depth + 1]] == group;
    for (rank, &(w, vm)) in list.iter().enumerate().skip(start_rank) {
        if usage.fits(prep, vm) {
            usage.apply(prep, vm);
            chosen.push(rank);
            branch_and_bound(
                prep,
                order,
                choices,
                suffix_min,
                usage,
                acc + w,
                depth + 1,
                if next_same_group { rank } else { 0 },
                best,
                chosen,
            );
            chosen.pop();
            usage.undo(prep, vm);
        }
    }
}

/// Best candidate for one fixed server placement.
#[allow(clippy::too_many_arguments)]
fn best_for_server(
    prep: &Prep,
    app: &FlApplication,
    limits: &RoundLimits,
    norms: &NormalizationConstants,
    alpha: RatioMicros,
    pricing: Pricing,
    server: usize,
    global_best_key: Option<i128>,
) -> Option<Candidate> {
    let server_vm = &prep.catalog.vms[server];
    let server_region = server_vm.addr.region_key();
    let aggreg = server_vm.aggregation_time;
    let n_groups = prep.groups.sizes.len();

    let mut usage = Usage::new(prep);
    if !usage.fits(prep, server) {
        return None;
    }
    usage.apply(prep, server);

    // Round time of a group-g client on VM v under this server.
    let total_time = |g: usize, v: usize| -> Option<TimeMicros> {
        let exec = prep.exec_us[g][v]?;
        let comm = prep.comm_us[&(prep.catalog.vms[v].addr.region_key(), server_region.clone())];
        Some(exec + comm + aggreg)
    };

    // Candidate makespans: every distinct admissible per-client round time
    // within the deadline.
    let mut candidates: Vec<TimeMicros> = Vec::new();
    for g in 0..n_groups {
        for v in 0..prep.catalog.len() {
            if let Some(t) = total_time(g, v) {
                if t <= limits.deadline_per_round {
                    candidates.push(t);
                }
            }
        }
    }
    candidates.sort_unstable();
    candidates.dedup();

    let server_price = server_vm.price(pricing);
    let alpha_i = alpha as i128;
    let inv_alpha = MICROS_PER_UNIT as i128 - alpha_i;

    let mut best: Option<Candidate> = None;
    let order: Vec<usize> = {
        let mut o: Vec<usize> = (0..app.clients.len()).collect();
        o.sort_by_key(|&i| prep.groups.of_client[i]);
        o
    };

    for &m in &candidates {
        // The makespan term alone already rules this and all larger
        // candidates out.
        let floor_key = inv_alpha * m as i128 * norms.cost_max as i128;
        let best_key = best
            .as_ref()
            .map(|b| b.key)
            .into_iter()
            .chain(global_best_key)
            .min();
        if let Some(k) = best_key {
            if alpha_i < MICROS_PER_UNIT as i128 && floor_key >= k {
                break;
            }
        }

        let mut choices = Vec::with_capacity(n_groups);
        let mut all_placeable = true;
        for g in 0..n_groups {
            let mut vms: Vec<(i128, usize)> = (0..prep.catalog.len())
                .filter_map(|v| {
                    let t = total_time(g, v)?;
                    if t > m {
                        return None;
                    }
                    let vm = &prep.catalog.vms[v];
                    let comm_cost =
                        prep.comm_cost[&(vm.addr.provider.clone(), server_vm.addr.provider.clone())];
                    let w = vm.price(pricing) as i128 * m as i128
                        + comm_cost as i128 * MICROS_PER_HOUR as i128;
                    Some((w, v))
                })
                .collect();
            if vms.is_empty() {
                all_placeable = false;
                break;
            }
            vms.sort_by_key(|&(w, v)| (w, prep.addr_rank[v]));
            choices.push(GroupChoices { vms });
        }
        if !all_placeable {
            continue;
        }

        let mut suffix_min = vec![0i128; order.len() + 1];
        for (pos, &client) in order.iter().enumerate().rev() {
            let g = prep.groups.of_client[client];
            suffix_min[pos] = suffix_min[pos + 1] + choices[g].vms[0].0;
        }

        let mut found: Option<(i128, Vec<usize>)> = None;
        let mut chosen = Vec::with_capacity(order.len());
        branch_and_bound(
            prep,
            &order,
            &choices,
            &suffix_min,
            &mut usage,
            0,
            0,
            0,
            &mut found,
            &mut chosen,
        );
        let Some((_, ranks)) = found else { continue };

        // Materialize: actual makespan and exact costs.
        let mut client_vms = vec![usize::MAX; app.clients.len()];
        let mut makespan: TimeMicros = 0;
        let mut price_sum = server_price;
        let mut comm_sum: UsdMicros = 0;
        for (pos, &client) in order.iter().enumerate() {
            let g = prep.groups.of_client[client];
            let (_, v) = choices[g].vms[ranks[pos]];
            client_vms[client] = v;
            makespan = makespan.max(total_time(g, v).unwrap());
            let vm = &prep.catalog.vms[v];
            price_sum += vm.price(pricing);
            comm_sum +=
                prep.comm_cost[&(vm.addr.provider.clone(), server_vm.addr.provider.clone())];
        }
        let total = charge(price_sum, makespan) + comm_sum;
        if total > limits.budget_per_round {
            continue;
        }
        let key = objective_key(total, makespan, norms, alpha);
        let tiebreak = (
            prep.addr_rank[server],
            client_vms.iter().map(|&v| prep.addr_rank[v]).collect(),
        );
        let candidate = Candidate {
            key,
            tiebreak,
            server,
            client_vms,
            makespan,
            total_costs: total,
        };
        if best.as_ref().is_none_or(|b| candidate.better_than(b)) {
            best = Some(candidate);
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn materialize(
    prep: &Prep,
    app: &FlApplication,
    env: &MultiCloudEnv,
    tables: &SlowdownTables,
    norms: &NormalizationConstants,
    alpha: RatioMicros,
    pricing: Pricing,
    candidate: Candidate,
) -> Result<SchedulingSolution, SolveError> {
    let assignment = Assignment {
        client_vm: app
            .clients
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.clone(), prep.catalog.vms[candidate.client_vms[i]].addr.clone()))
            .collect(),
        server_vm: prep.catalog.vms[candidate.server].addr.clone(),
        pricing,
    };
    let solution = evaluate_with_norms(&assignment, app, env, tables, norms, alpha)?;
    debug_assert_eq!(solution.makespan, candidate.makespan);
    debug_assert_eq!(solution.total_costs, candidate.total_costs);
    Ok(solution)
}

/// Exact minimum-objective assignment, or the infeasibility report when no
/// assignment satisfies the budget, deadline, and capacity constraints.
pub fn solve(
    app: &FlApplication,
    env: &MultiCloudEnv,
    tables: &SlowdownTables,
    limits: &RoundLimits,
    alpha: RatioMicros,
    pricing: Pricing,
) -> Result<SchedulingSolution, SolveError> {
    let prep = prepare(app, env, tables)?;
    let norms = normalization(app, env, tables, limits)?;

    let best = search(&prep, app, limits, &norms, alpha, pricing);
    match best {
        Some(candidate) => materialize(&prep, app, env, tables, &norms, alpha, pricing, candidate),
        None => Err(diagnose_infeasible(&prep, app, env, tables, limits, &norms, alpha, pricing)),
    }
}

fn search(
    prep: &Prep,
    app: &FlApplication,
    limits: &RoundLimits,
    norms: &NormalizationConstants,
    alpha: RatioMicros,
    pricing: Pricing,
) -> Option<Candidate> {
    let servers: Vec<usize> = (0..prep.catalog.len()).collect();
    #[cfg(feature = "parallel")]
    {
        servers
            .par_iter()
            .map(|&s| best_for_server(prep, app, limits, norms, alpha, pricing, s, None))
            .reduce(|| None, min_candidate)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut best: Option<Candidate> = None;
        for &s in &servers {
            let key = best.as_ref().map(|b| b.key);
            let c = best_for_server(prep, app, limits, norms, alpha, pricing, s, key);
            best = min_candidate(best, c);
        }
        best
    }
}

/// When the constrained search fails, re-run it without the budget and
/// deadline to name the binding constraint classes in the (r1)-(r8) order.
#[allow(clippy::too_many_arguments)]
fn diagnose_infeasible(
    prep: &Prep,
    app: &FlApplication,
    env: &MultiCloudEnv,
    tables: &SlowdownTables,
    limits: &RoundLimits,
    norms: &NormalizationConstants,
    alpha: RatioMicros,
    pricing: Pricing,
) -> SolveError {
    let relaxed = RoundLimits {
        budget_per_round: UsdMicros::MAX / 4,
        deadline_per_round: TimeMicros::MAX / 4,
    };
    match search(prep, app, &relaxed, norms, alpha, pricing) {
        Some(candidate) => {
            match materialize(prep, app, env, tables, norms, alpha, pricing, candidate) {
                Ok(solution) => {
                    let violations =
                        feasible(&solution.assignment, app, env, tables, limits).unwrap_or_default();
                    SolveError::Infeasible { violations }
                }
                Err(e) => e,
            }
        }
        // Even unlimited budget/deadline admit nothing: capacity blocks it.
        None => SolveError::Infeasible { violations: vec![] },
    }
}

/// Exhaustive enumeration of all server placements times per-client VM
/// choices. Guarded, exact, and deliberately simple: it evaluates each
/// assignment straight from the cost and time definitions.
pub fn brute_force_solve(
    app: &FlApplication,
    env: &MultiCloudEnv,
    tables: &SlowdownTables,
    limits: &RoundLimits,
    alpha: RatioMicros,
    pricing: Pricing,
) -> Result<SchedulingSolution, SolveError> {
    let prep = prepare(app, env, tables)?;
    let norms = normalization(app, env, tables, limits)?;
    let n_vms = prep.catalog.len() as u128;
    let candidates = n_vms
        .checked_pow(app.clients.len() as u32)
        .and_then(|c| c.checked_mul(n_vms))
        .unwrap_or(u128::MAX);
    if candidates > BRUTE_FORCE_GUARD {
        return Err(SolveError::EnumerationGuard {
            candidates,
            guard: BRUTE_FORCE_GUARD,
        });
    }

    let servers: Vec<usize> = (0..prep.catalog.len()).collect();
    let run = |&server: &usize| -> Option<Candidate> {
        enumerate_for_server(&prep, app, limits, &norms, alpha, pricing, server)
    };
    #[cfg(feature = "parallel")]
    let best = servers.par_iter().map(run).reduce(|| None, min_candidate);
    #[cfg(not(feature = "parallel"))]
    let best = servers.iter().map(run).fold(None, min_candidate);

    match best {
        Some(candidate) => materialize(&prep, app, env, tables, &norms, alpha, pricing, candidate),
        None => Err(diagnose_infeasible(&prep, app, env, tables, limits, &norms, alpha, pricing)),
    }
}

fn enumerate_for_server(
    prep: &Prep,
    app: &FlApplication,
    limits: &RoundLimits,
    norms: &NormalizationConstants,
    alpha: RatioMicros,
    pricing: Pricing,
    server: usize,
) -> Option<Candidate> {
    let n_clients = app.clients.len();
    let n_vms = prep.catalog.len();
    let server_vm = &prep.catalog.vms[server];
    let server_region = server_vm.addr.region_key();
    let aggreg = server_vm.aggregation_time;

    let mut usage = Usage::new(prep);
    if !usage.fits(prep, server) {
        return None;
    }
    usage.apply(prep, server);

    // Per-group per-VM round times and per-VM comm costs, straight from the
    // definitions.
    let time: Vec<Vec<Option<TimeMicros>>> = (0..prep.groups.sizes.len())
        .map(|g| {
            (0..n_vms)
                .map(|v| {
                    prep.exec_us[g][v].map(|exec| {
                        exec + prep.comm_us
                            [&(prep.catalog.vms[v].addr.region_key(), server_region.clone())]
                            + aggreg
                    })
                })
                .collect()
        })
        .collect();
    let comm_cost: Vec<UsdMicros> = (0..n_vms)
        .map(|v| {
            prep.comm_cost
                [&(prep.catalog.vms[v].addr.provider.clone(), server_vm.addr.provider.clone())]
        })
        .collect();

    let mut counters = vec![0usize; n_clients];
    let mut best: Option<Candidate> = None;
    'outer: loop {
        // evaluate the current assignment vector
        let mut feasible_assignment = true;
        let mut makespan: TimeMicros = 0;
        let mut price_sum = server_vm.price(pricing);
        let mut comm_sum: UsdMicros = 0;
        let mut applied: Vec<usize> = Vec::with_capacity(n_clients);
        for (client, &v) in counters.iter().enumerate() {
            let g = prep.groups.of_client[client];
            let Some(t) = time[g][v] else {
                feasible_assignment = false;
                break;
            };
            if t > limits.deadline_per_round || !usage.fits(prep, v) {
                feasible_assignment = false;
                break;
            }
            usage.apply(prep, v);
            applied.push(v);
            makespan = makespan.max(t);
            price_sum += prep.catalog.vms[v].price(pricing);
            comm_sum += comm_cost[v];
        }
        if feasible_assignment {
            let total = charge(price_sum, makespan) + comm_sum;
            if total <= limits.budget_per_round {
                let key = objective_key(total, makespan, norms, alpha);
                let tiebreak = (
                    prep.addr_rank[server],
                    counters.iter().map(|&v| prep.addr_rank[v]).collect(),
                );
                let candidate = Candidate {
                    key,
                    tiebreak,
                    server,
                    client_vms: counters.clone(),
                    makespan,
                    total_costs: total,
                };
                if best.as_ref().is_none_or(|b| candidate.better_than(b)) {
                    best = Some(candidate);
                }
            }
        }
        for &v in applied.iter().rev() {
            usage.undo(prep, v);
        }

        // advance the odometer
        for i in (0..n_clients).rev() {
            counters[i] += 1;
            if counters[i] < n_vms {
                continue 'outer;
            }
            counters[i] = 0;
            if i == 0 {
                break 'outer;
            }
        }
        if n_clients == 0 {
            break;
        }
    }
    best
}

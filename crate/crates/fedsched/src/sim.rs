//! Seeded discrete-event simulation of an FL execution over a scheduled
//! mapping: rounds advance, the server checkpoints every X rounds, spot VMs
//! revoke as independent per-task Poisson processes, the dynamic scheduler
//! replaces them, and recovery re-executes the lost work.
//!
//! One trial is strictly single-threaded and deterministic in its seed;
//! distinct trials run concurrently on disjoint generator streams. Billing
//! happens per timeline segment (round completions, revocations, recovery
//! completions), each charged once at the task VMs' hourly prices, plus
//! message costs per executed round, so a no-failure run reproduces the
//! analytic per-round cost exactly.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::app::{round_limits, FlApplication};
use crate::assign::{
    comm_cost_pair, normalization, round_makespan, NormalizationConstants, SchedulingSolution,
};
use crate::cloud::{MultiCloudEnv, Pricing, VmAddress};
use crate::reschedule::{
    select_replacement, CandidateSet, ReplanError, RevocationPolicy, TaskRef,
};
use crate::slowdowns::SlowdownTables;
use crate::units::{charge, scale_time, RatioMicros, TimeMicros, UsdMicros};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Which tasks run on revocable spot capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    AllSpot,
    ServerOnDemandClientsSpot,
    AllOnDemand,
}

impl Scenario {
    pub fn pricing_for(&self, task: &TaskRef) -> Pricing {
        match (self, task) {
            (Scenario::AllOnDemand, _) => Pricing::OnDemand,
            (Scenario::ServerOnDemandClientsSpot, TaskRef::Server) => Pricing::OnDemand,
            _ => Pricing::Spot,
        }
    }

    fn revocable(&self, task: &TaskRef) -> bool {
        self.pricing_for(task) == Pricing::Spot
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scenario::AllSpot => write!(f, "all_spot"),
            Scenario::ServerOnDemandClientsSpot => write!(f, "server_on_demand"),
            Scenario::AllOnDemand => write!(f, "all_on_demand"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Mean seconds between revocations per spot VM; `None` disables
    /// revocations entirely.
    pub k_r: Option<TimeMicros>,
    pub scenario: Scenario,
    /// Server checkpoint interval X in rounds.
    pub checkpoint_interval: u32,
    /// Local-disk save time appended to a round when the server checkpoints.
    pub checkpoint_save_time: TimeMicros,
    /// Per-round client weight-retention time appended to every round.
    pub client_checkpoint_time: TimeMicros,
    /// Provision+boot time for a replacement VM.
    pub vm_prep_time: TimeMicros,
    /// Factor applied to round 1 (first rounds run slower in practice).
    pub first_round_multiplier: RatioMicros,
    pub revocation_policy: RevocationPolicy,
    pub seed: u64,
    pub trials: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            k_r: None,
            scenario: Scenario::AllOnDemand,
            checkpoint_interval: 10,
            checkpoint_save_time: 0,
            client_checkpoint_time: 0,
            vm_prep_time: 0,
            first_round_multiplier: 1_000_000,
            revocation_policy: RevocationPolicy::RemoveType,
            seed: 0,
            trials: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EventKind {
    RoundStart { round: u32 },
    RoundEnd { round: u32 },
    Checkpoint { round: u32 },
    Revocation { task: TaskRef, vm: VmAddress },
    Replacement { task: TaskRef, vm: VmAddress },
    RecoveryComplete { round: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimEvent {
    pub time: TimeMicros,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub server_revocations: u32,
    pub client_revocations: u32,
    pub total_time: TimeMicros,
    pub total_cost: UsdMicros,
    pub rounds_re_executed: u32,
    pub events: Vec<SimEvent>,
}

impl SimResult {
    pub fn revocations(&self) -> u32 {
        self.server_revocations + self.client_revocations
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum SimError {
    #[error("task became unrecoverable during simulation: {source}")]
    Unrecoverable {
        source: ReplanError,
        partial: Box<SimResult>,
    },
    #[error(transparent)]
    Eval(#[from] crate::assign::EvalError),
}

/// SplitMix64 step; derives independent stream seeds from (seed, salt).
fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed
        .wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One exponential inter-arrival with mean `k_r`, at least one microsecond.
fn sample_interval(rng: &mut impl Rng, k_r: TimeMicros) -> TimeMicros {
    let u: f64 = rng.gen::<f64>();
    let dt = -(1.0 - u).ln() * k_r as f64;
    (dt.round() as TimeMicros).max(1)
}

/// Poisson arrival times with rate 1/k_r, truncated at the horizon.
/// Reproducible from the generator stream.
pub fn sample_revocation_times(
    k_r: TimeMicros,
    horizon: TimeMicros,
    rng: &mut impl Rng,
) -> Vec<TimeMicros> {
    let mut out = Vec::new();
    if k_r <= 0 {
        return out;
    }
    let mut t: TimeMicros = 0;
    loop {
        t += sample_interval(rng, k_r);
        if t >= horizon {
            return out;
        }
        out.push(t);
    }
}

struct TaskState {
    task: TaskRef,
    vm: VmAddress,
    pricing: Pricing,
    /// Next revocation instant for this task's stream, if revocable.
    next_revocation: Option<TimeMicros>,
    rng: ChaCha12Rng,
}

struct Trial<'a> {
    app: &'a FlApplication,
    env: &'a MultiCloudEnv,
    tables: &'a SlowdownTables,
    cfg: &'a SimConfig,
    norms: NormalizationConstants,
    tasks: Vec<TaskState>,
    candidates: CandidateSet,
    /// last round whose aggregated weights each client still holds
    client_held: Vec<u32>,
    server_checkpoint: u32,
    round: u32,
    now: TimeMicros,
    charge_from: TimeMicros,
    cost: UsdMicros,
    events: Vec<SimEvent>,
    server_revocations: u32,
    client_revocations: u32,
    rounds_re_executed: u32,
}

impl<'a> Trial<'a> {
    fn new(
        mapping: &SchedulingSolution,
        app: &'a FlApplication,
        env: &'a MultiCloudEnv,
        tables: &'a SlowdownTables,
        cfg: &'a SimConfig,
        norms: NormalizationConstants,
        trial_seed: u64,
    ) -> Self {
        let mut tasks = Vec::with_capacity(app.clients.len() + 1);
        let make_task = |task: TaskRef, vm: VmAddress, salt: u64| {
            let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(trial_seed, salt));
            let pricing = cfg.scenario.pricing_for(&task);
            let next_revocation = match cfg.k_r {
                Some(k_r) if cfg.scenario.revocable(&task) => {
                    Some(sample_interval(&mut rng, k_r))
                }
                _ => None,
            };
            TaskState {
                task,
                vm,
                pricing,
                next_revocation,
                rng,
            }
        };
        tasks.push(make_task(TaskRef::Server, mapping.assignment.server_vm.clone(), 0));
        for (i, c) in app.clients.iter().enumerate() {
            tasks.push(make_task(
                TaskRef::Client(c.id.clone()),
                mapping.assignment.client_vm[&c.id].clone(),
                i as u64 + 1,
            ));
        }
        Self {
            app,
            env,
            tables,
            cfg,
            norms,
            tasks,
            candidates: CandidateSet::full(env, app, tables),
            client_held: vec![0; app.clients.len()],
            server_checkpoint: 0,
            round: 1,
            now: 0,
            charge_from: 0,
            cost: 0,
            events: Vec::new(),
            server_revocations: 0,
            client_revocations: 0,
            rounds_re_executed: 0,
        }
    }

    fn current_map(&self) -> crate::assign::Assignment {
        crate::assign::Assignment {
            client_vm: self
                .tasks
                .iter()
                .skip(1)
                .map(|t| match &t.task {
                    TaskRef::Client(id) => (id.clone(), t.vm.clone()),
                    TaskRef::Server => unreachable!(),
                })
                .collect(),
            server_vm: self.tasks[0].vm.clone(),
            // evaluation pricing is irrelevant here; billing is per task
            pricing: Pricing::OnDemand,
        }
    }

    fn price_sum(&self) -> Result<UsdMicros, SimError> {
        let mut total = 0;
        for t in &self.tasks {
            total += self
                .env
                .resolve(&t.vm)
                .map_err(crate::assign::EvalError::Cloud)?
                .price(t.pricing);
        }
        Ok(total)
    }

    /// Closes the billing segment ending at `until`.
    fn bill(&mut self, until: TimeMicros) -> Result<(), SimError> {
        debug_assert!(until >= self.charge_from);
        if until > self.charge_from {
            self.cost += charge(self.price_sum()?, until - self.charge_from);
        }
        self.charge_from = until;
        Ok(())
    }

    fn emit(&mut self, time: TimeMicros, kind: EventKind) {
        self.events.push(SimEvent { time, kind });
    }

    /// Message costs of one executed round under the current map.
    fn round_comm_cost(&self) -> Result<UsdMicros, SimError> {
        let server_provider = &self.tasks[0].vm.provider;
        let mut sum = 0;
        for t in &self.tasks[1..] {
            sum += comm_cost_pair(&t.vm.provider, server_provider, &self.app.messages, self.env)
                .map_err(crate::assign::EvalError::Cloud)?;
        }
        Ok(sum)
    }

    /// Duration of one attempt of the current round under the current map.
    fn round_duration(&self) -> Result<TimeMicros, SimError> {
        let map = self.current_map();
        let (makespan, _) = round_makespan(&map, self.app, self.tables, self.env)?;
        let base = if self.round == 1 {
            scale_time(makespan, self.cfg.first_round_multiplier)
        } else {
            makespan
        };
        let ckpt = if self.round.is_multiple_of(self.cfg.checkpoint_interval.max(1)) {
            self.cfg.checkpoint_save_time
        } else {
            0
        };
        Ok(base + self.cfg.client_checkpoint_time + ckpt)
    }

    /// Earliest pending revocation, ties broken by task index.
    fn next_revocation(&self) -> Option<(TimeMicros, usize)> {
        self.tasks
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.next_revocation.map(|at| (at, i)))
            .min()
    }

    /// Handles one revocation at `at` for task index `idx`; returns the
    /// instant the replacement VM is ready.
    fn handle_revocation(&mut self, at: TimeMicros, idx: usize) -> Result<TimeMicros, SimError> {
        self.bill(at)?;
        let revoked = self.tasks[idx].vm.clone();
        let task = self.tasks[idx].task.clone();
        self.emit(at, EventKind::Revocation { task: task.clone(), vm: revoked.clone() });
        match task {
            TaskRef::Server => self.server_revocations += 1,
            TaskRef::Client(_) => self.client_revocations += 1,
        }

        // consume the stream event and schedule this task's next one
        let k_r = self.cfg.k_r.expect("revocation without a rate");
        let dt = sample_interval(&mut self.tasks[idx].rng, k_r);
        self.tasks[idx].next_revocation = Some(at + dt);

        let map = self.current_map();
        let replacement = select_replacement(
            &task,
            &mut self.candidates,
            &revoked,
            &map,
            self.app,
            self.tables,
            self.env,
            &self.norms,
            self.app.alpha,
            self.cfg.revocation_policy,
        )
        .map_err(|source| SimError::Unrecoverable {
            source,
            partial: Box::new(self.partial_result()),
        })?;
        self.emit(at, EventKind::Replacement { task: task.clone(), vm: replacement.clone() });
        // billing switches to the replacement VM from the revocation instant
        self.tasks[idx].vm = replacement;

        match &task {
            TaskRef::Server => {
                let held_max = self.client_held.iter().copied().max().unwrap_or(0);
                let recovery = self.server_checkpoint.max(held_max);
                self.rounds_re_executed += self.round - recovery;
                self.round = recovery + 1;
            }
            TaskRef::Client(id) => {
                // the replacement VM's disk is empty
                if let Some(pos) = self.app.clients.iter().position(|c| &c.id == id) {
                    self.client_held[pos] = 0;
                }
            }
        }
        Ok(at + self.cfg.vm_prep_time)
    }

    fn partial_result(&self) -> SimResult {
        SimResult {
            server_revocations: self.server_revocations,
            client_revocations: self.client_revocations,
            total_time: self.now,
            total_cost: self.cost,
            rounds_re_executed: self.rounds_re_executed,
            events: self.events.clone(),
        }
    }

    fn run(mut self) -> Result<SimResult, SimError> {
        while self.round <= self.app.n_rounds {
            self.emit(self.now, EventKind::RoundStart { round: self.round });
            let duration = self.round_duration()?;
            let end = self.now + duration;

            if let Some((at, idx)) = self.next_revocation().filter(|&(at, _)| at < end) {
                // the round's progress is voided; recover, then restart it
                let mut ready = self.handle_revocation(at, idx)?;
                while let Some((at2, idx2)) =
                    self.next_revocation().filter(|&(at2, _)| at2 < ready)
                {
                    let r2 = self.handle_revocation(at2, idx2)?;
                    ready = ready.max(r2);
                }
                self.bill(ready)?;
                self.emit(ready, EventKind::RecoveryComplete { round: self.round });
                self.now = ready;
                continue;
            }

            // round completes
            self.bill(end)?;
            self.cost += self.round_comm_cost()?;
            self.emit(end, EventKind::RoundEnd { round: self.round });
            if self.round.is_multiple_of(self.cfg.checkpoint_interval.max(1)) {
                self.server_checkpoint = self.round;
                self.emit(end, EventKind::Checkpoint { round: self.round });
            }
            for held in &mut self.client_held {
                *held = self.round;
            }
            self.now = end;
            self.round += 1;
        }
        Ok(self.partial_result())
    }
}

/// Simulates one FL execution of `app` over `mapping` and returns the wall
/// clock, monetary cost, and event log. Deterministic in `cfg.seed`.
pub fn simulate(
    mapping: &SchedulingSolution,
    app: &FlApplication,
    env: &MultiCloudEnv,
    tables: &SlowdownTables,
    cfg: &SimConfig,
) -> Result<SimResult, SimError> {
    simulate_trial(mapping, app, env, tables, cfg, 0)
}

/// Simulates trial `trial_index` (seed derived from `cfg.seed`).
pub fn simulate_trial(
    mapping: &SchedulingSolution,
    app: &FlApplication,
    env: &MultiCloudEnv,
    tables: &SlowdownTables,
    cfg: &SimConfig,
    trial_index: u32,
) -> Result<SimResult, SimError> {
    let limits = round_limits(app);
    let norms = normalization(app, env, tables, &limits)?;
    let trial_seed = mix_seed(cfg.seed, 0x5EED_0000_0000_0000 | trial_index as u64);
    Trial::new(mapping, app, env, tables, cfg, norms, trial_seed).run()
}

/// Runs `cfg.trials` independent trials; trials may execute concurrently and
/// per-trial failures do not abort the remaining trials.
pub fn run_trials(
    mapping: &SchedulingSolution,
    app: &FlApplication,
    env: &MultiCloudEnv,
    tables: &SlowdownTables,
    cfg: &SimConfig,
) -> Vec<Result<SimResult, SimError>> {
    let indices: Vec<u32> = (0..cfg.trials.max(1)).collect();
    #[cfg(feature = "parallel")]
    {
        indices
            .par_iter()
            .map(|&i| simulate_trial(mapping, app, env, tables, cfg, i))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        indices
            .iter()
            .map(|&i| simulate_trial(mapping, app, env, tables, cfg, i))
            .collect()
    }
}

/// Means and sample standard deviations over trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialStats {
    pub trials: usize,
    pub mean_revocations: f64,
    pub sd_revocations: Option<f64>,
    pub mean_time_secs: f64,
    pub sd_time_secs: Option<f64>,
    pub mean_cost_usd: f64,
    pub sd_cost_usd: Option<f64>,
}

fn mean_sd(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, Some(var.sqrt()))
}

pub fn aggregate_trials(results: &[SimResult]) -> TrialStats {
    assert!(!results.is_empty(), "aggregate_trials needs at least one trial");
    let rev: Vec<f64> = results.iter().map(|r| r.revocations() as f64).collect();
    let time: Vec<f64> = results
        .iter()
        .map(|r| crate::units::micros_to_secs(r.total_time))
        .collect();
    let cost: Vec<f64> = results
        .iter()
        .map(|r| crate::units::micros_to_usd(r.total_cost))
        .collect();
    let (mean_revocations, sd_revocations) = mean_sd(&rev);
    let (mean_time_secs, sd_time_secs) = mean_sd(&time);
    let (mean_cost_usd, sd_cost_usd) = mean_sd(&cost);
    TrialStats {
        trials: results.len(),
        mean_revocations,
        sd_revocations,
        mean_time_secs,
        sd_time_secs,
        mean_cost_usd,
        sd_cost_usd,
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("baseline value is zero")]
pub struct ZeroBaseline;

/// Signed improvement of `optimal` over `baseline` in percent:
/// (v_baseline - v_optimal) / v_baseline * 100. Negative when the optimal
/// value is larger.
pub fn percent_difference(optimal: f64, baseline: f64) -> Result<f64, ZeroBaseline> {
    if baseline == 0.0 {
        return Err(ZeroBaseline);
    }
    Ok((baseline - optimal) / baseline * 100.0)
}

/// Time and cost differences between two evaluated placements.
pub fn compare_solutions(
    optimal: &SchedulingSolution,
    baseline: &SchedulingSolution,
) -> Result<(f64, f64), ZeroBaseline> {
    let time = percent_difference(
        crate::units::micros_to_secs(optimal.makespan),
        crate::units::micros_to_secs(baseline.makespan),
    )?;
    let cost = percent_difference(
        crate::units::micros_to_usd(optimal.total_costs),
        crate::units::micros_to_usd(baseline.total_costs),
    )?;
    Ok((time, cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assign::evaluate_fixed;
    use crate::testenv;

    #[test]
    fn horizon_zero_yields_no_arrivals() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        assert!(sample_revocation_times(7_200_000_000, 0, &mut rng).is_empty());
    }

    #[test]
    fn identical_seeds_give_identical_arrival_lists() {
        let mut a = ChaCha12Rng::seed_from_u64(42);
        let mut b = ChaCha12Rng::seed_from_u64(42);
        let xs = sample_revocation_times(7_200_000_000, 7_200_000_000 * 100, &mut a);
        let ys = sample_revocation_times(7_200_000_000, 7_200_000_000 * 100, &mut b);
        assert_eq!(xs, ys);
    }

    fn no_failure_cfg() -> SimConfig {
        SimConfig::default()
    }

    fn til_like_setup() -> (
        MultiCloudEnv,
        SlowdownTables,
        FlApplication,
        SchedulingSolution,
    ) {
        let env = testenv::aws_gcp_env();
        let tables = testenv::measured_tables();
        let mut app = testenv::gcp_app(4);
        app.n_rounds = 10;
        let map = testenv::uniform_assignment(
            &app,
            &VmAddress::new("gcp", "us-central1", "n1-standard-8-v100"),
            &VmAddress::new("gcp", "us-central1", "e2-standard-4"),
        );
        let solution = evaluate_fixed(&map, &app, &env, &tables).unwrap();
        (env, tables, app, solution)
    }

    #[test]
    fn no_failure_run_matches_analytic_values_exactly() {
        let (env, tables, app, solution) = til_like_setup();
        let cfg = no_failure_cfg();
        let result = simulate(&solution, &app, &env, &tables, &cfg).unwrap();
        assert_eq!(result.total_time, 10 * solution.makespan);
        assert_eq!(result.total_cost, 10 * solution.total_costs);
        assert_eq!(result.revocations(), 0);
        assert_eq!(result.rounds_re_executed, 0);
        assert_eq!(
            result.events.iter().filter(|e| matches!(e.kind, EventKind::RoundEnd { .. })).count(),
            10
        );
    }

    #[test]
    fn checkpoint_overhead_shrinks_with_interval() {
        let (env, tables, mut app, _) = til_like_setup();
        app.n_rounds = 120;
        let map = testenv::uniform_assignment(
            &app,
            &VmAddress::new("gcp", "us-central1", "n1-standard-8-v100"),
            &VmAddress::new("gcp", "us-central1", "e2-standard-4"),
        );
        let solution = evaluate_fixed(&map, &app, &env, &tables).unwrap();
        let baseline = simulate(&solution, &app, &env, &tables, &no_failure_cfg())
            .unwrap()
            .total_time;
        let mut last = TimeMicros::MAX;
        for x in [10u32, 20, 30, 40] {
            let cfg = SimConfig {
                checkpoint_interval: x,
                checkpoint_save_time: crate::units::secs_to_micros(2.0),
                ..no_failure_cfg()
            };
            let t = simulate(&solution, &app, &env, &tables, &cfg).unwrap().total_time;
            assert!(t > baseline);
            assert!(t < last, "overhead must strictly shrink as X grows");
            last = t;
        }
    }

    #[test]
    fn first_round_multiplier_stretches_round_one_only() {
        let (env, tables, app, solution) = til_like_setup();
        let cfg = SimConfig {
            first_round_multiplier: 2_000_000,
            ..no_failure_cfg()
        };
        let r = simulate(&solution, &app, &env, &tables, &cfg).unwrap();
        // 10 rounds, the first one doubled
        assert_eq!(r.total_time, 11 * solution.makespan);
    }

    #[test]
    fn simulation_is_deterministic_per_seed() {
        let (env, tables, app, solution) = til_like_setup();
        // keep the failure process subcritical: five spot VMs must not spawn
        // recoveries faster than they complete (5 x prep << k_r)
        let cfg = SimConfig {
            k_r: Some(crate::units::secs_to_micros(900.0)),
            scenario: Scenario::AllSpot,
            vm_prep_time: crate::units::secs_to_micros(30.0),
            revocation_policy: RevocationPolicy::RetainType,
            seed: 7,
            ..no_failure_cfg()
        };
        let a = simulate(&solution, &app, &env, &tables, &cfg).unwrap();
        let b = simulate(&solution, &app, &env, &tables, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.revocations() > 0, "expected revocations at this rate");
        assert!(
            a.events.windows(2).all(|w| w[0].time <= w[1].time),
            "event times must be non-decreasing"
        );

        let cfg2 = SimConfig { seed: 8, ..cfg };
        let c = simulate(&solution, &app, &env, &tables, &cfg2).unwrap();
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn revocations_extend_time_and_server_rollback_counts_rounds() {
        let (env, tables, app, solution) = til_like_setup();
        let cfg = SimConfig {
            k_r: Some(crate::units::secs_to_micros(700.0)),
            scenario: Scenario::AllSpot,
            vm_prep_time: crate::units::secs_to_micros(30.0),
            revocation_policy: RevocationPolicy::RetainType,
            seed: 3,
            ..no_failure_cfg()
        };
        let r = simulate(&solution, &app, &env, &tables, &cfg).unwrap();
        assert!(r.revocations() > 0);
        assert!(r.total_time > 10 * solution.makespan);
        assert_eq!(r.rounds_re_executed as usize, {
            // every server revocation rolls back to the latest client-held
            // round, which is the round in flight minus one
            r.server_revocations as usize
        });
    }

    #[test]
    fn aggregate_examples() {
        let (env, tables, app, solution) = til_like_setup();
        let cfg = no_failure_cfg();
        let one = simulate(&solution, &app, &env, &tables, &cfg).unwrap();
        let stats = aggregate_trials(std::slice::from_ref(&one));
        assert_eq!(stats.mean_revocations, 0.0);
        assert!(stats.sd_revocations.is_none());

        let mut two = one.clone();
        two.server_revocations = 2;
        let mut three = one.clone();
        three.client_revocations = 1;
        let mut four = one;
        four.client_revocations = 1;
        let stats = aggregate_trials(&[two, three, four]);
        assert!((stats.mean_revocations - 4.0 / 3.0).abs() < 1e-9);

        let (envd, tablesd, appd, sol) = (&env, &tables, &app, &solution);
        let _ = (envd, tablesd, appd);
        let same = aggregate_trials(&[
            simulate(sol, &app, &env, &tables, &cfg).unwrap(),
            simulate(sol, &app, &env, &tables, &cfg).unwrap(),
        ]);
        assert_eq!(same.sd_time_secs, Some(0.0));
    }

    #[test]
    fn percent_difference_examples() {
        assert_eq!(percent_difference(5.0, 5.0).unwrap(), 0.0);
        // unrounded values behind the reported fifty-client comparison
        let time = percent_difference(105.0, 226.8).unwrap();
        assert!((time - 53.70).abs() < 0.01, "{time}");
        let cost = percent_difference(1.122661, 0.814345).unwrap();
        assert!((cost - -37.86).abs() < 0.05, "{cost}");
        assert!(percent_difference(1.0, 0.0).is_err());
    }
}

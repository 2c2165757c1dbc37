//! Property tests for the scheduling invariants that hold over whole input
//! families rather than single fixtures.

use proptest::prelude::*;
use std::collections::BTreeMap;

use fedsched::app::{round_limits, ClientSpec, FlApplication, MessageProfile};
use fedsched::assign::Assignment;
use fedsched::cloud::{
    capacity_usage, vm_type, MultiCloudEnv, Pricing, ProviderSpec, Quota, RegionSpec, VmAddress,
};
use fedsched::slowdowns::{ExecTable, RegionPair, SlowdownTables};
use fedsched::solver::solve;

fn single_region_env(prices: &[i64]) -> MultiCloudEnv {
    MultiCloudEnv {
        providers: vec![ProviderSpec {
            id: "p0".into(),
            transfer_cost_per_gb: 90_000,
            gpu_quota: Quota::Unbounded,
            vcpu_quota: Quota::Unbounded,
            regions: vec![RegionSpec {
                id: "r0".into(),
                gpu_quota: Quota::Unbounded,
                vcpu_quota: Quota::Unbounded,
                vm_types: prices
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| vm_type(&format!("v{i}"), 4, 1, p, None, 200_000))
                    .collect(),
            }],
        }],
    }
}

fn tables_for(env: &MultiCloudEnv, slowdowns: &[u64]) -> SlowdownTables {
    let entries: BTreeMap<VmAddress, u64> = env
        .vm_addresses()
        .zip(slowdowns.iter().copied())
        .collect();
    let pair = RegionPair::new(("p0".into(), "r0".into()), ("p0".into(), "r0".into()));
    let mut comm = BTreeMap::new();
    comm.insert(pair.clone(), 1_000_000);
    SlowdownTables {
        exec: vec![ExecTable {
            dataset_location: None,
            entries,
        }],
        comm,
        baseline_vm: env.vm_addresses().next().unwrap(),
        baseline_pair: pair,
    }
}

fn app_with(n_clients: usize, alpha: u64) -> FlApplication {
    FlApplication {
        clients: (0..n_clients)
            .map(|i| ClientSpec {
                id: format!("c{i}"),
                dataset_location: ("p0".into(), "r0".into()),
                baseline_train_time: 100_000_000,
                baseline_test_time: 20_000_000,
            })
            .collect(),
        n_rounds: 1,
        epochs_per_round: 1,
        messages: MessageProfile {
            server_train_msg: 500_000_000,
            server_aggreg_msg: 500_000_000,
            client_train_msg: 500_000_000,
            client_test_msg: 2_000,
        },
        budget: 50_000_000_000,
        deadline: 5_000_000_000,
        alpha,
        baseline_comm_time: 10_000_000,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// A superset of VM choices can never worsen the optimum.
    #[test]
    fn optimum_is_monotone_in_the_catalog(
        prices in proptest::collection::vec(100_000i64..3_000_000, 2..5),
        slowdowns in proptest::collection::vec(200_000u64..3_000_000, 5),
        extra_price in 100_000i64..3_000_000,
        extra_slowdown in 200_000u64..3_000_000,
        alpha in prop_oneof![Just(0u64), Just(500_000u64), Just(1_000_000u64)],
    ) {
        let n = prices.len();
        let env = single_region_env(&prices);
        let tables = tables_for(&env, &slowdowns[..n]);
        let app = app_with(2, alpha);
        let limits = round_limits(&app);
        let base = solve(&app, &env, &tables, &limits, alpha, Pricing::OnDemand).unwrap();

        let mut grown_prices = prices.clone();
        grown_prices.push(extra_price);
        let env2 = single_region_env(&grown_prices);
        let mut sl2 = slowdowns[..n].to_vec();
        sl2.push(extra_slowdown);
        let tables2 = tables_for(&env2, &sl2);
        let grown = solve(&app, &env2, &tables2, &limits, alpha, Pricing::OnDemand).unwrap();

        prop_assert!(grown.objective <= base.objective + 1e-12,
            "objective worsened: {} -> {}", base.objective, grown.objective);
    }

    /// Scaling every price by an integer factor leaves the pure-makespan
    /// argmin's makespan unchanged.
    #[test]
    fn price_scaling_keeps_alpha_zero_makespan(
        prices in proptest::collection::vec(100_000i64..2_000_000, 2..5),
        slowdowns in proptest::collection::vec(200_000u64..3_000_000, 5),
        k in 2i64..10,
    ) {
        let n = prices.len();
        let env = single_region_env(&prices);
        let tables = tables_for(&env, &slowdowns[..n]);
        let app = app_with(2, 0);
        let limits = round_limits(&app);
        let a = solve(&app, &env, &tables, &limits, 0, Pricing::OnDemand).unwrap();

        let scaled: Vec<i64> = prices.iter().map(|p| p * k).collect();
        let env2 = single_region_env(&scaled);
        let b = solve(&app, &env2, &tables, &limits, 0, Pricing::OnDemand).unwrap();
        prop_assert_eq!(a.makespan, b.makespan);
        prop_assert_eq!(&a.assignment.client_vm, &b.assignment.client_vm);
    }

    /// Capacity usage is additive over disjoint assignments.
    #[test]
    fn capacity_usage_is_additive(
        choice_a in proptest::collection::vec(0usize..4, 1..4),
        choice_b in proptest::collection::vec(0usize..4, 1..4),
        server in 0usize..4,
    ) {
        let env = single_region_env(&[500_000, 600_000, 700_000, 800_000]);
        let addrs: Vec<VmAddress> = env.vm_addresses().collect();
        let build = |prefix: &str, choices: &[usize]| Assignment {
            client_vm: choices
                .iter()
                .enumerate()
                .map(|(i, &c)| (format!("{prefix}{i}"), addrs[c].clone()))
                .collect(),
            server_vm: addrs[server].clone(),
            pricing: Pricing::OnDemand,
        };
        let a = build("a", &choice_a);
        let b = build("b", &choice_b);
        let mut merged = a.clone();
        merged.client_vm.extend(b.client_vm.clone());

        // the server appears in both parts, so the sum over-counts exactly
        // one server's worth of capacity
        let ua = capacity_usage(&env, &a).unwrap();
        let ub = capacity_usage(&env, &b).unwrap();
        let um = capacity_usage(&env, &merged).unwrap();
        let server_vm = env.resolve(&addrs[server]).unwrap().vm;
        let mut sum = ua.clone();
        sum.add(&ub);
        let key = ("p0".to_string(), "r0".to_string());
        prop_assert_eq!(
            sum.per_region[&key].0,
            um.per_region[&key].0 + server_vm.vcpus
        );
        prop_assert_eq!(
            sum.per_region[&key].1,
            um.per_region[&key].1 + server_vm.gpus
        );
    }

    /// Budget/deadline splitting scales linearly when the division is exact.
    #[test]
    fn round_limits_are_homogeneous(
        per_round_budget in 1i64..10_000_000,
        per_round_deadline in 1i64..10_000_000,
        n_rounds in 1u32..50,
        k in 1i64..20,
    ) {
        let mut app = app_with(1, 500_000);
        app.n_rounds = n_rounds;
        app.budget = per_round_budget * n_rounds as i64;
        app.deadline = per_round_deadline * n_rounds as i64;
        let base = round_limits(&app);

        app.budget *= k;
        app.deadline *= k;
        let scaled = round_limits(&app);
        prop_assert_eq!(scaled.budget_per_round, base.budget_per_round * k);
        prop_assert_eq!(scaled.deadline_per_round, base.deadline_per_round * k);
    }

    /// Canonical region pairs make communication lookups symmetric.
    #[test]
    fn region_pairs_are_unordered(
        pa in "[a-c]{1,3}", ra in "[a-c]{1,3}",
        pb in "[a-c]{1,3}", rb in "[a-c]{1,3}",
    ) {
        let x = (pa, ra);
        let y = (pb, rb);
        prop_assert_eq!(RegionPair::of(&x, &y), RegionPair::of(&y, &x));
    }
}

//! Benchmarks for the placement search and the failure simulator, comparing
//! the rayon-parallel build against the sequential fallback.
//!
//! Run both modes and compare:
//!
//! ```text
//! cargo bench -p fedsched
//! cargo bench -p fedsched --no-default-features
//! ```
//!
//! Benchmark ids carry the compiled mode so reports from the two runs line
//! up side by side.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use fedsched::app::round_limits;
use fedsched::bundle::load_bundle_str;
use fedsched::cloud::{MultiCloudEnv, Pricing};
use fedsched::sim::{run_trials, Scenario, SimConfig};
use fedsched::solver::solve;

const MODE: &str = if cfg!(feature = "parallel") {
    "parallel"
} else {
    "sequential"
};

fn fixture(name: &str) -> String {
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/");
    std::fs::read_to_string(format!("{root}{name}")).expect("fixture")
}

/// Six copies of every VM type: the synthetic 78-VM wide-catalog scenario.
fn widen_catalog(env: &MultiCloudEnv, copies: usize) -> MultiCloudEnv {
    let mut out = env.clone();
    for p in &mut out.providers {
        for r in &mut p.regions {
            let base = r.vm_types.clone();
            for i in 1..copies {
                for vm in &base {
                    let mut vm = vm.clone();
                    vm.id = format!("{}-syn{}", vm.id, i);
                    r.vm_types.push(vm);
                }
            }
        }
    }
    out
}

fn widen_tables(
    tables: &fedsched::slowdowns::SlowdownTables,
    copies: usize,
) -> fedsched::slowdowns::SlowdownTables {
    let mut out = tables.clone();
    for table in &mut out.exec {
        let base: Vec<_> = table.entries.clone().into_iter().collect();
        for i in 1..copies {
            for (addr, sl) in &base {
                let mut addr = addr.clone();
                addr.vm_type = format!("{}-syn{}", addr.vm_type, i);
                table.entries.insert(addr, *sl);
            }
        }
    }
    out
}

fn bench_solve(c: &mut Criterion) {
    let bundle = load_bundle_str(&fixture("gcp50.toml"), "gcp50.toml")
        .expect("load")
        .bundle;
    let limits = round_limits(&bundle.app);

    c.bench_function(&format!("solve/gcp50-13vms/{MODE}"), |b| {
        b.iter(|| {
            solve(
                black_box(&bundle.app),
                &bundle.env,
                &bundle.tables,
                &limits,
                500_000,
                Pricing::OnDemand,
            )
            .unwrap()
        })
    });

    let wide_env = widen_catalog(&bundle.env, 6);
    let wide_tables = widen_tables(&bundle.tables, 6);
    c.bench_function(&format!("solve/gcp50-78vms/{MODE}"), |b| {
        b.iter(|| {
            solve(
                black_box(&bundle.app),
                &wide_env,
                &wide_tables,
                &limits,
                500_000,
                Pricing::OnDemand,
            )
            .unwrap()
        })
    });
}

fn bench_simulate(c: &mut Criterion) {
    let bundle = load_bundle_str(&fixture("cloudlab_til.toml"), "cloudlab_til.toml")
        .expect("load")
        .bundle;
    let limits = round_limits(&bundle.app);
    let mapping = solve(
        &bundle.app,
        &bundle.env,
        &bundle.tables,
        &limits,
        bundle.app.alpha,
        Pricing::OnDemand,
    )
    .unwrap();
    let cfg = SimConfig {
        k_r: Some(7_200_000_000),
        scenario: Scenario::AllSpot,
        trials: 64,
        seed: 42,
        ..bundle.sim.clone().unwrap_or_default()
    };

    c.bench_function(&format!("simulate/til-64-trials/{MODE}"), |b| {
        b.iter(|| {
            let outcomes = run_trials(
                black_box(&mapping),
                &bundle.app,
                &bundle.env,
                &bundle.tables,
                &cfg,
            );
            assert!(outcomes.iter().all(|o| o.is_ok()));
            outcomes
        })
    });
}

criterion_group!(benches, bench_solve, bench_simulate);
criterion_main!(benches);

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use stoqmc_bench::{ferro_ising, tim_chain, walk_workload};
use stoqmc_core::basis::BasisState;
use stoqmc_core::ising::{estimate_partition, partition_exact_enum, partition_exact_layered, sw_sweep};
use stoqmc_core::rng::stream;
use stoqmc_core::trotter::{map_to_classical, plan_trotter};
use stoqmc_core::walk::{BranchingWalk, RowCache, RunLimits, WalkerPopulation};

fn walk(c: &mut Criterion) {
    let w = walk_workload(10, -9.0).unwrap();
    let walk = BranchingWalk::new(&w.hamiltonian, w.green, &w.guide).unwrap();
    let limits = RunLimits { steps: 40, gamma_max: Some(400), early_exit: true };
    let mut cache = RowCache::new();
    let mut rng = stream(1, 0);
    let mut pop = WalkerPopulation::empty();
    for x in 0..64 {
        pop.add(BasisState(x), 3);
    }
    c.bench_function("walk_step_n10_pop192", |b| {
        b.iter(|| walk.step(black_box(&pop), &mut rng, &mut cache).unwrap())
    });
    c.bench_function("walk_run_n10_L40", |b| {
        b.iter(|| walk.run(BasisState(0), &limits, &mut rng, &mut cache).unwrap())
    });
}

fn ising(c: &mut Criterion) {
    let model = ferro_ising(64, 2).unwrap();
    let mut spins = vec![1i8; 64];
    let mut rng = stream(2, 0);
    c.bench_function("sw_sweep_N64", |b| {
        b.iter(|| sw_sweep(&model, 0.8, &mut spins, &mut rng).unwrap())
    });
    let small = ferro_ising(18, 3).unwrap();
    c.bench_function("gray_code_enum_N18", |b| b.iter(|| partition_exact_enum(black_box(&small)).unwrap()));
    let mut group = c.benchmark_group("estimator");
    group.sample_size(10);
    let medium = ferro_ising(16, 4).unwrap();
    group.bench_function("estimate_N16_delta0.1", |b| b.iter(|| estimate_partition(&medium, 0.1, 5).unwrap()));
    group.finish();
}

fn mapping(c: &mut Criterion) {
    let tim = tim_chain(6, 1.0).unwrap();
    let plan = plan_trotter(&tim, 0.1).unwrap();
    c.bench_function("map_chain_n6", |b| b.iter(|| map_to_classical(&tim, &plan, None).unwrap()));
    let mapped = map_to_classical(&tim, &plan, None).unwrap();
    c.bench_function("layered_transfer_n6", |b| {
        b.iter(|| partition_exact_layered(&mapped.ising, 6).unwrap())
    });
}

criterion_group!(kernels, walk, ising, mapping);
criterion_main!(kernels);

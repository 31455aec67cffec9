//! Sequential vs pooled executor on the batch workloads.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use patternforge::drc::{check_batch, RuleSet, RuleVariant};
use patternforge::genloop::{denoise_ablation, synthetic_uni_starters, StochasticParams};
use patternforge::legalizer::{bench, BenchConfig};
use patternforge::par::Executor;

/// Without the `parallel` feature the pool entry also runs sequentially.
fn executors() -> Vec<(String, Executor)> {
    let jobs = Executor::new(0).jobs().max(2);
    vec![
        ("sequential".to_string(), Executor::sequential()),
        (format!("pool-{jobs}"), Executor::new(jobs)),
    ]
}

fn drc_batch(c: &mut Criterion) {
    let rules = RuleSet::preset("uni7").unwrap();
    let grids = synthetic_uni_starters(64, 128, 128, &rules, 1).unwrap();
    let mut group = c.benchmark_group("drc_batch");
    for (name, exec) in executors() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| check_batch(black_box(&grids), &rules, &exec).unwrap())
        });
    }
    group.finish();
}

fn vary_denoise(c: &mut Criterion) {
    let rules = RuleSet::preset("uni7").unwrap();
    let parents = synthetic_uni_starters(8, 64, 64, &rules, 2).unwrap();
    let params = StochasticParams { rules_hint: Some(rules.clone()), ..Default::default() };
    let mut group = c.benchmark_group("vary_denoise_drc");
    group.sample_size(20);
    for (name, exec) in executors() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| denoise_ablation(black_box(&parents), &rules, &params, 200, 2, 3, &exec).unwrap())
        });
    }
    group.finish();
}

fn solver(c: &mut Criterion) {
    let cfg = BenchConfig {
        sizes: vec![8, 16],
        variants: vec![RuleVariant::Default, RuleVariant::ComplexDiscrete],
        samples: 16,
        budget: 5_000,
        seed: 4,
        rules: RuleSet::preset("complex_discrete").unwrap(),
    };
    let mut group = c.benchmark_group("solver_bench");
    group.sample_size(10);
    for (name, exec) in executors() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| bench(black_box(&cfg), &exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, drc_batch, vary_denoise, solver);
criterion_main!(benches);

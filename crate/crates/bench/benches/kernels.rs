use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rscn::growth::configure_node;
use rscn::seeds::{rng_for, Stream};
use rscn::{build_rscn, max_singular_value, run_reservoir, solve_output_weights, BuildConfig, DVector};
use rscn_bench::{dense, esn_model, initial_build_state, mg_task};
use std::hint::black_box;

fn reservoir_run(c: &mut Criterion) {
    let task = mg_task();
    let mut group = c.benchmark_group("run_reservoir");
    for n in [50, 100, 200] {
        let model = esn_model(&task, n);
        let x0 = DVector::zeros(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| run_reservoir(&model, black_box(task.train.inputs()), &x0).unwrap())
        });
    }
    group.finish();
}

fn sigma_max(c: &mut Criterion) {
    let mut group = c.benchmark_group("max_singular_value");
    for n in [50, 100, 200] {
        let w = dense(n, n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| max_singular_value(black_box(&w))));
    }
    group.finish();
}

fn readout_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_output_weights");
    for n in [50, 100, 200] {
        let x = dense(n, 2000);
        let t = dense(1, 2000);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| solve_output_weights(black_box(&x), &t, 0.0).unwrap())
        });
    }
    group.finish();
}

fn candidate_search(c: &mut Criterion) {
    let task = mg_task();
    let cfg = BuildConfig::default();
    let state = initial_build_state(&task, &cfg);
    c.bench_function("configure_node/g_max=100", |b| {
        let mut rng = rng_for(cfg.seed, Stream::Candidates);
        b.iter(|| configure_node(&state, &cfg, 0.5, 0.9, &mut rng).unwrap())
    });
}

fn full_build(c: &mut Criterion) {
    let task = mg_task();
    let cfg = BuildConfig {
        n_max: 30,
        ..BuildConfig::default()
    };
    let mut group = c.benchmark_group("build_rscn");
    group.sample_size(10);
    group.bench_function("mg/n_max=30", |b| b.iter(|| build_rscn(&task.train, &task.val, &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, reservoir_run, sigma_max, readout_solve, candidate_search, full_build);
criterion_main!(benches);

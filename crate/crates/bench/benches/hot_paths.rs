use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use rvbench_core::evaluator::{evaluate, MatchConfig, Submission};
use rvbench_core::orbit::solve_kepler;
use rvbench_core::solver::{default_frequency_range, gls_periodogram, greedy_solve, DEFAULT_N_FREQ};
use rvbench_core::task::generate_task;

fn kepler(c: &mut Criterion) {
    let grid: Vec<(f64, f64)> = (0..1000)
        .map(|i| (i as f64 * 0.0123 - 6.0, (i % 100) as f64 * 0.0099))
        .collect();
    c.bench_function("solve_kepler x1000", |b| {
        b.iter(|| {
            for &(m, e) in &grid {
                black_box(solve_kepler(black_box(m), black_box(e)).unwrap());
            }
        })
    });
}

fn generator(c: &mut Criterion) {
    let mut seed = 0u64;
    c.bench_function("generate_task", |b| {
        b.iter(|| {
            seed += 1;
            black_box(generate_task(seed).ok())
        })
    });
}

fn periodogram_and_solver(c: &mut Criterion) {
    let task = generate_task(1000).unwrap();
    let ds = &task.dataset;
    let (f_min, f_max) = default_frequency_range(ds.baseline_days());
    c.bench_function("gls_periodogram", |b| {
        b.iter(|| black_box(gls_periodogram(ds, f_min, f_max, DEFAULT_N_FREQ).unwrap()))
    });

    let mut group = c.benchmark_group("solver");
    group.sample_size(10);
    group.bench_function("greedy_solve", |b| b.iter(|| black_box(greedy_solve(ds))));
    group.finish();

    let sub = Submission::new(task.truth_planets.iter().map(|p| p.elements).collect());
    let sub = Submission {
        offsets: Some(task.truth_offsets.clone()),
        ..sub
    };
    let cfg = MatchConfig::default();
    c.bench_function("evaluate", |b| {
        b.iter_batched(|| sub.clone(), |s| black_box(evaluate(&s, &task, &cfg).unwrap()), BatchSize::SmallInput)
    });
}

criterion_group!(benches, kepler, generator, periodogram_and_solver);
criterion_main!(benches);

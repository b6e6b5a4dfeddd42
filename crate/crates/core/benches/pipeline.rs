//! Parallel vs single-threaded timings for the heavy pipeline stages.
//!
//! With the default `parallel` feature each stage runs once on the global
//! rayon pool and once inside a one-thread pool. Built with
//! `--no-default-features`, only the sequential fallback is measured.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;
use rfphate::diffusion::{matrix_power, potential_distances, row_normalize, PotentialTransform};
use rfphate::embed::{classical_mds, metric_mds};
use rfphate::forest::{compute_proximities, train_forest};
use rfphate::{Dataset, ForestParams, LabelVector, RandomSeed};

fn synthetic(n: usize, p: usize) -> (Dataset, LabelVector) {
    let mut rng = RandomSeed(11).rng();
    let x = DMatrix::from_fn(n, p, |_, _| rand::Rng::random::<f64>(&mut rng));
    let classes = (0..n).map(|i| usize::from(x[(i, 0)] + x[(i, 1)] > 1.0)).collect();
    let names = (0..p).map(|j| format!("x{j}")).collect();
    (Dataset::from_matrix(x, names).unwrap(), LabelVector::classes(classes))
}

#[cfg(feature = "parallel")]
fn modes() -> Vec<(&'static str, Option<rayon::ThreadPool>)> {
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    vec![("parallel", None), ("sequential", Some(single))]
}

#[cfg(not(feature = "parallel"))]
fn modes() -> Vec<(&'static str, Option<()>)> {
    vec![("sequential", None)]
}

#[cfg(feature = "parallel")]
fn run<R: Send>(pool: &Option<rayon::ThreadPool>, f: impl FnOnce() -> R + Send) -> R {
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run<R>(_: &Option<()>, f: impl FnOnce() -> R) -> R {
    f()
}

fn bench_stages(c: &mut Criterion) {
    let (ds, y) = synthetic(300, 10);
    let params = ForestParams {
        n_trees: 200,
        seed: RandomSeed(1),
        ..Default::default()
    };
    let forest = train_forest(&ds, &y, &params).unwrap();
    let kernel = compute_proximities(&forest, &ds).unwrap();
    let p = row_normalize(&kernel.k).unwrap();
    let pt = matrix_power(&p, 8).unwrap();
    let d = potential_distances(&pt, PotentialTransform::default()).unwrap().d;
    let init = classical_mds(&d, 2).unwrap();

    let mut group = c.benchmark_group("stages");
    group.sample_size(10);
    for (name, pool) in modes() {
        group.bench_with_input(BenchmarkId::new("train_forest", name), &(), |b, _| {
            b.iter(|| run(&pool, || train_forest(&ds, &y, &params).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("proximities", name), &(), |b, _| {
            b.iter(|| run(&pool, || compute_proximities(&forest, &ds).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("matrix_power", name), &(), |b, _| {
            b.iter(|| run(&pool, || matrix_power(&p, 8).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("metric_mds", name), &(), |b, _| {
            b.iter(|| run(&pool, || metric_mds(&d, 2, &init, 1e-6, 50).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_stages);
criterion_main!(benches);

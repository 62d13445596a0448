use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qdim_core::ifs::presets::{cantor, geometric_half_third};
use qdim_core::{Distribution1d, SelfSimilarMeasure};

fn cdf_and_quantile(c: &mut Criterion) {
    let models = [("cantor", cantor()), ("geometric", geometric_half_third())];
    let xs: Vec<f64> = (1..64).map(|i| i as f64 / 64.0).collect();
    let mut group = c.benchmark_group("cdf");
    for (name, model) in models {
        let mu = SelfSimilarMeasure::new(model);
        for tol in [1e-6, 1e-10] {
            group.bench_with_input(BenchmarkId::new(name, tol), &tol, |b, &tol| {
                b.iter(|| xs.iter().map(|&x| mu.cdf(black_box(x), tol).unwrap()).sum::<f64>())
            });
        }
        group.bench_function(BenchmarkId::new(format!("{name}/quantile"), 1e-10), |b| {
            b.iter(|| xs.iter().map(|&u| mu.quantile(black_box(u), 1e-10).unwrap()).sum::<f64>())
        });
    }
    group.finish();
}

criterion_group!(benches, cdf_and_quantile);
criterion_main!(benches);

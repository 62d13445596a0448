use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qdim_core::antichain::{antichain_at_most, build_antichain};

fn antichains(c: &mut Criterion) {
    let alphabets: [(&str, Vec<f64>); 2] =
        [("two", vec![0.5, 0.5]), ("five", vec![0.1, 0.15, 0.2, 0.25, 0.3])];
    let mut group = c.benchmark_group("build_antichain");
    for (name, probs) in &alphabets {
        for eps in [1e-2, 1e-3, 1e-4] {
            group.bench_with_input(BenchmarkId::new(*name, eps), &eps, |b, &eps| {
                b.iter(|| build_antichain(black_box(probs), eps).unwrap().len())
            });
        }
        group.bench_function(BenchmarkId::new(format!("{name}/at_most"), 4096), |b| {
            b.iter(|| antichain_at_most(black_box(probs), 4096).unwrap().1.len())
        });
    }
    group.finish();
}

criterion_group!(benches, antichains);
criterion_main!(benches);

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qdim_core::ifs::presets::{cantor, geometric_half_third};
use qdim_core::quantizer::{build_codebook, gme_exact, Anchor, Strategy};
use qdim_core::SelfSimilarMeasure;

fn exact_error(c: &mut Criterion) {
    let models = [("cantor", cantor()), ("geometric", geometric_half_third())];
    let strategy = Strategy::AntichainFit { anchor: Anchor::Center };
    let mut group = c.benchmark_group("gme_exact");
    group.sample_size(10);
    for (name, model) in models {
        let mu = SelfSimilarMeasure::new(model);
        for n in [16, 256, 4096] {
            let cb = build_codebook(&mu, n, &strategy, 1e-6).unwrap();
            group.bench_with_input(BenchmarkId::new(name, n), &cb, |b, cb| {
                b.iter(|| gme_exact(&mu, black_box(cb), 1e-6).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, exact_error);
criterion_main!(benches);

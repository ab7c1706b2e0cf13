use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use deft_bench::gradient_fixture;
use deft_core::{Method, ProjectionConfig};

fn builders(c: &mut Criterion) {
    let mut group = c.benchmark_group("projector_build");
    group.sample_size(10);
    for (m, n, k) in [(256, 256, 32), (1024, 512, 64)] {
        let g = gradient_fixture(m, n, 0);
        for method in [Method::Deft, Method::Svd, Method::Rsvd, Method::Dct] {
            let cfg = ProjectionConfig {
                method,
                rank: k,
                ..Default::default()
            };
            group.bench_with_input(BenchmarkId::new(method.as_str(), format!("{m}x{n}/k{k}")), &g, |b, g| {
                b.iter(|| cfg.build(g, 0).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, builders);
criterion_main!(benches);

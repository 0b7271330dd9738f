use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lipbound::{run_recursion, Method, StrategyConfig};
use lipbound_bench::network;

fn recursion(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_recursion");
    group.sample_size(10);
    for width in [40, 100] {
        let net = network(20, width, 1);
        for method in Method::ALL {
            let cfg = StrategyConfig::new(method);
            group.bench_with_input(
                BenchmarkId::new(method.name(), format!("d20w{width}")),
                &cfg,
                |b, cfg| b.iter(|| run_recursion(black_box(&net), cfg).unwrap()),
            );
        }
    }
    group.finish();
}

criterion_group!(benches, recursion);
criterion_main!(benches);

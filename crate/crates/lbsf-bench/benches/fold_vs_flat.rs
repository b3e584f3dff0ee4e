//! Flat full-sequence attention vs the folded hierarchy, across sequence
//! lengths. Run with `cargo bench -p lbsf-bench`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lbsf_bench::{BenchConfig, DEFAULT_M};
use lbsf_core::eval::bench::BenchHarness;

fn attention_cost(c: &mut Criterion) {
    let cfg = BenchConfig { d_model: 64, n_heads: 4, trials: 1, seed: 7 };
    let mut group = c.benchmark_group("attention_cost");
    group.sample_size(10);
    for &t in &[256usize, 512, 1024] {
        let harness = BenchHarness::new(t, DEFAULT_M, &cfg);
        group.bench_with_input(BenchmarkId::new("flat", t), &t, |b, _| {
            b.iter(|| harness.flat_pass().unwrap())
        });
        group.bench_with_input(BenchmarkId::new("folded", t), &t, |b, _| {
            b.iter(|| harness.folded_pass().unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, attention_cost);
criterion_main!(benches);

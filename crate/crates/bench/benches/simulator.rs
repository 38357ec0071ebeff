use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rvmb_bench::{instruction_words, sweep, workload};
use rvmb_core::harness::{run_model, ModelKind, RunConfig};
use rvmb_core::isa::{decode, run_functional};
use rvmb_core::memhier::{AccessKind, MemoryHierarchy};
use rvmb_core::tensorc::{find_benchmark, lower};
use std::hint::black_box;

fn decoding(c: &mut Criterion) {
    let words = instruction_words(4096);
    let mut g = c.benchmark_group("decode");
    g.throughput(Throughput::Elements(words.len() as u64));
    g.bench_function("mixed_4096", |b| {
        b.iter(|| words.iter().filter(|&&w| decode(black_box(w)).is_ok()).count())
    });
    g.finish();
}

fn caches(c: &mut Criterion) {
    let mut g = c.benchmark_group("hierarchy");
    for (name, bytes, stride) in [("l1_resident", 32u64 << 10, 8u64), ("streaming", 16 << 20, 64)] {
        let addrs = sweep(bytes, stride);
        g.throughput(Throughput::Elements(addrs.len() as u64));
        g.bench_function(name, |b| {
            b.iter(|| {
                let mut h = MemoryHierarchy::default();
                addrs.iter().map(|&a| h.access(a, AccessKind::Read) as u64).sum::<u64>()
            })
        });
    }
    g.finish();
}

fn functional(c: &mut Criterion) {
    let w = workload("matmul16");
    let n = run_functional(&w.image, w.entry, u64::MAX).unwrap().total_instrs;
    let mut g = c.benchmark_group("functional");
    g.throughput(Throughput::Elements(n));
    g.bench_function("matmul16", |b| b.iter(|| run_functional(black_box(&w.image), w.entry, u64::MAX).unwrap()));
    g.finish();
}

fn timing(c: &mut Criterion) {
    let w = workload("matmul16");
    let cfg = RunConfig::default();
    let n = run_functional(&w.image, w.entry, u64::MAX).unwrap().total_instrs;
    let mut g = c.benchmark_group("timing");
    g.throughput(Throughput::Elements(n));
    for m in ModelKind::ALL {
        g.bench_with_input(BenchmarkId::new("matmul16", m), &m, |b, &m| b.iter(|| run_model(&w, m, &cfg, None).unwrap()));
    }
    g.finish();
}

fn compile(c: &mut Criterion) {
    let lenet = find_benchmark("lenet5").unwrap();
    c.bench_function("lower/lenet5", |b| b.iter(|| lower(black_box(&lenet.program)).unwrap()));
}

criterion_group!(benches, decoding, caches, functional, timing, compile);
criterion_main!(benches);

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use cccf::retrieval::{benchmark, BenchMode};
use cccf_bench::{scan_workload, QUERY_USERS};

const MODES: [BenchMode; 4] = [
    BenchMode::CccfFast,
    BenchMode::CccfExact,
    BenchMode::FloatMf,
    BenchMode::DcfFlat,
];

fn full_scan(c: &mut Criterion) {
    let items = 100_000;
    let workload = scan_workload(items, 0.8);
    let mut group = c.benchmark_group("full_scan");
    group.sample_size(10);
    group.throughput(Throughput::Elements(items as u64));
    for mode in MODES {
        let target = workload.target(mode);
        group.bench_function(mode.name(), |b| {
            let mut user = 0;
            b.iter(|| {
                user = (user + 1) % QUERY_USERS;
                black_box(benchmark(&target, &[user], 10))
            })
        });
    }
    group.finish();
}

fn bandwidth(c: &mut Criterion) {
    let items = 50_000;
    let mut group = c.benchmark_group("bandwidth");
    group.sample_size(10);
    group.throughput(Throughput::Elements(items as u64));
    for h in [0.5, 0.6, 0.7, 0.8, 0.9, 1.0] {
        let workload = scan_workload(items, h);
        let target = workload.target(BenchMode::CccfFast);
        group.bench_with_input(BenchmarkId::from_parameter(h), &h, |b, _| {
            let mut user = 0;
            b.iter(|| {
                user = (user + 1) % QUERY_USERS;
                black_box(benchmark(&target, &[user], 10))
            })
        });
    }
    group.finish();
}

criterion_group!(benches, full_scan, bandwidth);
criterion_main!(benches);

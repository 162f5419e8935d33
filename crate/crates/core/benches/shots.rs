use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use qdmem::engine::{run_shots_with, Execution};
use qdmem::pulses::ExperimentProtocol;

fn shots(c: &mut Criterion) {
    let protocol = ExperimentProtocol::storage_replica(600.0);
    let mut group = c.benchmark_group("shots");
    group.sample_size(10);
    for cycles in [2_000u64, 20_000] {
        group.throughput(Throughput::Elements(cycles));
        for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(name, cycles), &cycles, |b, &n| {
                b.iter(|| run_shots_with(black_box(&protocol), n, 7, exec).expect("replica runs"))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, shots);
criterion_main!(benches);

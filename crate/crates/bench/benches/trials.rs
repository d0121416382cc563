use std::hint::black_box;

use clustersend_cli::{run_trial, RunSpec};
use clustersend_core::protocols::ProtocolKind;
use clustersend_core::simnet::{DelayDist, NetworkConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

// One trial per iteration, so the reported time is the per-trial cost.
fn sync_trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("sync_trial");
    for kind in ProtocolKind::ALL {
        let spec = RunSpec::new(kind, 10, 3, 10, 3);
        let mut trial = 0u64;
        group.bench_function(BenchmarkId::from_parameter(kind), |b| {
            b.iter(|| {
                trial += 1;
                run_trial(black_box(&spec), trial).unwrap()
            })
        });
    }
    group.finish();
}

fn async_trials(c: &mut Criterion) {
    let network =
        NetworkConfig::asynchronous(0.2, 0.1, DelayDist { min: 0, max: 4 }).with_outage(50);
    let spec = RunSpec::new(ProtocolKind::Ppcs, 7, 2, 7, 2).with_network(network);
    let mut trial = 0u64;
    c.bench_function("async_trial/ppcs", |b| {
        b.iter(|| {
            trial += 1;
            run_trial(black_box(&spec), trial).unwrap()
        })
    });
}

criterion_group!(benches, sync_trials, async_trials);
criterion_main!(benches);

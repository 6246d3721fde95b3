use std::hint::black_box;

use carmi_bench::{
    build_structure, gen_dataset, gen_workload, training_for, Access, DatasetSpec, Distribution, KvIndex, Mix, Structure, WorkloadSpec,
};
use carmi_core::{BuildConfig, QueryKind};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

const N: usize = 1 << 18;

fn lookups(c: &mut Criterion) {
    let mut group = c.benchmark_group("find");
    for dist in [Distribution::Uniform, Distribution::Lognormal] {
        let data = gen_dataset(&DatasetSpec::new(dist.clone(), N, 1)).unwrap();
        let spec = WorkloadSpec::new(Mix::ReadOnly, Access::Zipfian, 10_000, 2);
        let wl = gen_workload(&spec, &data).unwrap();
        let training = training_for(&spec, &wl).unwrap();
        for s in Structure::ALL {
            let ix = build_structure(s, &wl.initial.keys, &wl.initial.values, &training, &BuildConfig::default()).unwrap();
            group.bench_function(format!("{}/{s}", dist.name()), |b| {
                b.iter(|| {
                    for q in &wl.queries {
                        black_box(ix.find(q.key));
                    }
                })
            });
        }
    }
    group.finish();
}

fn inserts(c: &mut Criterion) {
    let mut group = c.benchmark_group("write_heavy");
    group.sample_size(10);
    let data = gen_dataset(&DatasetSpec::new(Distribution::Lognormal, N, 3)).unwrap();
    let spec = WorkloadSpec::new(Mix::WriteHeavy, Access::Uniform, 10_000, 4);
    let wl = gen_workload(&spec, &data).unwrap();
    let training = training_for(&spec, &wl).unwrap();
    for s in Structure::ALL {
        group.bench_function(s.name(), |b| {
            b.iter_batched(
                || build_structure(s, &wl.initial.keys, &wl.initial.values, &training, &BuildConfig::default()).unwrap(),
                |mut ix: Box<dyn KvIndex>| {
                    for q in &wl.queries {
                        match q.kind {
                            QueryKind::Insert => black_box(ix.insert(q.key, q.value)),
                            _ => black_box(ix.find(q.key).is_some()),
                        };
                    }
                },
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

fn construction(c: &mut Criterion) {
    let mut group = c.benchmark_group("build");
    group.sample_size(10);
    let data = gen_dataset(&DatasetSpec::new(Distribution::Lognormal, N, 5)).unwrap();
    let spec = WorkloadSpec::new(Mix::ReadHeavy, Access::Uniform, 10_000, 6);
    let wl = gen_workload(&spec, &data).unwrap();
    let training = training_for(&spec, &wl).unwrap();
    for s in Structure::ALL {
        group.bench_function(s.name(), |b| {
            b.iter(|| build_structure(s, &wl.initial.keys, &wl.initial.values, &training, &BuildConfig::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, lookups, inserts, construction);
criterion_main!(benches);

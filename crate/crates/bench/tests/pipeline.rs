use carmi_bench::{
    build_structure, check_against_map, gen_dataset, gen_workload, read_dataset, run_workload, training_for, write_dataset, Access,
    DatasetSpec, Distribution, Mix, Structure, WorkloadSpec,
};
use carmi_core::{BuildConfig, Index, TrainingWorkload};

#[test]
fn file_round_trip_feeds_every_structure() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.bin");
    let data = gen_dataset(&DatasetSpec::new(Distribution::Exponential, 30_000, 4)).unwrap();
    write_dataset(&path, &data).unwrap();
    let back = read_dataset(&path).unwrap();
    assert_eq!(back, data);
    for mix in Mix::ALL {
        let spec = WorkloadSpec::new(mix, Access::Zipfian, 6000, 5);
        let wl = gen_workload(&spec, &back).unwrap();
        for s in Structure::ALL {
            let r = run_workload("exp", &wl, &spec, s, &BuildConfig::default()).unwrap();
            assert_eq!(r.failed, 0, "{mix} {s}");
        }
    }
}

#[test]
fn built_structures_survive_the_map_oracle() {
    let data = gen_dataset(&DatasetSpec::new(Distribution::Lognormal, 20_000, 6)).unwrap();
    let spec = WorkloadSpec::new(Mix::WriteHeavy, Access::Uniform, 1000, 7);
    let wl = gen_workload(&spec, &data).unwrap();
    let training = training_for(&spec, &wl).unwrap();
    let keys = &wl.initial.keys;
    for s in Structure::ALL {
        let mut ix = build_structure(s, keys, keys, &training, &BuildConfig::default()).unwrap();
        let r = check_against_map(ix.as_mut(), keys, 1e8, 50_000, 8).unwrap();
        assert_eq!(r.mismatches, 0, "{s}");
    }
}

#[test]
fn external_index_runs_append_streams() {
    let data = gen_dataset(&DatasetSpec::new(Distribution::YcsbSequential, 20_000, 9)).unwrap();
    let mut spec = WorkloadSpec::new(Mix::WriteHeavy, Access::Uniform, 8000, 10);
    spec.append = true;
    let wl = gen_workload(&spec, &data).unwrap();
    let training = TrainingWorkload::uniform_reads(wl.initial.len());
    let mut ix = Index::build(&wl.initial.keys, &wl.initial.values, &training, &BuildConfig::external()).unwrap();
    let r = carmi_bench::runner::measure("ycsb", &spec, "carmi", &mut ix, &wl, 0.0);
    assert_eq!(r.failed, 0);
    assert_eq!(ix.len(), wl.initial.len() + Mix::WriteHeavy.inserts(8000));
}

//! Builds a structure, replays a query stream and reports one result row.

use std::hint::black_box;
use std::io::Write;
use std::time::Instant;

use carmi_core::{default_training_workload, BuildConfig, Index, QueryKind, TrainingWorkload};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::dataset::Dataset;
use crate::error::{BenchError, BenchResultT};
use crate::structure::{build_structure, KvIndex, Structure};
use crate::workload::{gen_workload, Workload, WorkloadSpec};

/// Finds issued before timing starts.
pub const WARMUP_QUERIES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub dataset: String,
    pub workload: String,
    pub structure: String,
    pub avg_ns_per_query: f64,
    pub space_bytes: f64,
    pub build_ms: f64,
    pub depth: usize,
    pub lr: usize,
    pub plr: usize,
    pub his: usize,
    pub bs: usize,
    pub array: usize,
    pub gapped: usize,
    pub external: usize,
    /// Queries whose outcome contradicted the stream (missing read, rejected insert).
    pub failed: usize,
}

/// Training workload matching what the stream will do.
pub fn training_for(spec: &WorkloadSpec, wl: &Workload) -> BenchResultT<TrainingWorkload> {
    Ok(default_training_workload(
        wl.initial.len(),
        spec.mix.read_ratio(),
        wl.insert_region,
    )?)
}

/// Every loaded key must be found with its value, and a full scan must
/// return them in order.
pub fn verify_loaded(index: &dyn KvIndex, data: &Dataset) -> BenchResultT<()> {
    for (&k, &v) in data.keys.iter().zip(&data.values) {
        if index.find(k) != Some(v) {
            return Err(BenchError::Mismatch(format!("loaded key {k} not found")));
        }
    }
    let all = index.range_scan(f64::NEG_INFINITY, usize::MAX);
    if all.len() != data.len() || all.iter().zip(&data.keys).any(|(e, &k)| e.key != k) {
        return Err(BenchError::Mismatch("scan of loaded keys differs".into()));
    }
    Ok(())
}

/// Replays the stream and returns (total ns, failed queries).
pub fn replay(index: &mut dyn KvIndex, wl: &Workload) -> (f64, usize) {
    let mut failed = 0usize;
    let start = Instant::now();
    for q in &wl.queries {
        match q.kind {
            QueryKind::Read => failed += black_box(index.find(q.key)).is_none() as usize,
            QueryKind::Insert => failed += !index.insert(q.key, q.value) as usize,
            QueryKind::Update => failed += !index.update(q.key, q.value) as usize,
            QueryKind::Delete => failed += !index.delete(q.key) as usize,
            QueryKind::Scan => failed += black_box(index.range_scan(q.key, q.scan_len as usize)).is_empty() as usize,
        }
    }
    (start.elapsed().as_nanos() as f64, failed)
}

fn warm(index: &dyn KvIndex, wl: &Workload) {
    for q in wl.queries.iter().filter(|q| q.kind != QueryKind::Insert).take(WARMUP_QUERIES) {
        black_box(index.find(q.key));
    }
}

/// Row for an already built structure after replaying `wl`.
pub fn measure(dataset: &str, spec: &WorkloadSpec, structure: &str, index: &mut dyn KvIndex, wl: &Workload, build_ms: f64) -> BenchResult {
    warm(index, wl);
    let (ns, failed) = replay(index, wl);
    let c = index.census();
    BenchResult {
        dataset: dataset.to_string(),
        workload: format!("{}/{}", spec.mix.name(), spec.access.name()),
        structure: structure.to_string(),
        avg_ns_per_query: if wl.queries.is_empty() { 0.0 } else { ns / wl.queries.len() as f64 },
        space_bytes: index.space_bytes(),
        build_ms,
        depth: index.depth(),
        lr: c[0],
        plr: c[1],
        his: c[2],
        bs: c[3],
        array: c[4],
        gapped: c[5],
        external: c[6],
        failed,
    }
}

/// Generates the stream, builds `structure` over the loaded keys, checks it
/// and times the stream.
pub fn run(dataset: &str, data: &Dataset, spec: &WorkloadSpec, structure: Structure, config: &BuildConfig) -> BenchResultT<BenchResult> {
    let wl = gen_workload(spec, data)?;
    run_workload(dataset, &wl, spec, structure, config)
}

pub fn run_workload(
    dataset: &str,
    wl: &Workload,
    spec: &WorkloadSpec,
    structure: Structure,
    config: &BuildConfig,
) -> BenchResultT<BenchResult> {
    let training = training_for(spec, wl)?;
    let t = Instant::now();
    let mut index = build_structure(structure, &wl.initial.keys, &wl.initial.values, &training, config)?;
    let build_ms = t.elapsed().as_secs_f64() * 1e3;
    verify_loaded(index.as_ref(), &wl.initial)?;
    Ok(measure(dataset, spec, structure.name(), index.as_mut(), wl, build_ms))
}

/// Serialized flat: `lambda`, `model_ns`, then the result columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    /// Average query time the cost model predicts for the training workload.
    pub model_ns: f64,
    pub result: BenchResult,
}

impl Serialize for SweepRow {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let r = &self.result;
        let mut st = s.serialize_struct("SweepRow", 17)?;
        st.serialize_field("lambda", &self.lambda)?;
        st.serialize_field("model_ns", &self.model_ns)?;
        st.serialize_field("dataset", &r.dataset)?;
        st.serialize_field("workload", &r.workload)?;
        st.serialize_field("structure", &r.structure)?;
        st.serialize_field("avg_ns_per_query", &r.avg_ns_per_query)?;
        st.serialize_field("space_bytes", &r.space_bytes)?;
        st.serialize_field("build_ms", &r.build_ms)?;
        st.serialize_field("depth", &r.depth)?;
        st.serialize_field("lr", &r.lr)?;
        st.serialize_field("plr", &r.plr)?;
        st.serialize_field("his", &r.his)?;
        st.serialize_field("bs", &r.bs)?;
        st.serialize_field("array", &r.array)?;
        st.serialize_field("gapped", &r.gapped)?;
        st.serialize_field("external", &r.external)?;
        st.serialize_field("failed", &r.failed)?;
        st.end()
    }
}

/// One CARMI build and run per λ.
pub fn sweep(dataset: &str, data: &Dataset, spec: &WorkloadSpec, lambdas: &[f64], config: &BuildConfig) -> BenchResultT<Vec<SweepRow>> {
    if lambdas.is_empty() {
        return Err(BenchError::Usage("empty lambda list".into()));
    }
    let wl = gen_workload(spec, data)?;
    let training = training_for(spec, &wl)?;
    lambdas
        .iter()
        .map(|&lambda| {
            let cfg = config.clone().with_lambda(lambda);
            cfg.validate()?;
            let t = Instant::now();
            let mut index = Index::build(&wl.initial.keys, &wl.initial.values, &training, &cfg)?;
            let build_ms = t.elapsed().as_secs_f64() * 1e3;
            verify_loaded(&index, &wl.initial)?;
            let model_ns = index.build_cost().avg_time_ns(training.total() as f64);
            let result = measure(dataset, spec, "carmi", &mut index, &wl, build_ms);
            Ok(SweepRow { lambda, model_ns, result })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub carmi: BenchResult,
    pub other: BenchResult,
    /// Other structure's time per query over CARMI's.
    pub speedup: f64,
    /// CARMI's space over the other structure's.
    pub space_ratio: f64,
}

pub fn compare(dataset: &str, data: &Dataset, spec: &WorkloadSpec, against: Structure, config: &BuildConfig) -> BenchResultT<Comparison> {
    let wl = gen_workload(spec, data)?;
    let carmi = run_workload(dataset, &wl, spec, Structure::Carmi, config)?;
    let other = run_workload(dataset, &wl, spec, against, config)?;
    Ok(Comparison {
        speedup: other.avg_ns_per_query / carmi.avg_ns_per_query,
        space_ratio: carmi.space_bytes / other.space_bytes,
        carmi,
        other,
    })
}

/// Writes rows as CSV, with a header unless `header` is false.
pub fn write_csv<T: Serialize>(w: impl Write, rows: &[T], header: bool) -> BenchResultT<()> {
    let mut out = csv::WriterBuilder::new().has_headers(header).from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{gen_dataset, DatasetSpec, Distribution};
    use crate::workload::{Access, Mix};

    fn data() -> Dataset {
        gen_dataset(&DatasetSpec::new(Distribution::Uniform, 20_000, 1)).unwrap()
    }

    #[test]
    fn read_only_runs_clean_on_every_structure() {
        let d = data();
        let spec = WorkloadSpec::new(Mix::ReadOnly, Access::Zipfian, 5000, 2);
        for s in Structure::ALL {
            let r = run("uniform", &d, &spec, s, &BuildConfig::default()).unwrap();
            assert_eq!(r.failed, 0, "{s}");
            assert!(r.avg_ns_per_query > 0.0 && r.space_bytes > 0.0);
            assert_eq!(r.structure, s.name());
        }
    }

    #[test]
    fn write_heavy_runs_clean() {
        let d = data();
        let spec = WorkloadSpec::new(Mix::WriteHeavy, Access::Uniform, 6000, 3);
        for s in Structure::ALL {
            assert_eq!(run("uniform", &d, &spec, s, &BuildConfig::default()).unwrap().failed, 0, "{s}");
        }
        let scan = WorkloadSpec::new(Mix::RangeScan, Access::Uniform, 2000, 3);
        assert_eq!(
            run("uniform", &d, &scan, Structure::Carmi, &BuildConfig::default()).unwrap().failed,
            0
        );
    }

    #[test]
    fn csv_columns_in_order() {
        let d = data();
        let spec = WorkloadSpec::new(Mix::ReadOnly, Access::Uniform, 100, 2);
        let r = run("uniform", &d, &spec, Structure::Btree, &BuildConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &[r], true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "dataset,workload,structure,avg_ns_per_query,space_bytes,build_ms,depth,lr,plr,his,bs,array,gapped,external,failed\n"
        ));
    }

    #[test]
    fn sweep_rows_per_lambda() {
        let d = gen_dataset(&DatasetSpec::new(Distribution::Lognormal, 4096, 1)).unwrap();
        let spec = WorkloadSpec::new(Mix::ReadOnly, Access::Uniform, 1000, 2);
        let rows = sweep("lognormal", &d, &spec, &[1e-6, 1e-4, 1e-2], &BuildConfig::default()).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(sweep("lognormal", &d, &spec, &[], &BuildConfig::default()).is_err());
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("lambda,model_ns,dataset,workload,structure,avg_ns_per_query,"));
        assert_eq!(text.lines().count(), 4);
    }
}

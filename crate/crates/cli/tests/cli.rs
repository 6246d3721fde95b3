use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn carmi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carmi")).args(args).output().expect("spawn carmi")
}

fn code(args: &[&str]) -> i32 {
    carmi(args).status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn gen(dir: &TempDir, dist: &str, n: usize) -> String {
    let p = dir.path().join(format!("{dist}.bin"));
    let p = p.to_str().unwrap().to_string();
    assert_eq!(code(&["gen", "--dist", dist, "--n", &n.to_string(), "--seed", "1", "--out", &p]), 0);
    p
}

fn records(csv_text: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(csv_text.as_bytes())
        .records()
        .map(Result::unwrap)
        .collect()
}

fn column(text: &str, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let i = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[i].to_string()).collect()
}

#[test]
fn gen_writes_header_and_records() {
    let dir = TempDir::new().unwrap();
    let p = gen(&dir, "uniform", 1024);
    let bytes = std::fs::read(&p).unwrap();
    assert_eq!(bytes.len(), 16 + 1024 * 16);
    assert_eq!(&bytes[..8], b"CARMIDAT");
    assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 1024);
    let again = dir.path().join("again.bin");
    assert_eq!(
        code(&[
            "gen",
            "--dist",
            "uniform",
            "--n",
            "1024",
            "--seed",
            "1",
            "--out",
            again.to_str().unwrap()
        ]),
        0
    );
    assert_eq!(std::fs::read(&again).unwrap(), bytes);
}

#[test]
fn usage_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x.bin");
    let out = out.to_str().unwrap();
    assert_eq!(code(&["gen", "--dist", "zeta", "--n", "10", "--out", out]), 2);
    assert_eq!(code(&["gen", "--dist", "uniform", "--n", "0", "--out", out]), 2);
    assert_eq!(code(&["gen", "--dist", "uniform", "--n", "10", "--out", out, "--verbose"]), 2);
    let d = gen(&dir, "uniform", 512);
    assert_eq!(code(&["build", "--data", &d, "--lambda", "-1"]), 2);
    assert_eq!(code(&["sweep", "--data", &d, "--lambda-list", ""]), 2);
    assert_eq!(code(&["run", "--data", &d, "--structure", "skiplist"]), 2);
    assert_eq!(code(&["compare", "--data", &d, "--against", "skiplist"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
}

#[test]
fn io_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.bin");
    assert_eq!(code(&["build", "--data", missing.to_str().unwrap()]), 1);
    let garbage = dir.path().join("garbage.bin");
    std::fs::write(&garbage, b"not a dataset").unwrap();
    assert_eq!(code(&["stats", "--data", garbage.to_str().unwrap()]), 1);
    let bad_dir = dir.path().join("no/such/dir/out.bin");
    assert_eq!(
        code(&["gen", "--dist", "uniform", "--n", "10", "--out", bad_dir.to_str().unwrap()]),
        1
    );
}

#[test]
fn build_reports_depth_two_on_uniform_read_only() {
    let dir = TempDir::new().unwrap();
    let d = gen(&dir, "uniform", 1 << 16);
    let stats = dir.path().join("stats.csv");
    let o = carmi(&[
        "build",
        "--data",
        &d,
        "--workload",
        "read_only",
        "--stats-out",
        stats.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(column(&text, "depth"), ["2"]);
    assert_eq!(column(&text, "gapped"), ["0"]);
    assert_eq!(std::fs::read_to_string(&stats).unwrap(), text);

    let o = carmi(&["build", "--data", &d, "--workload", "write_heavy", "--json"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(v["gapped"].as_u64().unwrap() > 0);
    assert_eq!(v["len"].as_u64().unwrap(), 1 << 16);
}

#[test]
fn build_reads_a_config_file() {
    let dir = TempDir::new().unwrap();
    let d = gen(&dir, "lognormal", 4096);
    let cfg = dir.path().join("build.conf");
    std::fs::write(&cfg, "# arrays only\nleaf_kinds = array\ninner_kinds = lr\n").unwrap();
    let o = carmi(&[
        "build",
        "--data",
        &d,
        "--workload",
        "write_heavy",
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(column(&stdout(&o), "gapped"), ["0"]);
    std::fs::write(&cfg, "leaf_kinds = bogus\n").unwrap();
    assert_eq!(code(&["build", "--data", &d, "--config", cfg.to_str().unwrap()]), 2);
}

#[test]
fn run_appends_rows_and_logs_one_stream_hash() {
    let dir = TempDir::new().unwrap();
    let d = gen(&dir, "normal", 8192);
    let out = dir.path().join("results.csv");
    let mut hashes = Vec::new();
    for s in ["carmi", "btree", "rmi", "alex"] {
        let o = carmi(&[
            "run",
            "--data",
            &d,
            "--workload",
            "write_heavy",
            "--access",
            "uniform",
            "--ops",
            "4000",
            "--structure",
            s,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{s}: {}", String::from_utf8_lossy(&o.stderr));
        let err = String::from_utf8(o.stderr).unwrap();
        hashes.push(err.lines().find(|l| l.starts_with("stream hash")).unwrap().to_string());
    }
    assert!(hashes.windows(2).all(|w| w[0] == w[1]));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("dataset,workload,structure,avg_ns_per_query,space_bytes,build_ms,depth,"));
    let rows = records(&text);
    assert_eq!(rows.len(), 4);
    assert!(column(&text, "failed").iter().all(|f| f == "0"));
    assert_eq!(column(&text, "structure"), ["carmi", "btree", "rmi", "alex"]);
}

#[test]
fn sweep_emits_one_row_per_lambda() {
    let dir = TempDir::new().unwrap();
    let d = gen(&dir, "lognormal", 4096);
    let o = carmi(&[
        "sweep",
        "--data",
        &d,
        "--lambda-list",
        "1e-9,1e-7,1e-3,1e-1,10",
        "--ops",
        "2000",
        "--access",
        "uniform",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let space: Vec<f64> = column(&text, "space_bytes").iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(space.len(), 5);
    assert!(space.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(column(&text, "lambda")[0], "1e-9");
}

#[test]
fn compare_prints_ratios() {
    let dir = TempDir::new().unwrap();
    let d = gen(&dir, "uniform", 1 << 14);
    let o = carmi(&["compare", "--data", &d, "--against", "btree", "--ops", "20000", "--json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["against"], "btree");
    let speedup = v["speedup"].as_f64().unwrap();
    let ratio = v["carmi_space"].as_f64().unwrap() / v["other_space"].as_f64().unwrap();
    assert!(speedup > 0.0);
    assert!((v["space_ratio"].as_f64().unwrap() - ratio).abs() < 1e-12);

    let o = carmi(&["compare", "--data", &d, "--against", "carmi", "--ops", "20000"]);
    let text = stdout(&o);
    assert_eq!(column(&text, "space_ratio"), ["1.0"]);
}

#[test]
fn stats_summarizes_a_dataset() {
    let dir = TempDir::new().unwrap();
    let d = gen(&dir, "ycsb", 1000);
    let text = stdout(&carmi(&["stats", "--data", &d]));
    assert_eq!(column(&text, "n"), ["1000"]);
    assert_eq!(column(&text, "dataset"), [Path::new(&d).file_stem().unwrap().to_str().unwrap()]);
}

//! `carmi`: generate datasets, build indexes and benchmark them.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use carmi_bench::workload::{DEFAULT_OPS, PARTIAL_BAND};
use carmi_bench::{
    compare, gen_dataset, gen_workload, read_dataset, run_workload, sweep, write_csv, write_dataset, Access, BenchError, Dataset,
    DatasetSpec, Distribution, Mix, Structure, WorkloadSpec,
};
use carmi_core::{default_training_workload, BuildConfig, Index, NodeType};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "carmi", version, about = "Cache-aware learned index: datasets, builds and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset file.
    Gen {
        #[arg(long)]
        dist: Distribution,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build an index for a workload and report its statistics.
    Build {
        #[command(flatten)]
        index: IndexArgs,
        #[arg(long, default_value = "read_only")]
        workload: Mix,
        /// Also write the statistics row to this file.
        #[arg(long)]
        stats_out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Replay a query stream on one structure and report a result row.
    Run {
        #[command(flatten)]
        stream: StreamArgs,
        #[arg(long, default_value = "carmi")]
        structure: Structure,
        /// Append the row to this CSV file instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// One build and run per λ.
    Sweep {
        #[command(flatten)]
        stream: StreamArgs,
        /// Comma-separated λ values.
        #[arg(long, allow_hyphen_values = true)]
        lambda_list: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Summary of a dataset file.
    Stats {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run CARMI and another structure on the same stream.
    Compare {
        #[command(flatten)]
        stream: StreamArgs,
        #[arg(long)]
        against: Structure,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct IndexArgs {
    /// Dataset file written by `gen`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    /// File of `key = value` build settings.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct StreamArgs {
    #[command(flatten)]
    index: IndexArgs,
    #[arg(long, default_value = "read_only")]
    workload: Mix,
    #[arg(long, default_value = "zipfian")]
    access: Access,
    #[arg(long, default_value_t = DEFAULT_OPS)]
    ops: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

enum CliError {
    Usage(String),
    Env(String),
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Usage(_) | BenchError::Core(carmi_core::Error::InvalidConfig(_)) => CliError::Usage(e.to_string()),
            _ => CliError::Env(e.to_string()),
        }
    }
}

impl From<carmi_core::Error> for CliError {
    fn from(e: carmi_core::Error) -> Self {
        BenchError::Core(e).into()
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Env(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Env(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Env(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Gen { dist, n, seed, out } => {
            let data = gen_dataset(&DatasetSpec::new(dist, n, seed))?;
            write_dataset(&out, &data)?;
            eprintln!("wrote {} records to {}", data.len(), out.display());
            Ok(())
        }
        Command::Build {
            index,
            workload,
            stats_out,
            json,
        } => build(&index, workload, stats_out.as_deref(), json),
        Command::Run {
            stream,
            structure,
            out,
            json,
        } => {
            let (name, data, config) = load(&stream.index)?;
            let spec = stream_spec(&stream, &config);
            let wl = gen_workload(&spec, &data)?;
            eprintln!("stream hash {:016x}", wl.stream_hash());
            let row = run_workload(&name, &wl, &spec, structure, &config)?;
            emit(&[row], out.as_deref(), json)
        }
        Command::Sweep {
            stream,
            lambda_list,
            out,
            json,
        } => {
            let lambdas = parse_lambdas(&lambda_list)?;
            let (name, data, config) = load(&stream.index)?;
            let rows = sweep(&name, &data, &stream_spec(&stream, &config), &lambdas, &config)?;
            emit(&rows, out.as_deref(), json)
        }
        Command::Stats { data, json } => {
            let d = read_dataset(&data)?;
            emit(&[summarize(&dataset_name(&data), &d)?], None, json)
        }
        Command::Compare { stream, against, json } => {
            let (name, data, config) = load(&stream.index)?;
            let spec = stream_spec(&stream, &config);
            let c = compare(&name, &data, &spec, against, &config)?;
            let row = CompareRow {
                dataset: name,
                workload: c.carmi.workload.clone(),
                against: against.name(),
                carmi_ns: c.carmi.avg_ns_per_query,
                other_ns: c.other.avg_ns_per_query,
                speedup: c.speedup,
                carmi_space: c.carmi.space_bytes,
                other_space: c.other.space_bytes,
                space_ratio: c.space_ratio,
            };
            emit(&[row], None, json)
        }
    }
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn load(args: &IndexArgs) -> CliResult<(String, Dataset, BuildConfig)> {
    let mut config = match &args.config {
        Some(p) => BuildConfig::from_config(&fs::read_to_string(p)?)?,
        None => BuildConfig::default(),
    };
    if let Some(l) = args.lambda {
        config.lambda = l;
    }
    config.validate()?;
    let data = read_dataset(&args.data)?;
    if data.is_empty() {
        return Err(CliError::Usage(format!("{} holds no records", args.data.display())));
    }
    Ok((dataset_name(&args.data), data, config))
}

fn stream_spec(args: &StreamArgs, config: &BuildConfig) -> WorkloadSpec {
    let mut spec = WorkloadSpec::new(args.workload, args.access, args.ops, args.seed);
    spec.append = config.external;
    spec
}

fn parse_lambdas(list: &str) -> CliResult<Vec<f64>> {
    let lambdas = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match s.parse::<f64>() {
            Ok(l) if l >= 0.0 && l.is_finite() => Ok(l),
            _ => Err(CliError::Usage(format!("bad lambda {s}"))),
        })
        .collect::<CliResult<Vec<_>>>()?;
    if lambdas.is_empty() {
        return Err(CliError::Usage("empty lambda list".into()));
    }
    Ok(lambdas)
}

#[derive(Serialize)]
struct StatsRow {
    dataset: String,
    workload: &'static str,
    lambda: f64,
    len: usize,
    depth: usize,
    space_bytes: f64,
    weighted_entropy: f64,
    model_ns: f64,
    build_ms: f64,
    lr: usize,
    plr: usize,
    his: usize,
    bs: usize,
    array: usize,
    gapped: usize,
    external: usize,
}

fn build(args: &IndexArgs, mix: Mix, stats_out: Option<&Path>, json: bool) -> CliResult<()> {
    let (name, data, config) = load(args)?;
    let n = data.len();
    let region = (mix == Mix::WritePartial).then_some(((n as f64 * PARTIAL_BAND.0) as usize, (n as f64 * PARTIAL_BAND.1) as usize));
    let training = default_training_workload(n, mix.read_ratio(), region)?;
    let t = Instant::now();
    let index = Index::build(&data.keys, &data.values, &training, &config)?;
    let build_ms = t.elapsed().as_secs_f64() * 1e3;
    let s = index.stats();
    let row = StatsRow {
        dataset: name,
        workload: mix.name(),
        lambda: config.lambda,
        len: s.len,
        depth: s.depth,
        space_bytes: s.space_bytes,
        weighted_entropy: s.weighted_entropy,
        model_ns: index.build_cost().avg_time_ns(training.total() as f64),
        build_ms,
        lr: s.count(NodeType::LrInner),
        plr: s.count(NodeType::PlrInner),
        his: s.count(NodeType::HisInner),
        bs: s.count(NodeType::BsInner),
        array: s.count(NodeType::ArrayLeaf),
        gapped: s.count(NodeType::GappedLeaf),
        external: s.count(NodeType::ExternalLeaf),
    };
    if let Some(p) = stats_out {
        let mut f = File::create(p)?;
        render(&mut f, &[&row], true, json)?;
    }
    emit(&[row], None, json)
}

#[derive(Serialize)]
struct DatasetSummary {
    dataset: String,
    n: usize,
    min_key: f64,
    max_key: f64,
    mean_gap: f64,
    min_gap: f64,
    max_gap: f64,
}

fn summarize(name: &str, d: &Dataset) -> CliResult<DatasetSummary> {
    let mut keys = d.keys.clone();
    keys.sort_by(f64::total_cmp);
    let (Some(&min_key), Some(&max_key)) = (keys.first(), keys.last()) else {
        return Err(CliError::Usage("dataset holds no records".into()));
    };
    let gaps: Vec<f64> = keys.windows(2).map(|w| w[1] - w[0]).collect();
    let (min_gap, max_gap) = gaps.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &g| (lo.min(g), hi.max(g)));
    Ok(DatasetSummary {
        dataset: name.to_string(),
        n: keys.len(),
        min_key,
        max_key,
        mean_gap: if gaps.is_empty() {
            0.0
        } else {
            (max_key - min_key) / gaps.len() as f64
        },
        min_gap: if gaps.is_empty() { 0.0 } else { min_gap },
        max_gap,
    })
}

#[derive(Serialize)]
struct CompareRow {
    dataset: String,
    workload: String,
    against: &'static str,
    carmi_ns: f64,
    other_ns: f64,
    speedup: f64,
    carmi_space: f64,
    other_space: f64,
    space_ratio: f64,
}

fn render<T: Serialize>(w: &mut impl Write, rows: &[T], header: bool, json: bool) -> CliResult<()> {
    if json {
        for r in rows {
            serde_json::to_writer(&mut *w, r)?;
            writeln!(w)?;
        }
        Ok(())
    } else {
        Ok(write_csv(w, rows, header)?)
    }
}

/// Prints rows, or appends them to `out` with a header only when the file is new or empty.
fn emit<T: Serialize>(rows: &[T], out: Option<&Path>, json: bool) -> CliResult<()> {
    match out {
        Some(p) => {
            let fresh = fs::metadata(p).map_or(true, |m| m.len() == 0);
            let mut f = OpenOptions::new().create(true).append(true).open(p)?;
            render(&mut f, rows, fresh, json)
        }
        None => render(&mut io::stdout().lock(), rows, true, json),
    }
}

//! Synthetic key sets and the binary dataset file format.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp, LogNormal, Normal};

use crate::error::{BenchError, BenchResultT};

pub const MAGIC: &[u8; 8] = b"CARMIDAT";
/// Generated keys are rescaled into `[0, KEY_RANGE]`.
pub const KEY_RANGE: f64 = 1e8;
pub const EXP_RATE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Uniform,
    Normal,
    Lognormal,
    Exponential,
    YcsbSequential,
    File(PathBuf),
}

impl Distribution {
    pub fn name(&self) -> String {
        match self {
            Distribution::Uniform => "uniform".into(),
            Distribution::Normal => "normal".into(),
            Distribution::Lognormal => "lognormal".into(),
            Distribution::Exponential => "exponential".into(),
            Distribution::YcsbSequential => "ycsb".into(),
            Distribution::File(p) => p.display().to_string(),
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Distribution {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "uniform" => Distribution::Uniform,
            "normal" => Distribution::Normal,
            "lognormal" => Distribution::Lognormal,
            "exponential" | "exp" => Distribution::Exponential,
            "ycsb" | "ycsb_sequential" => Distribution::YcsbSequential,
            _ => return Err(BenchError::Usage(format!("unknown distribution {s}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub distribution: Distribution,
    pub n: usize,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(distribution: Distribution, n: usize, seed: u64) -> Self {
        DatasetSpec { distribution, n, seed }
    }
}

/// Sorted, distinct keys with their values.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub keys: Vec<f64>,
    pub values: Vec<f64>,
}

impl Dataset {
    /// Sorts, drops non-finite and repeated keys, and pairs each key with itself.
    pub fn from_keys(mut keys: Vec<f64>) -> Self {
        keys.retain(|k| k.is_finite());
        keys.sort_by(f64::total_cmp);
        keys.dedup();
        let values = keys.clone();
        Dataset { keys, values }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

/// Raw draws before rescaling.
pub fn sample_raw(dist: &Distribution, n: usize, rng: &mut impl Rng) -> Vec<f64> {
    match dist {
        Distribution::Uniform => (0..n).map(|_| rng.random::<f64>()).collect(),
        Distribution::Normal => {
            let d = Normal::new(0.0, 1.0).expect("valid");
            (0..n).map(|_| d.sample(rng)).collect()
        }
        Distribution::Lognormal => {
            let d = LogNormal::new(0.0, 1.0).expect("valid");
            (0..n).map(|_| d.sample(rng)).collect()
        }
        Distribution::Exponential => {
            let d = Exp::new(EXP_RATE).expect("valid");
            (0..n).map(|_| d.sample(rng)).collect()
        }
        Distribution::YcsbSequential => (0..n).map(|i| i as f64).collect(),
        Distribution::File(_) => Vec::new(),
    }
}

/// Maps `xs` linearly onto `[0, KEY_RANGE]`.
pub fn rescale(xs: &mut [f64]) {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = hi - lo;
    for x in xs.iter_mut() {
        *x = if width > 0.0 { (*x - lo) / width * KEY_RANGE } else { 0.0 };
    }
}

pub fn gen_dataset(spec: &DatasetSpec) -> BenchResultT<Dataset> {
    if let Distribution::File(path) = &spec.distribution {
        let mut d = read_dataset(path)?;
        if spec.n > 0 && spec.n < d.len() {
            d.keys.truncate(spec.n);
            d.values.truncate(spec.n);
        }
        return Ok(d);
    }
    if spec.n == 0 {
        return Err(BenchError::Usage("dataset size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut xs = sample_raw(&spec.distribution, spec.n, &mut rng);
    rescale(&mut xs);
    Ok(Dataset::from_keys(xs))
}

pub fn write_dataset(path: &Path, data: &Dataset) -> BenchResultT<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_records(&mut w, data)?;
    w.flush()?;
    Ok(())
}

pub fn write_records(w: &mut impl Write, data: &Dataset) -> BenchResultT<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(data.len() as u64).to_le_bytes())?;
    for (k, v) in data.keys.iter().zip(&data.values) {
        w.write_all(&k.to_le_bytes())?;
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a dataset file. Records are kept in file order.
pub fn read_dataset(path: &Path) -> BenchResultT<Dataset> {
    let mut r = BufReader::new(File::open(path)?);
    read_records(&mut r)
}

pub fn read_records(r: &mut impl Read) -> BenchResultT<Dataset> {
    let mut head = [0u8; 16];
    r.read_exact(&mut head).map_err(|_| BenchError::Format("truncated header".into()))?;
    if &head[..8] != MAGIC {
        return Err(BenchError::Format("bad magic".into()));
    }
    let n = u64::from_le_bytes(head[8..].try_into().expect("8 bytes")) as usize;
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() != n * 16 {
        return Err(BenchError::Format(format!("expected {} record bytes, found {}", n * 16, buf.len())));
    }
    let word = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8 bytes"));
    let (keys, values) = buf.chunks_exact(16).map(|c| (word(&c[..8]), word(&c[8..]))).unzip();
    Ok(Dataset { keys, values })
}

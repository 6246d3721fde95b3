//! Query streams: fixed read/insert interleavings over a loaded key set.

use std::fmt;
use std::str::FromStr;

use carmi_core::{Query, QueryKind};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use crate::dataset::Dataset;
use crate::error::{BenchError, BenchResultT};

pub const DEFAULT_OPS: usize = 100_000;
pub const ZIPF_EXPONENT: f64 = 0.99;
pub const MAX_SCAN_LEN: u32 = 100;
/// Quantile band receiving the inserts of the partial-write mix.
pub const PARTIAL_BAND: (f64, f64) = (0.6, 0.9);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mix {
    WriteHeavy,
    ReadHeavy,
    ReadOnly,
    WritePartial,
    RangeScan,
}

impl Mix {
    pub const ALL: [Mix; 5] = [Mix::WriteHeavy, Mix::ReadHeavy, Mix::ReadOnly, Mix::WritePartial, Mix::RangeScan];

    /// Reads (or scans) then inserts making up one repeating period.
    pub fn period(self) -> (usize, usize) {
        match self {
            Mix::WriteHeavy => (1, 1),
            Mix::ReadHeavy | Mix::RangeScan => (19, 1),
            Mix::ReadOnly => (1, 0),
            Mix::WritePartial => (17, 3),
        }
    }

    pub fn read_ratio(self) -> f64 {
        let (r, w) = self.period();
        r as f64 / (r + w) as f64
    }

    pub fn name(self) -> &'static str {
        match self {
            Mix::WriteHeavy => "write_heavy",
            Mix::ReadHeavy => "read_heavy",
            Mix::ReadOnly => "read_only",
            Mix::WritePartial => "write_partial",
            Mix::RangeScan => "range_scan",
        }
    }

    /// Insert count in a stream of `ops` queries.
    pub fn inserts(self, ops: usize) -> usize {
        let (r, w) = self.period();
        let p = r + w;
        ops / p * w + (ops % p).saturating_sub(r)
    }
}

impl fmt::Display for Mix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mix {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mix::ALL
            .into_iter()
            .find(|m| m.name() == s || m.name().replace('_', "-") == s)
            .ok_or_else(|| BenchError::Usage(format!("unknown workload {s}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Zipfian,
    Uniform,
}

impl Access {
    pub fn name(self) -> &'static str {
        match self {
            Access::Zipfian => "zipfian",
            Access::Uniform => "uniform",
        }
    }
}

impl FromStr for Access {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zipfian" | "zipf" => Ok(Access::Zipfian),
            "uniform" => Ok(Access::Uniform),
            _ => Err(BenchError::Usage(format!("unknown access pattern {s}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub mix: Mix,
    pub access: Access,
    pub ops: usize,
    pub seed: u64,
    /// Inserts append keys beyond the current maximum instead of using held-out keys.
    pub append: bool,
}

impl WorkloadSpec {
    pub fn new(mix: Mix, access: Access, ops: usize, seed: u64) -> Self {
        WorkloadSpec {
            mix,
            access,
            ops,
            seed,
            append: false,
        }
    }
}

/// Keys loaded before the stream starts and the stream itself.
#[derive(Debug, Clone)]
pub struct Workload {
    pub initial: Dataset,
    pub queries: Vec<Query>,
    /// Sorted positions of `initial` where inserts land, for training.
    pub insert_region: Option<(usize, usize)>,
}

impl Workload {
    pub fn count(&self, kind: QueryKind) -> usize {
        self.queries.iter().filter(|q| q.kind == kind).count()
    }

    /// FNV-1a over the encoded stream; equal streams hash equal.
    pub fn stream_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for q in &self.queries {
            eat(&[q.kind as u8]);
            eat(&q.key.to_le_bytes());
            eat(&q.value.to_le_bytes());
            eat(&q.scan_len.to_le_bytes());
        }
        h
    }
}

/// Draws key ranks `0..n` either uniformly or Zipf-skewed. Zipf ranks are
/// mapped through a seeded permutation so hot keys are spread over the key
/// space.
pub struct KeyChooser {
    access: Access,
    zipf: Option<Zipf<f64>>,
    perm: Vec<u32>,
    n: usize,
}

impl KeyChooser {
    pub fn new(access: Access, n: usize, rng: &mut impl Rng) -> BenchResultT<Self> {
        if n == 0 {
            return Err(BenchError::Usage("no keys to draw from".into()));
        }
        let (zipf, perm) = match access {
            Access::Zipfian => {
                let z = Zipf::new(n as f64, ZIPF_EXPONENT).map_err(|e| BenchError::Usage(e.to_string()))?;
                let mut perm: Vec<u32> = (0..n as u32).collect();
                perm.shuffle(rng);
                (Some(z), perm)
            }
            Access::Uniform => (None, Vec::new()),
        };
        Ok(KeyChooser { access, zipf, perm, n })
    }

    pub fn next(&self, rng: &mut impl Rng) -> usize {
        match (self.access, &self.zipf) {
            (Access::Zipfian, Some(z)) => {
                let rank = z.sample(rng) as usize - 1;
                self.perm[rank.min(self.n - 1)] as usize
            }
            _ => rng.random_range(0..self.n),
        }
    }
}

/// Splits `keys` into the loaded set and held-out insert keys, then emits
/// `spec.ops` queries in the mix's exact period.
pub fn gen_workload(spec: &WorkloadSpec, keys: &Dataset) -> BenchResultT<Workload> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = keys.len();
    let w = spec.mix.inserts(spec.ops);
    let (band_lo, band_hi) = match spec.mix {
        Mix::WritePartial => ((n as f64 * PARTIAL_BAND.0) as usize, (n as f64 * PARTIAL_BAND.1) as usize),
        _ => (0, n),
    };
    let mut held = Vec::new();
    let mut loaded = vec![true; n];
    if !spec.append && w > 0 {
        // Keep at least half of the band loaded so the structure has data there.
        if w > (band_hi - band_lo) / 2 {
            return Err(BenchError::Usage(format!(
                "{w} inserts need more held-out keys than the {} available",
                (band_hi - band_lo) / 2
            )));
        }
        for i in rand::seq::index::sample(&mut rng, band_hi - band_lo, w) {
            loaded[band_lo + i] = false;
            held.push(band_lo + i);
        }
        held.shuffle(&mut rng);
    }
    let initial = Dataset {
        keys: (0..n).filter(|&i| loaded[i]).map(|i| keys.keys[i]).collect(),
        values: (0..n).filter(|&i| loaded[i]).map(|i| keys.values[i]).collect(),
    };
    if initial.is_empty() {
        return Err(BenchError::Usage("workload leaves no keys loaded".into()));
    }
    let insert_keys: Vec<(f64, f64)> = if spec.append {
        let max = initial.keys[initial.len() - 1];
        let step = if initial.len() > 1 {
            (max - initial.keys[0]) / (initial.len() - 1) as f64
        } else {
            1.0
        };
        let step = if step > 0.0 { step } else { 1.0 };
        (1..=w).map(|i| max + step * i as f64).map(|k| (k, k)).collect()
    } else {
        held.iter().map(|&i| (keys.keys[i], keys.values[i])).collect()
    };
    let insert_region = match spec.mix {
        Mix::WritePartial if n > 0 => {
            let lo = initial.keys.partition_point(|&k| k < keys.keys[band_lo.min(n - 1)]);
            let hi = initial.keys.partition_point(|&k| k < keys.keys[band_hi.min(n - 1)]);
            Some((lo, hi))
        }
        _ => None,
    };
    let chooser = KeyChooser::new(spec.access, initial.len(), &mut rng)?;
    let (r, per) = spec.mix.period();
    let mut queries = Vec::with_capacity(spec.ops);
    let mut next_insert = insert_keys.into_iter();
    for i in 0..spec.ops {
        if i % (r + per) < r {
            let key = initial.keys[chooser.next(&mut rng)];
            queries.push(match spec.mix {
                Mix::RangeScan => Query::scan(key, rng.random_range(1..=MAX_SCAN_LEN)),
                _ => Query::read(key),
            });
        } else {
            let (k, v) = next_insert.next().expect("insert count matches period");
            queries.push(Query::insert(k, v));
        }
    }
    Ok(Workload {
        initial,
        queries,
        insert_region,
    })
}

/// `1 / sum_{i=1..n} i^-s`: probability of the top rank.
pub fn zipf_top_probability(n: usize, s: f64) -> f64 {
    1.0 / (1..=n).map(|i| (i as f64).powf(-s)).sum::<f64>()
}

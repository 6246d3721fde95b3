//! Cost-driven index construction.

mod builder;
mod plan;

pub use builder::{brute_force_objective, Builder, BuiltPlan};
pub use plan::{tree_objective, Design, Subtree};

use crate::cost::{parse_key_values, CostConstants};
use crate::error::{Error, Result};
use crate::inner::InnerKind;
use crate::leaf::{LeafKind, DEFAULT_GAP_DENSITY, DEFAULT_MAX_CAPACITY};

/// Default weight of space against average query latency (ns per byte).
pub const DEFAULT_LAMBDA: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BuildConfig {
    pub lambda: f64,
    /// Ranges larger than this are split greedily instead of by the DP.
    pub algorithm_threshold: usize,
    /// Ranges smaller than this always become a single leaf.
    pub leaf_threshold: usize,
    pub max_capacity: usize,
    pub inner_kinds: Vec<InnerKind>,
    pub inner_fanouts: Vec<usize>,
    pub root_kinds: Vec<InnerKind>,
    /// Explicit root fanouts; when empty, powers of two in `[n/4096, n/256]`.
    pub root_fanouts: Vec<usize>,
    pub leaf_kinds: Vec<LeafKind>,
    /// Gap density gapped leaves are built with.
    pub gap_density: f64,
    /// Leaves index a caller-owned array that only grows at the end.
    pub external: bool,
    pub costs: CostConstants,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            lambda: DEFAULT_LAMBDA,
            algorithm_threshold: 4096,
            leaf_threshold: 1024,
            max_capacity: DEFAULT_MAX_CAPACITY,
            inner_kinds: InnerKind::ALL.to_vec(),
            inner_fanouts: vec![4, 8, 16],
            root_kinds: InnerKind::ALL.to_vec(),
            root_fanouts: Vec::new(),
            leaf_kinds: vec![LeafKind::Array, LeafKind::Gapped],
            gap_density: DEFAULT_GAP_DENSITY,
            external: false,
            costs: CostConstants::default(),
        }
    }
}

fn parse_list<T>(key: &str, value: &str, f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| f(s).ok_or_else(|| Error::InvalidConfig(format!("{key}: bad item {s}"))))
        .collect()
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {value}")))
}

impl BuildConfig {
    /// Configuration for an external-array index.
    pub fn external() -> Self {
        BuildConfig {
            leaf_kinds: vec![LeafKind::External],
            external: true,
            ..Self::default()
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    /// Sets one `key = value` option; cost constants are accepted too.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "lambda" => self.lambda = parse_num(key, value)?,
            "algorithm_threshold" => self.algorithm_threshold = parse_num(key, value)?,
            "leaf_threshold" => self.leaf_threshold = parse_num(key, value)?,
            "max_capacity" => self.max_capacity = parse_num(key, value)?,
            "inner_kinds" => self.inner_kinds = parse_list(key, value, InnerKind::parse)?,
            "inner_fanouts" => self.inner_fanouts = parse_list(key, value, |s| s.parse().ok())?,
            "root_kinds" => self.root_kinds = parse_list(key, value, InnerKind::parse)?,
            "root_fanouts" => self.root_fanouts = parse_list(key, value, |s| s.parse().ok())?,
            "leaf_kinds" => self.leaf_kinds = parse_list(key, value, LeafKind::parse)?,
            "gap_density" => self.gap_density = parse_num(key, value)?,
            "external" => self.external = parse_num(key, value)?,
            _ => {
                if !self.costs.set(key, value)? {
                    return Err(Error::InvalidConfig(format!("unknown key {key}")));
                }
            }
        }
        Ok(())
    }

    pub fn from_config(text: &str) -> Result<Self> {
        let mut c = BuildConfig::default();
        for (k, v) in parse_key_values(text)? {
            c.set(&k, &v)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be a nonnegative number");
        }
        if self.leaf_threshold > self.algorithm_threshold {
            return bad("leaf_threshold exceeds algorithm_threshold");
        }
        if self.max_capacity < self.leaf_threshold || self.max_capacity < 2 {
            return bad("max_capacity must be at least leaf_threshold and 2");
        }
        if self.max_capacity > crate::node::MAX_COUNT as usize {
            return bad("max_capacity does not fit a node record");
        }
        if self.inner_kinds.is_empty() || self.root_kinds.is_empty() || self.leaf_kinds.is_empty() {
            return bad("kind lists must not be empty");
        }
        if self.inner_fanouts.is_empty() || self.inner_fanouts.iter().any(|&c| c < 2) {
            return bad("inner fanouts must be at least 2");
        }
        if self.root_fanouts.contains(&0) {
            return bad("root fanouts must be positive");
        }
        if !(self.gap_density > 0.0 && self.gap_density <= 0.5) {
            return bad("gap_density must lie in (0, 0.5]");
        }
        if self.external != (self.leaf_kinds == [LeafKind::External]) {
            return bad("external mode uses external leaves only");
        }
        Ok(())
    }
}

/// Expected queries per key: reads and inserts landing at each sorted key.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingWorkload {
    reads: Vec<u32>,
    inserts: Vec<u32>,
    read_prefix: Vec<u64>,
    insert_prefix: Vec<u64>,
}

fn prefix(v: &[u32]) -> Vec<u64> {
    let mut p = Vec::with_capacity(v.len() + 1);
    p.push(0);
    let mut s = 0u64;
    for &x in v {
        s += x as u64;
        p.push(s);
    }
    p
}

impl TrainingWorkload {
    pub fn new(reads: Vec<u32>, inserts: Vec<u32>) -> Result<Self> {
        if reads.len() != inserts.len() {
            return Err(Error::LengthMismatch {
                keys: reads.len(),
                values: inserts.len(),
            });
        }
        Ok(TrainingWorkload {
            read_prefix: prefix(&reads),
            insert_prefix: prefix(&inserts),
            reads,
            inserts,
        })
    }

    /// One read per key.
    pub fn uniform_reads(n: usize) -> Self {
        Self::new(vec![1; n], vec![0; n]).expect("equal lengths")
    }

    pub fn len(&self) -> usize {
        self.reads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reads.is_empty()
    }

    pub fn reads(&self) -> &[u32] {
        &self.reads
    }

    pub fn inserts(&self) -> &[u32] {
        &self.inserts
    }

    pub fn reads_in(&self, lo: usize, hi: usize) -> u64 {
        self.read_prefix[hi] - self.read_prefix[lo]
    }

    pub fn inserts_in(&self, lo: usize, hi: usize) -> u64 {
        self.insert_prefix[hi] - self.insert_prefix[lo]
    }

    /// Total query count `m`.
    pub fn total(&self) -> u64 {
        self.reads_in(0, self.len()) + self.inserts_in(0, self.len())
    }

    pub fn read_ratio(&self) -> f64 {
        let m = self.total();
        if m == 0 {
            1.0
        } else {
            self.reads_in(0, self.len()) as f64 / m as f64
        }
    }
}

/// Cold-start workload: one read per key plus inserts at `read_ratio`,
/// spread evenly over the keys or over the sorted positions in `insert_region`.
pub fn default_training_workload(n: usize, read_ratio: f64, insert_region: Option<(usize, usize)>) -> Result<TrainingWorkload> {
    if !(read_ratio > 0.0 && read_ratio <= 1.0) {
        return Err(Error::InvalidConfig(format!("read ratio {read_ratio} outside (0, 1]")));
    }
    let reads = vec![1u32; n];
    let mut inserts = vec![0u32; n];
    let total = (n as f64 * (1.0 - read_ratio) / read_ratio).round() as u64;
    let (lo, hi) = insert_region.unwrap_or((0, n));
    if lo > hi || hi > n {
        return Err(Error::InvalidConfig(format!("insert region {lo}..{hi} outside 0..{n}")));
    }
    let width = (hi - lo) as u64;
    if total > 0 && width > 0 {
        for (i, slot) in inserts[lo..hi].iter_mut().enumerate() {
            let i = i as u64;
            *slot = ((i + 1) * total / width - i * total / width) as u32;
        }
    }
    TrainingWorkload::new(reads, inserts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip() {
        let c =
            BuildConfig::from_config("lambda = 0.5\ninner_kinds = lr, bs\ninner_fanouts = 2,3\nleaf_kinds = array\nmove_ns = 2\n").unwrap();
        assert_eq!(c.lambda, 0.5);
        assert_eq!(c.inner_kinds, [InnerKind::Lr, InnerKind::Bs]);
        assert_eq!(c.inner_fanouts, [2, 3]);
        assert_eq!(c.leaf_kinds, [LeafKind::Array]);
        assert_eq!(c.costs.move_ns, 2.0);
    }

    #[test]
    fn config_rejects_bad_values() {
        for text in [
            "lambda = -1",
            "leaf_threshold = 8000",
            "max_capacity = 100",
            "inner_kinds = foo",
            "inner_fanouts = 1",
            "gap_density = 0.7",
            "nope = 1",
            "external = true",
        ] {
            assert!(BuildConfig::from_config(text).is_err(), "{text}");
        }
        BuildConfig::default().validate().unwrap();
        BuildConfig::external().validate().unwrap();
    }

    #[test]
    fn training_workload_shapes() {
        let w = default_training_workload(100, 1.0, None).unwrap();
        assert_eq!(w.inserts_in(0, 100), 0);
        assert_eq!(w.reads_in(0, 100), 100);
        let w = default_training_workload(100, 0.5, None).unwrap();
        assert_eq!(w.inserts_in(0, 100), 100);
        assert_eq!(w.read_ratio(), 0.5);
        let w = default_training_workload(1000, 0.85, Some((600, 900))).unwrap();
        assert_eq!(w.inserts_in(0, 600) + w.inserts_in(900, 1000), 0);
        assert_eq!(w.inserts_in(600, 900), 176);
        assert!(default_training_workload(10, 0.0, None).is_err());
    }
}

//! Time and space cost formulas used to compare index designs.

use crate::error::{Error, Result};
use crate::inner::InnerKind;
use crate::leaf::LeafKind;

/// Calibrated per-node latencies (ns) and space parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostConstants {
    pub inner_lr_ns: f64,
    pub inner_plr_ns: f64,
    pub inner_his_ns: f64,
    pub inner_bs_ns: f64,
    pub root_lr_ns: f64,
    pub root_plr_ns: f64,
    pub root_his_ns: f64,
    /// Binary-search root: `root_bs_ns + root_bs_log_ns * log2 c`.
    pub root_bs_ns: f64,
    pub root_bs_log_ns: f64,
    /// Array leaf base latency for the smallest and largest leaves.
    pub leaf_array_min_ns: f64,
    pub leaf_array_max_ns: f64,
    /// Gapped leaf base latency as a multiple of the array base.
    pub gapped_factor_min: f64,
    pub gapped_factor_max: f64,
    pub comparison_ns: f64,
    pub move_ns: f64,
    /// Bytes per data slot, gaps included.
    pub lambda_data: f64,
    pub node_bytes: f64,
}

impl Default for CostConstants {
    fn default() -> Self {
        CostConstants {
            inner_lr_ns: 92.5,
            inner_plr_ns: 97.2,
            inner_his_ns: 109.9,
            inner_bs_ns: 114.4,
            root_lr_ns: 12.7,
            root_plr_ns: 39.6,
            root_his_ns: 44.3,
            root_bs_ns: 94.2,
            root_bs_log_ns: 5.1,
            leaf_array_min_ns: 189.4,
            leaf_array_max_ns: 230.3,
            gapped_factor_min: 1.08,
            gapped_factor_max: 1.21,
            comparison_ns: 4.0,
            move_ns: 4.0,
            lambda_data: 16.0,
            node_bytes: 64.0,
        }
    }
}

/// Leaf sizes (log2) the base latency range is spread over.
const LEAF_LOG_MIN: f64 = 1.0;
const LEAF_LOG_MAX: f64 = 12.0;

impl CostConstants {
    /// Sets the field named `key`. Returns `Ok(false)` for unknown keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        let slot = match key {
            "inner_lr_ns" => &mut self.inner_lr_ns,
            "inner_plr_ns" => &mut self.inner_plr_ns,
            "inner_his_ns" => &mut self.inner_his_ns,
            "inner_bs_ns" => &mut self.inner_bs_ns,
            "root_lr_ns" => &mut self.root_lr_ns,
            "root_plr_ns" => &mut self.root_plr_ns,
            "root_his_ns" => &mut self.root_his_ns,
            "root_bs_ns" => &mut self.root_bs_ns,
            "root_bs_log_ns" => &mut self.root_bs_log_ns,
            "leaf_array_min_ns" => &mut self.leaf_array_min_ns,
            "leaf_array_max_ns" => &mut self.leaf_array_max_ns,
            "gapped_factor_min" => &mut self.gapped_factor_min,
            "gapped_factor_max" => &mut self.gapped_factor_max,
            "comparison_ns" => &mut self.comparison_ns,
            "move_ns" => &mut self.move_ns,
            "lambda_data" => &mut self.lambda_data,
            "node_bytes" => &mut self.node_bytes,
            _ => return Ok(false),
        };
        let v: f64 = value
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("{key}: not a number: {value}")))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidConfig(format!("{key} must be positive, got {value}")));
        }
        *slot = v;
        Ok(true)
    }

    pub fn from_config(text: &str) -> Result<Self> {
        let mut c = CostConstants::default();
        for (k, v) in parse_key_values(text)? {
            if !c.set(&k, &v)? {
                return Err(Error::InvalidConfig(format!("unknown key {k}")));
            }
        }
        Ok(c)
    }

    pub fn tcost_inner(&self, kind: InnerKind) -> f64 {
        match kind {
            InnerKind::Lr => self.inner_lr_ns,
            InnerKind::Plr => self.inner_plr_ns,
            InnerKind::His => self.inner_his_ns,
            InnerKind::Bs => self.inner_bs_ns,
        }
    }

    pub fn tcost_root(&self, kind: InnerKind, fanout: usize) -> f64 {
        match kind {
            InnerKind::Lr => self.root_lr_ns,
            InnerKind::Plr => self.root_plr_ns,
            InnerKind::His => self.root_his_ns,
            InnerKind::Bs => self.root_bs_ns + self.root_bs_log_ns * (fanout.max(1) as f64).log2(),
        }
    }

    fn size_weight(capacity: usize) -> f64 {
        let l = (capacity.max(2) as f64).log2();
        ((l - LEAF_LOG_MIN) / (LEAF_LOG_MAX - LEAF_LOG_MIN)).clamp(0.0, 1.0)
    }

    /// Fixed part of a leaf access for a leaf with `capacity` slots.
    pub fn leaf_base_ns(&self, kind: LeafKind, capacity: usize) -> f64 {
        let w = Self::size_weight(capacity);
        let base = self.leaf_array_min_ns + w * (self.leaf_array_max_ns - self.leaf_array_min_ns);
        match kind {
            LeafKind::Gapped => base * (self.gapped_factor_min + w * (self.gapped_factor_max - self.gapped_factor_min)),
            _ => base,
        }
    }

    /// Read latency of a leaf: base plus `comparisons * comparison_ns`.
    /// `span` is the searched slot count and `d` the gap density.
    pub fn tcost_leaf_read(&self, kind: LeafKind, span: usize, capacity: usize, epsilon: u32, p_hit: f64, d: f64) -> f64 {
        let d = if kind == LeafKind::Gapped { d } else { 0.0 };
        self.leaf_base_ns(kind, capacity) + leaf_comparisons(span, epsilon, p_hit, d) * self.comparison_ns
    }

    /// Insert latency: the read plus `moves * move_ns`.
    pub fn tcost_leaf_insert(&self, kind: LeafKind, n: usize, d: f64, read_cost: f64) -> Result<f64> {
        Ok(read_cost + insert_moves(kind, n, d)? * self.move_ns)
    }

    pub fn scost_leaf(&self, slots: usize) -> f64 {
        self.node_bytes + slots as f64 * self.lambda_data
    }
}

/// Expected binary-search comparisons in a leaf of `n` slots.
pub fn leaf_comparisons(n: usize, epsilon: u32, p_hit: f64, d: f64) -> f64 {
    let lg = |x: usize| (x.max(1) as f64).log2().ceil();
    (p_hit * lg(epsilon as usize) + (1.0 - p_hit) * lg(n)) * (1.0 + d)
}

/// Expected entries moved by one insert.
pub fn insert_moves(kind: LeafKind, n: usize, d: f64) -> Result<f64> {
    match kind {
        LeafKind::Array => Ok(n as f64 / 2.0),
        LeafKind::External => Ok(0.0),
        LeafKind::Gapped => {
            if d <= 0.0 {
                Err(Error::DegenerateDensity)
            } else {
                Ok((1.0 - d) / (2.0 * d))
            }
        }
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key = value", no + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostBreakdown {
    /// Query-weighted latency summed over the workload.
    pub time_ns: f64,
    pub space_bytes: f64,
    /// `time_ns / m + lambda * space_bytes`.
    pub objective: f64,
}

impl CostBreakdown {
    pub fn new(time_ns: f64, space_bytes: f64, m: f64, lambda: f64) -> Self {
        CostBreakdown {
            time_ns,
            space_bytes,
            objective: time_ns / m + lambda * space_bytes,
        }
    }

    /// Average latency per query.
    pub fn avg_time_ns(&self, m: f64) -> f64 {
        self.time_ns / m
    }
}

/// Child sizes of one partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionStats {
    pub child_sizes: Vec<usize>,
}

impl PartitionStats {
    pub fn total(&self) -> usize {
        self.child_sizes.iter().sum()
    }

    /// From the `c + 1` boundaries returned by `inner::partition`.
    pub fn from_bounds(bounds: &[usize]) -> Self {
        PartitionStats {
            child_sizes: bounds.windows(2).map(|w| w[1] - w[0]).collect(),
        }
    }
}

/// Shannon entropy in bits of a partition.
pub fn entropy(stats: &PartitionStats) -> f64 {
    let n = stats.total() as f64;
    if n == 0.0 {
        return 0.0;
    }
    stats
        .child_sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Greedy score of a node design; lower is better.
pub fn node_performance(tcost: f64, lambda: f64, p: f64, child_space: f64, h: f64) -> Result<f64> {
    if h <= 0.0 {
        return Err(Error::ZeroEntropy);
    }
    Ok((tcost + lambda * child_space / p) / h)
}

/// Counts-only view of an index tree.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeShape {
    Leaf(usize),
    Inner(Vec<TreeShape>),
}

impl TreeShape {
    pub fn count(&self) -> usize {
        match self {
            TreeShape::Leaf(n) => *n,
            TreeShape::Inner(ch) => ch.iter().map(TreeShape::count).sum(),
        }
    }
}

/// Sum over nodes of (node share of the data) x (node entropy), with a leaf
/// of `k` entries contributing entropy `log2 k`. Equals `log2 n` for any tree.
pub fn weighted_entropy_sum(tree: &TreeShape) -> f64 {
    fn walk(t: &TreeShape, n: f64) -> (usize, f64) {
        match t {
            TreeShape::Leaf(k) => {
                let s = if *k > 0 { *k as f64 / n * (*k as f64).log2() } else { 0.0 };
                (*k, s)
            }
            TreeShape::Inner(ch) => {
                let mut sizes = Vec::with_capacity(ch.len());
                let mut sum = 0.0;
                for c in ch {
                    let (k, s) = walk(c, n);
                    sizes.push(k);
                    sum += s;
                }
                let stats = PartitionStats { child_sizes: sizes };
                let k = stats.total();
                (k, sum + k as f64 / n * entropy(&stats))
            }
        }
    }
    let n = tree.count();
    if n == 0 {
        return 0.0;
    }
    walk(tree, n as f64).1
}

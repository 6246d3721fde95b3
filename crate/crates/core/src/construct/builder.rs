use std::collections::HashMap;
use std::rc::Rc;

use super::plan::{Design, Subtree};
use super::{BuildConfig, TrainingWorkload};
use crate::cost::{entropy, node_performance, CostBreakdown, PartitionStats};
use crate::error::{Error, Result};
use crate::inner::{partition, Branch, InnerKind, InnerModel, RootNode};
use crate::leaf::{gapped_capacity, LeafKind, LeafPlan};

/// Root and first-level subtrees of a planned index.
#[derive(Debug, Clone)]
pub struct BuiltPlan {
    pub root: RootNode,
    pub children: Vec<Rc<Subtree>>,
    pub cost: CostBreakdown,
}

impl BuiltPlan {
    /// Levels including the root.
    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(|c| c.depth()).max().unwrap_or(0)
    }
}

/// Plans an index over sorted, distinct `keys`.
pub struct Builder<'a> {
    keys: &'a [f64],
    workload: &'a TrainingWorkload,
    config: &'a BuildConfig,
    m: f64,
    /// Key count the data mass of a range is measured against.
    mass: f64,
    memo: HashMap<(usize, usize), Rc<Subtree>>,
    memo_hits: usize,
}

fn is_degenerate(bounds: &[usize], n: usize) -> bool {
    bounds.windows(2).any(|w| w[1] - w[0] == n)
}

impl<'a> Builder<'a> {
    pub fn new(keys: &'a [f64], workload: &'a TrainingWorkload, config: &'a BuildConfig) -> Result<Self> {
        if keys.len() != workload.len() {
            return Err(Error::LengthMismatch {
                keys: keys.len(),
                values: workload.len(),
            });
        }
        config.validate()?;
        Ok(Builder {
            keys,
            workload,
            config,
            m: workload.total().max(1) as f64,
            mass: keys.len().max(1) as f64,
            memo: HashMap::new(),
            memo_hits: 0,
        })
    }

    /// Measures data mass against `n` keys instead of this key slice.
    pub fn with_mass(mut self, n: usize) -> Self {
        self.mass = n.max(1) as f64;
        self
    }

    pub fn memo_hits(&self) -> usize {
        self.memo_hits
    }

    pub fn clear_memo(&mut self) {
        self.memo.clear();
    }

    fn lambda(&self) -> f64 {
        self.config.lambda
    }

    fn queries_in(&self, lo: usize, hi: usize) -> f64 {
        (self.workload.reads_in(lo, hi) + self.workload.inserts_in(lo, hi)) as f64
    }

    /// Leaf designs considered for `lo..hi`, in preference order.
    pub fn leaf_candidates(&self, lo: usize, hi: usize) -> Result<Vec<LeafPlan>> {
        let n = hi - lo;
        let cfg = self.config;
        let keys = &self.keys[lo..hi];
        if n == 0 {
            // Nothing to price, so favour the kind that absorbs inserts cheaply
            // when the workload writes at all.
            let writes = self.workload.inserts_in(0, self.keys.len()) > 0;
            let kind = if writes && cfg.leaf_kinds.contains(&LeafKind::Gapped) {
                LeafKind::Gapped
            } else if cfg.leaf_kinds.contains(&LeafKind::Array) {
                LeafKind::Array
            } else {
                cfg.leaf_kinds[0]
            };
            return Ok(vec![LeafPlan::new(kind, keys, 0)?]);
        }
        let mut out = Vec::with_capacity(cfg.leaf_kinds.len());
        for &kind in &cfg.leaf_kinds {
            let capacity = match kind {
                LeafKind::Array | LeafKind::External => n,
                LeafKind::Gapped => {
                    let w = self.workload.inserts_in(lo, hi) as f64;
                    let d = (w / (n as f64 + w)).clamp(cfg.gap_density, 0.5);
                    let cap = gapped_capacity(n, d, cfg.max_capacity);
                    if cap <= n {
                        continue;
                    }
                    cap
                }
            };
            out.push(LeafPlan::new(kind, keys, capacity)?);
        }
        Ok(out)
    }

    fn leaf_subtree(&self, lo: usize, hi: usize, plan: LeafPlan) -> Result<Subtree> {
        let c = &self.config.costs;
        let r = self.workload.reads_in(lo, hi) as f64;
        let w = self.workload.inserts_in(lo, hi) as f64;
        let read = c.tcost_leaf_read(
            plan.kind,
            plan.span(),
            plan.capacity,
            plan.model.epsilon,
            plan.p_hit,
            plan.density(),
        );
        let insert = if w > 0.0 {
            c.tcost_leaf_insert(plan.kind, plan.size, plan.density(), read)?
        } else {
            0.0
        };
        let time_ns = r * read + w * insert;
        let space_bytes = c.scost_leaf(plan.capacity);
        Ok(Subtree {
            lo,
            hi,
            design: Design::Leaf(plan),
            time_ns,
            space_bytes,
            objective: time_ns / self.m + self.lambda() * space_bytes,
        })
    }

    /// Cheapest leaf for `lo..hi`.
    pub fn leaf_optimal(&self, lo: usize, hi: usize) -> Result<Subtree> {
        let n = hi - lo;
        if n > self.config.max_capacity {
            return Err(Error::TooLarge {
                len: n,
                max: self.config.max_capacity,
            });
        }
        let mut best: Option<Subtree> = None;
        for plan in self.leaf_candidates(lo, hi)? {
            let s = self.leaf_subtree(lo, hi, plan)?;
            if best.as_ref().is_none_or(|b| s.objective < b.objective) {
                best = Some(s);
            }
        }
        best.ok_or(Error::NoViableCandidate)
    }

    /// Best leaf, or `None` when the range has no legal leaf design.
    fn leaf_if_fits(&self, lo: usize, hi: usize) -> Result<Option<Subtree>> {
        if hi - lo > self.config.max_capacity {
            return Ok(None);
        }
        match self.leaf_optimal(lo, hi) {
            Ok(s) => Ok(Some(s)),
            Err(Error::NoViableCandidate) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// (kind, fanout) pairs for inner nodes, fanouts capped per kind.
    pub fn inner_candidates(&self) -> Vec<(InnerKind, usize)> {
        let mut out: Vec<(InnerKind, usize)> = Vec::new();
        for &kind in &self.config.inner_kinds {
            for &c in &self.config.inner_fanouts {
                let c = c.min(kind.max_inner_fanout());
                if c >= 2 && !out.contains(&(kind, c)) {
                    out.push((kind, c));
                }
            }
        }
        out
    }

    /// Combines a node with planned children; the node's own cost comes first.
    fn inner_subtree(&self, lo: usize, hi: usize, model: InnerModel, children: Vec<Rc<Subtree>>) -> Subtree {
        let c = &self.config.costs;
        let q = self.queries_in(lo, hi);
        let tcost = c.tcost_inner(model.kind());
        let mut objective = q / self.m * tcost + self.lambda() * c.node_bytes;
        let mut time_ns = q * tcost;
        let mut space_bytes = c.node_bytes;
        for ch in &children {
            objective += ch.objective;
            time_ns += ch.time_ns;
            space_bytes += ch.space_bytes;
        }
        Subtree {
            lo,
            hi,
            design: Design::Inner { model, children },
            time_ns,
            space_bytes,
            objective,
        }
    }

    fn plan_children(&mut self, lo: usize, bounds: &[usize], dp: bool) -> Result<Vec<Rc<Subtree>>> {
        bounds
            .windows(2)
            .map(|w| {
                if dp {
                    self.dp(lo + w[0], lo + w[1])
                } else {
                    self.subtree(lo + w[0], lo + w[1])
                }
            })
            .collect()
    }

    /// Exact optimum over all trees for `lo..hi`, memoized by range.
    pub fn dp(&mut self, lo: usize, hi: usize) -> Result<Rc<Subtree>> {
        if let Some(s) = self.memo.get(&(lo, hi)) {
            self.memo_hits += 1;
            return Ok(s.clone());
        }
        let n = hi - lo;
        let mut best = self.leaf_if_fits(lo, hi)?;
        if n >= self.config.leaf_threshold && n >= 2 {
            for (kind, c) in self.inner_candidates() {
                let model = InnerModel::train(kind, &self.keys[lo..hi], c)?;
                let bounds = partition(&model, &self.keys[lo..hi]);
                if is_degenerate(&bounds, n) {
                    continue;
                }
                let children = self.plan_children(lo, &bounds, true)?;
                let s = self.inner_subtree(lo, hi, model, children);
                if best.as_ref().is_none_or(|b| s.objective < b.objective) {
                    best = Some(s);
                }
            }
        }
        let best = match best {
            Some(b) => b,
            None => {
                let (model, bounds) = self.fallback(lo, hi)?;
                let children = self.plan_children(lo, &bounds, true)?;
                self.inner_subtree(lo, hi, model, children)
            }
        };
        let rc = Rc::new(best);
        self.memo.insert((lo, hi), rc.clone());
        Ok(rc)
    }

    /// Two-way binary search split, never degenerate on two distinct keys.
    fn fallback(&self, lo: usize, hi: usize) -> Result<(InnerModel, Vec<usize>)> {
        let keys = &self.keys[lo..hi];
        let model = InnerModel::train(InnerKind::Bs, keys, 2)?;
        let bounds = partition(&model, keys);
        if is_degenerate(&bounds, keys.len()) {
            return Err(Error::NoViableCandidate);
        }
        Ok((model, bounds))
    }

    /// Inner design for `lo..hi` with the best cost-per-entropy score.
    pub fn greedy_select(&self, lo: usize, hi: usize) -> Result<(InnerModel, Vec<usize>)> {
        let keys = &self.keys[lo..hi];
        let p = keys.len() as f64 / self.mass;
        let c = &self.config.costs;
        let mut best: Option<(f64, InnerModel, Vec<usize>)> = None;
        for (kind, fanout) in self.inner_candidates() {
            let model = InnerModel::train(kind, keys, fanout)?;
            let bounds = partition(&model, keys);
            let h = entropy(&PartitionStats::from_bounds(&bounds));
            let score = match node_performance(c.tcost_inner(kind), self.lambda(), p, c.node_bytes * fanout as f64, h) {
                Ok(s) => s,
                Err(Error::ZeroEntropy) => continue,
                Err(e) => return Err(e),
            };
            if best.as_ref().is_none_or(|b| score < b.0) {
                best = Some((score, model, bounds));
            }
        }
        match best {
            Some((_, m, b)) => Ok((m, b)),
            None => self.fallback(lo, hi),
        }
    }

    /// Greedy above the algorithm threshold, DP below it.
    fn subtree(&mut self, lo: usize, hi: usize) -> Result<Rc<Subtree>> {
        if hi - lo > self.config.algorithm_threshold {
            let (model, bounds) = self.greedy_select(lo, hi)?;
            let children = self.plan_children(lo, &bounds, false)?;
            Ok(Rc::new(self.inner_subtree(lo, hi, model, children)))
        } else {
            // Ranges handed to separate DP runs are disjoint.
            self.memo.clear();
            self.dp(lo, hi)
        }
    }

    /// Root fanouts tried by the greedy root selection.
    pub fn root_fanouts(&self, n: usize) -> Vec<usize> {
        if !self.config.root_fanouts.is_empty() {
            return self.config.root_fanouts.clone();
        }
        let mut out = Vec::new();
        let mut c = n.div_ceil(4096).next_power_of_two().max(2);
        while c <= n / 256 {
            out.push(c);
            c *= 2;
        }
        if out.is_empty() {
            out.push((n / 1024).next_power_of_two().max(2));
        }
        out
    }

    fn root_terms(&self, root: &RootNode) -> (f64, f64) {
        let c = &self.config.costs;
        (c.tcost_root(root.kind(), root.fanout()), root.space_bytes() as f64)
    }

    fn finish(&self, root: RootNode, children: Vec<Rc<Subtree>>) -> BuiltPlan {
        let (tcost, space) = self.root_terms(&root);
        let mut objective = tcost + self.lambda() * space;
        let mut time_ns = self.m * tcost;
        let mut space_bytes = space;
        for ch in &children {
            objective += ch.objective;
            time_ns += ch.time_ns;
            space_bytes += ch.space_bytes;
        }
        BuiltPlan {
            root,
            children,
            cost: CostBreakdown {
                time_ns,
                space_bytes,
                objective,
            },
        }
    }

    /// Root chosen by exact comparison when the whole input fits the DP.
    fn dp_root(&mut self) -> Result<BuiltPlan> {
        let n = self.keys.len();
        self.memo.clear();
        let mut best: Option<BuiltPlan> = None;
        if let Some(leaf) = self.leaf_if_fits(0, n)? {
            let root = RootNode::train(InnerKind::Lr, self.keys, 1)?;
            best = Some(self.finish(root, vec![Rc::new(leaf)]));
        }
        if n >= self.config.leaf_threshold && n >= 2 {
            let fanouts = if self.config.root_fanouts.is_empty() {
                self.config.inner_fanouts.clone()
            } else {
                self.config.root_fanouts.clone()
            };
            for kind in self.config.root_kinds.clone() {
                for &c in &fanouts {
                    if c < 2 {
                        continue;
                    }
                    let root = RootNode::train(kind, self.keys, c)?;
                    let bounds = partition(&root, self.keys);
                    if is_degenerate(&bounds, n) {
                        continue;
                    }
                    let children = self.plan_children(0, &bounds, true)?;
                    let plan = self.finish(root, children);
                    if best.as_ref().is_none_or(|b| plan.cost.objective < b.cost.objective) {
                        best = Some(plan);
                    }
                }
            }
        }
        best.ok_or(Error::NoViableCandidate)
    }

    fn greedy_root(&self) -> Result<(RootNode, Vec<usize>)> {
        let n = self.keys.len();
        let c = &self.config.costs;
        let mut best: Option<(f64, RootNode, Vec<usize>)> = None;
        for &kind in &self.config.root_kinds {
            for fanout in self.root_fanouts(n) {
                let root = RootNode::train(kind, self.keys, fanout)?;
                let bounds = partition(&root, self.keys);
                let h = entropy(&PartitionStats::from_bounds(&bounds));
                let (tcost, space) = self.root_terms(&root);
                let child_space = space + c.node_bytes * fanout as f64;
                let score = match node_performance(tcost, self.lambda(), 1.0, child_space, h) {
                    Ok(s) => s,
                    Err(Error::ZeroEntropy) => continue,
                    Err(e) => return Err(e),
                };
                if best.as_ref().is_none_or(|b| score < b.0) {
                    best = Some((score, root, bounds));
                }
            }
        }
        match best {
            Some((_, r, b)) => Ok((r, b)),
            None => {
                let root = RootNode::train(InnerKind::Bs, self.keys, 2)?;
                let bounds = partition(&root, self.keys);
                if is_degenerate(&bounds, n) {
                    return Err(Error::NoViableCandidate);
                }
                Ok((root, bounds))
            }
        }
    }

    /// Plans the whole index.
    pub fn build(&mut self) -> Result<BuiltPlan> {
        let n = self.keys.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if n <= self.config.algorithm_threshold {
            return self.dp_root();
        }
        let (root, bounds) = self.greedy_root()?;
        let children = self.plan_children(0, &bounds, false)?;
        Ok(self.finish(root, children))
    }

    /// Subtree replacing an overfull leaf: greedy nodes until ranges fit a
    /// leaf of `kind`, using only the keys at hand.
    pub fn local_subtree(&self, lo: usize, hi: usize, kind: LeafKind) -> Result<Rc<Subtree>> {
        let n = hi - lo;
        let cfg = self.config;
        if n <= cfg.leaf_threshold {
            let capacity = match kind {
                LeafKind::Gapped if n > 0 => gapped_capacity(n, cfg.gap_density, cfg.max_capacity),
                _ => n,
            };
            let plan = LeafPlan::new(kind, &self.keys[lo..hi], capacity)?;
            return Ok(Rc::new(self.leaf_subtree(lo, hi, plan)?));
        }
        let (model, bounds) = self.greedy_select(lo, hi)?;
        let children = bounds
            .windows(2)
            .map(|w| self.local_subtree(lo + w[0], lo + w[1], kind))
            .collect::<Result<Vec<_>>>()?;
        Ok(Rc::new(self.inner_subtree(lo, hi, model, children)))
    }

    /// Two-level structure: a linear root over array leaves, no search.
    pub fn fixed_rmi(&self, fanout: usize) -> Result<BuiltPlan> {
        if self.keys.is_empty() {
            return Err(Error::EmptyInput);
        }
        let root = RootNode::train(InnerKind::Lr, self.keys, fanout)?;
        let bounds = partition(&root, self.keys);
        let children = bounds
            .windows(2)
            .map(|w| {
                let plan = LeafPlan::new(LeafKind::Array, &self.keys[w[0]..w[1]], w[1] - w[0])?;
                Ok(Rc::new(self.leaf_subtree(w[0], w[1], plan)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.finish(root, children))
    }
}

/// Reference optimum for `0..n` by listing the objective of every legal
/// tree. Gives up with `TooLarge` once more than `limit` partial trees exist.
pub fn brute_force_objective(keys: &[f64], workload: &TrainingWorkload, config: &BuildConfig, limit: usize) -> Result<f64> {
    let b = Builder::new(keys, workload, config)?;
    let all = enumerate_trees(&b, 0, keys.len(), limit)?;
    Ok(all.into_iter().fold(f64::INFINITY, f64::min))
}

fn enumerate_trees(b: &Builder, lo: usize, hi: usize, limit: usize) -> Result<Vec<f64>> {
    let n = hi - lo;
    let cfg = b.config;
    let mut out = Vec::new();
    if n <= cfg.max_capacity {
        for plan in b.leaf_candidates(lo, hi)? {
            out.push(b.leaf_subtree(lo, hi, plan)?.objective);
        }
    }
    if n >= cfg.leaf_threshold && n >= 2 {
        for (kind, c) in b.inner_candidates() {
            let keys = &b.keys[lo..hi];
            let model = InnerModel::train(kind, keys, c)?;
            let bounds = partition(&model, keys);
            if is_degenerate(&bounds, n) {
                continue;
            }
            let q = b.queries_in(lo, hi);
            let own = q / b.m * cfg.costs.tcost_inner(kind) + cfg.lambda * cfg.costs.node_bytes;
            let mut partial = vec![own];
            for w in bounds.windows(2) {
                let options = enumerate_trees(b, lo + w[0], lo + w[1], limit)?;
                if partial.len() * options.len() > limit {
                    return Err(Error::TooLarge {
                        len: partial.len() * options.len(),
                        max: limit,
                    });
                }
                partial = partial.iter().flat_map(|&p| options.iter().map(move |&o| p + o)).collect();
            }
            out.extend(partial);
        }
    }
    Ok(out)
}

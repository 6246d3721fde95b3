//! The servable index: a root model, the node array and the data array.

use crate::construct::{BuildConfig, Builder, BuiltPlan, Design, Subtree, TrainingWorkload};
use crate::cost::{weighted_entropy_sum, CostBreakdown, TreeShape};
use crate::data::{DataArray, Entry};
use crate::error::{Error, Result};
use crate::inner::{predict_block, Branch, InnerKind, RootNode};
use crate::leaf::{Leaf, LeafKind, SearchTrace, NO_LEAF};
use crate::node::{NodeArray, NodeType};

/// Structural census of an index.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexStats {
    /// Node counts in `NodeType::ALL` order; the root is not included.
    pub counts: [usize; 7],
    /// Levels including the root.
    pub depth: usize,
    pub space_bytes: f64,
    pub weighted_entropy: f64,
    pub len: usize,
}

impl IndexStats {
    pub fn count(&self, t: NodeType) -> usize {
        self.counts[NodeType::ALL.iter().position(|&x| x == t).expect("listed")]
    }

    pub fn nodes(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn leaves(&self) -> usize {
        self.count(NodeType::ArrayLeaf) + self.count(NodeType::GappedLeaf) + self.count(NodeType::ExternalLeaf)
    }
}

#[derive(Debug, Clone)]
pub struct Index {
    root: RootNode,
    nodes: NodeArray,
    data: DataArray,
    config: BuildConfig,
    len: usize,
    /// Largest key ever stored; external inserts must exceed it.
    max_key: f64,
    first_leaf: u32,
    build_cost: CostBreakdown,
}

/// Sorts pairs by key and rejects non-finite or repeated keys.
pub fn prepare_entries(keys: &[f64], values: &[f64]) -> Result<Vec<Entry>> {
    if keys.len() != values.len() {
        return Err(Error::LengthMismatch {
            keys: keys.len(),
            values: values.len(),
        });
    }
    if let Some(&k) = keys.iter().find(|k| !k.is_finite()) {
        return Err(Error::NonFiniteKey(k));
    }
    let mut entries: Vec<Entry> = keys.iter().zip(values).map(|(&k, &v)| Entry::new(k, v)).collect();
    entries.sort_by(|a, b| a.key.total_cmp(&b.key));
    if let Some(w) = entries.windows(2).find(|w| w[0].key == w[1].key) {
        return Err(Error::DuplicateKeys(w[0].key));
    }
    // -0.0 and 0.0 sort apart under total_cmp but compare equal.
    Ok(entries)
}

/// Builds an index; `training` is indexed by sorted key position.
pub fn build_index(keys: &[f64], values: &[f64], training: &TrainingWorkload, config: &BuildConfig) -> Result<(Index, CostBreakdown)> {
    let index = Index::build(keys, values, training, config)?;
    let cost = index.build_cost();
    Ok((index, cost))
}

impl Index {
    pub fn build(keys: &[f64], values: &[f64], training: &TrainingWorkload, config: &BuildConfig) -> Result<Index> {
        let entries = prepare_entries(keys, values)?;
        let sorted: Vec<f64> = entries.iter().map(|e| e.key).collect();
        let plan = Builder::new(&sorted, training, config)?.build()?;
        Index::from_plan(plan, entries, config.clone())
    }

    /// Two-level learned index with a linear root and array leaves.
    pub fn fixed_rmi(keys: &[f64], values: &[f64], fanout: usize, config: &BuildConfig) -> Result<Index> {
        let entries = prepare_entries(keys, values)?;
        let sorted: Vec<f64> = entries.iter().map(|e| e.key).collect();
        let training = TrainingWorkload::uniform_reads(sorted.len());
        let cfg = BuildConfig {
            leaf_kinds: vec![LeafKind::Array],
            external: false,
            ..config.clone()
        };
        let plan = Builder::new(&sorted, &training, &cfg)?.fixed_rmi(fanout)?;
        Index::from_plan(plan, entries, cfg)
    }

    /// Cost-driven construction restricted to linear nodes and gapped leaves.
    pub fn fixed_alex(keys: &[f64], values: &[f64], training: &TrainingWorkload, config: &BuildConfig) -> Result<Index> {
        let cfg = BuildConfig {
            inner_kinds: vec![InnerKind::Lr],
            root_kinds: vec![InnerKind::Lr],
            leaf_kinds: vec![LeafKind::Gapped],
            external: false,
            ..config.clone()
        };
        Index::build(keys, values, training, &cfg)
    }

    /// Lays a plan out in the node and data arrays.
    pub fn from_plan(plan: BuiltPlan, entries: Vec<Entry>, config: BuildConfig) -> Result<Index> {
        let max_key = entries.last().map_or(f64::NEG_INFINITY, |e| e.key);
        let len = entries.len();
        let data = if config.external {
            DataArray::from_entries(entries.clone())
        } else {
            DataArray::new()
        };
        let mut index = Index {
            root: plan.root,
            nodes: NodeArray::new(),
            data,
            config,
            len,
            max_key,
            first_leaf: 0,
            build_cost: plan.cost,
        };
        let base = index.nodes.allocate_children(plan.children.len())?;
        let mut leaves = Vec::new();
        for (j, child) in plan.children.iter().enumerate() {
            index.place(child, base + j as u32, &entries, 0, &mut leaves)?;
        }
        index.first_leaf = leaves[0].0;
        index.link(leaves, NO_LEAF, NO_LEAF)?;
        Ok(index)
    }

    /// Writes `sub` at node `idx`, appending its leaves in key order.
    fn place(&mut self, sub: &Subtree, idx: u32, entries: &[Entry], ext_base: u32, leaves: &mut Vec<(u32, Leaf)>) -> Result<()> {
        match &sub.design {
            Design::Leaf(plan) => {
                let leaf = Leaf::materialize(plan, &mut self.data, &entries[sub.lo..sub.hi], ext_base + sub.lo as u32)?;
                leaves.push((idx, leaf));
            }
            Design::Inner { model, children } => {
                let start = self.nodes.allocate_children(children.len())?;
                self.nodes.set(idx, &model.to_record(start))?;
                for (j, ch) in children.iter().enumerate() {
                    self.place(ch, start + j as u32, entries, ext_base, leaves)?;
                }
            }
        }
        Ok(())
    }

    /// Chains `leaves` between `prev` and `next` and stores their records.
    fn link(&mut self, mut leaves: Vec<(u32, Leaf)>, prev: u32, next: u32) -> Result<()> {
        let ids: Vec<u32> = leaves.iter().map(|l| l.0).collect();
        for (j, (_, leaf)) in leaves.iter_mut().enumerate() {
            leaf.prev = if j == 0 { prev } else { ids[j - 1] };
            leaf.next = ids.get(j + 1).copied().unwrap_or(next);
        }
        for (idx, leaf) in &leaves {
            self.nodes.set(*idx, &leaf.to_record())?;
        }
        if prev != NO_LEAF {
            let mut p = self.leaf_at(prev);
            p.next = ids[0];
            self.nodes.set(prev, &p.to_record())?;
        } else {
            self.first_leaf = ids[0];
        }
        if next != NO_LEAF {
            let mut n = self.leaf_at(next);
            n.prev = *ids.last().expect("nonempty");
            self.nodes.set(next, &n.to_record())?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn root(&self) -> &RootNode {
        &self.root
    }

    pub fn nodes(&self) -> &NodeArray {
        &self.nodes
    }

    pub fn data(&self) -> &DataArray {
        &self.data
    }

    pub fn config(&self) -> &BuildConfig {
        &self.config
    }

    pub fn build_cost(&self) -> CostBreakdown {
        self.build_cost
    }

    #[inline]
    fn leaf_at(&self, idx: u32) -> Leaf {
        Leaf::from_block(self.nodes.block(idx))
    }

    /// Node index of the leaf responsible for `key`.
    #[inline]
    pub fn leaf_index(&self, key: f64) -> u32 {
        let mut idx = self.root.predict(key) as u32;
        loop {
            let b = self.nodes.block(idx);
            if b.tag() >= NodeType::ArrayLeaf.tag() {
                return idx;
            }
            idx = b.start() + predict_block(b, key) as u32;
        }
    }

    #[inline]
    pub fn find(&self, key: f64) -> Result<f64> {
        let leaf = self.leaf_at(self.leaf_index(key));
        match leaf.find(&self.data, key) {
            Some(slot) => Ok(self.data.entry(slot).value),
            None => Err(Error::NotFound),
        }
    }

    /// Like `find`, also reporting the leaf search counters.
    pub fn find_traced(&self, key: f64, trace: &mut SearchTrace) -> Result<f64> {
        let leaf = self.leaf_at(self.leaf_index(key));
        match leaf.find_traced(&self.data, key, trace) {
            Some(slot) => Ok(self.data.entry(slot).value),
            None => Err(Error::NotFound),
        }
    }

    pub fn insert(&mut self, key: f64, value: f64) -> Result<()> {
        if !key.is_finite() {
            return Err(Error::NonFiniteKey(key));
        }
        let e = Entry::new(key, value);
        if self.config.external {
            return self.insert_external(e);
        }
        let idx = self.leaf_index(key);
        let mut leaf = self.leaf_at(idx);
        let max = self.config.max_capacity;
        let res = match leaf.kind {
            LeafKind::Gapped => leaf.insert_gapped(&mut self.data, e, max).map(|_| ()),
            _ => match leaf.insert_array(&mut self.data, e) {
                Err(Error::LeafFull) => leaf
                    .grow_array(&mut self.data, max)
                    .and_then(|_| leaf.insert_array(&mut self.data, e).map(|_| ())),
                r => r.map(|_| ()),
            },
        };
        match res {
            Err(Error::AtMaxCapacity) => self.split_leaf(idx, leaf, Some(e)),
            r => {
                self.nodes.set(idx, &leaf.to_record())?;
                r?;
                self.len += 1;
                Ok(())
            }
        }
    }

    fn insert_external(&mut self, e: Entry) -> Result<()> {
        let idx = self.leaf_index(e.key);
        let mut leaf = self.leaf_at(idx);
        if e.key <= self.max_key {
            // Only a lazily deleted key may come back out of order.
            let loc = leaf.locate(&self.data, e.key, &mut SearchTrace::default());
            if let (Some(r), true) = (loc.slot, loc.exact) {
                let slot = leaf.start as usize + r;
                if !self.data.is_tombstone(slot) {
                    return Err(Error::DuplicateKey(e.key));
                }
                self.data.write(slot, e);
                leaf.live += 1;
                self.nodes.set(idx, &leaf.to_record())?;
                self.len += 1;
                return Ok(());
            }
            return Err(Error::OutOfOrderInsert(e.key));
        }
        if leaf.size == 0 {
            leaf.start = self.data.len() as u32;
        }
        debug_assert_eq!((leaf.start + leaf.size) as usize, self.data.len());
        self.data.push(e);
        leaf.size += 1;
        leaf.capacity += 1;
        leaf.live += 1;
        self.max_key = e.key;
        if leaf.size as usize > self.config.max_capacity {
            self.split_leaf(idx, leaf, None)?;
            self.len += 1;
            return Ok(());
        }
        self.nodes.set(idx, &leaf.to_record())?;
        self.len += 1;
        Ok(())
    }

    /// Replaces an overfull leaf by a subtree chosen from its own keys.
    fn split_leaf(&mut self, idx: u32, leaf: Leaf, extra: Option<Entry>) -> Result<()> {
        let (entries, ext_base) = if leaf.kind == LeafKind::External {
            // External slots cannot move, tombstones included.
            let s = leaf.start as usize;
            let all: Vec<Entry> = (s..s + leaf.size as usize).map(|i| *self.data.entry(i)).collect();
            (all, leaf.start)
        } else {
            let mut live = leaf.live_entries(&self.data);
            if let Some(e) = extra {
                let at = live.partition_point(|x| x.key < e.key);
                live.insert(at, e);
            }
            if leaf.capacity > 0 {
                self.data.release(leaf.start, leaf.capacity);
            }
            (live, 0)
        };
        let keys: Vec<f64> = entries.iter().map(|e| e.key).collect();
        let training = TrainingWorkload::uniform_reads(keys.len());
        let builder = Builder::new(&keys, &training, &self.config)?.with_mass(self.len.max(keys.len()));
        let sub = builder.local_subtree(0, keys.len(), leaf.kind)?;
        let mut leaves = Vec::new();
        self.place(&sub, idx, &entries, ext_base, &mut leaves)?;
        if leaf.kind == LeafKind::External {
            for (_, l) in leaves.iter_mut() {
                let s = l.start as usize;
                l.live = (s..s + l.size as usize).filter(|&i| !self.data.is_tombstone(i)).count() as u32;
            }
        } else if extra.is_some() {
            self.len += 1;
        }
        self.link(leaves, leaf.prev, leaf.next)
    }

    pub fn update(&mut self, key: f64, value: f64) -> Result<()> {
        let leaf = self.leaf_at(self.leaf_index(key));
        leaf.update(&mut self.data, key, value)
    }

    pub fn delete(&mut self, key: f64) -> Result<()> {
        let idx = self.leaf_index(key);
        let mut leaf = self.leaf_at(idx);
        leaf.delete(&mut self.data, key)?;
        self.nodes.set(idx, &leaf.to_record())?;
        self.len -= 1;
        Ok(())
    }

    /// Up to `len` live entries with key >= `start`, ascending.
    pub fn range_scan(&self, start: f64, len: usize) -> Vec<Entry> {
        let mut out = Vec::with_capacity(len.min(4096));
        if len == 0 || start.is_nan() {
            return out;
        }
        let leaf = self.leaf_at(self.leaf_index(start));
        leaf.scan_into(&self.data, Some(start), len, &mut out);
        let mut next = leaf.next;
        while out.len() < len && next != NO_LEAF {
            let l = self.leaf_at(next);
            l.scan_into(&self.data, None, len, &mut out);
            next = l.next;
        }
        out
    }

    /// Every live entry in key order.
    pub fn entries(&self) -> Vec<Entry> {
        let mut out = Vec::with_capacity(self.len);
        let mut next = self.first_leaf;
        while next != NO_LEAF {
            let l = self.leaf_at(next);
            l.scan_into(&self.data, None, usize::MAX, &mut out);
            next = l.next;
        }
        out
    }

    /// Leaves in key order with their node indices.
    pub fn leaves(&self) -> Vec<(u32, Leaf)> {
        let mut out = Vec::new();
        let mut next = self.first_leaf;
        while next != NO_LEAF {
            let l = self.leaf_at(next);
            out.push((next, l));
            next = l.next;
        }
        out
    }

    pub fn stats(&self) -> IndexStats {
        let mut counts = [0usize; 7];
        let mut depth = 1;
        let mut space = self.root.space_bytes() as f64;
        fn walk(ix: &Index, idx: u32, level: usize, counts: &mut [usize; 7], depth: &mut usize, space: &mut f64) -> TreeShape {
            let rec = ix.nodes.get(idx);
            counts[rec.node_type.tag() as usize - 1] += 1;
            *depth = (*depth).max(level);
            if rec.node_type.is_leaf() {
                let leaf = Leaf::from_record(&rec).expect("leaf tag");
                *space += ix.config.costs.scost_leaf(leaf.capacity as usize);
                TreeShape::Leaf(leaf.live as usize)
            } else {
                *space += ix.config.costs.node_bytes;
                TreeShape::Inner(
                    (0..rec.count)
                        .map(|j| walk(ix, rec.start + j, level + 1, counts, depth, space))
                        .collect(),
                )
            }
        }
        let shape = TreeShape::Inner(
            (0..self.root.fanout() as u32)
                .map(|j| walk(self, j, 2, &mut counts, &mut depth, &mut space))
                .collect(),
        );
        IndexStats {
            counts,
            depth,
            space_bytes: space,
            weighted_entropy: weighted_entropy_sum(&shape),
            len: self.len,
        }
    }
}

//! Leaf nodes: plain arrays, gapped arrays and leaves over an external array.
//!
//! A leaf owns slots `[start, start + capacity)` of a data array. Its record
//! params hold (all little-endian):
//!
//! | bytes  | field                                   |
//! |--------|-----------------------------------------|
//! | 0..8   | slope (f64)                             |
//! | 8..16  | intercept (f64)                         |
//! | 16..20 | error bound epsilon (u32)               |
//! | 20..24 | occupied slots incl. tombstones (u32)   |
//! | 24..28 | live entries (u32)                      |
//! | 28..32 | previous leaf in key order (u32)        |
//! | 32..36 | next leaf in key order (u32)            |

use crate::data::{DataArray, Entry};
use crate::error::{Error, Result};
use crate::node::{get_f64, get_u32, put_f64, put_u32, NodeBlock, NodeRecord, NodeType, PARAM_BYTES};

pub const DEFAULT_MAX_CAPACITY: usize = 4096;
/// Gap density a gapped leaf is built or re-spread to.
pub const DEFAULT_GAP_DENSITY: f64 = 1.0 / 3.0;
/// Fill ratio that triggers expansion of a gapped leaf.
pub const DENSITY_UPPER: f64 = 0.8;
/// Marks a missing neighbour in the leaf chain.
pub const NO_LEAF: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LeafKind {
    Array,
    Gapped,
    External,
}

impl LeafKind {
    pub fn node_type(self) -> NodeType {
        match self {
            LeafKind::Array => NodeType::ArrayLeaf,
            LeafKind::Gapped => NodeType::GappedLeaf,
            LeafKind::External => NodeType::ExternalLeaf,
        }
    }

    pub fn from_node_type(t: NodeType) -> Option<Self> {
        match t {
            NodeType::ArrayLeaf => Some(LeafKind::Array),
            NodeType::GappedLeaf => Some(LeafKind::Gapped),
            NodeType::ExternalLeaf => Some(LeafKind::External),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        self.node_type().name()
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "array" => Some(LeafKind::Array),
            "gapped" => Some(LeafKind::Gapped),
            "external" => Some(LeafKind::External),
            _ => None,
        }
    }
}

/// Linear key -> slot model with a search window of `epsilon` slots.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LeafModel {
    pub slope: f64,
    pub intercept: f64,
    pub epsilon: u32,
}

impl LeafModel {
    /// Least-squares fit of `keys[i] -> pos(i)`.
    pub fn fit(keys: &[f64], pos: impl Fn(usize) -> usize) -> LeafModel {
        let n = keys.len();
        if n == 0 {
            return LeafModel::default();
        }
        let nf = n as f64;
        let mean_k = keys.iter().sum::<f64>() / nf;
        let mean_p = (0..n).map(|i| pos(i) as f64).sum::<f64>() / nf;
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for (i, &k) in keys.iter().enumerate() {
            let dk = k - mean_k;
            sxx += dk * dk;
            sxy += dk * (pos(i) as f64 - mean_p);
        }
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let intercept = mean_p - slope * mean_k;
        if slope.is_finite() && intercept.is_finite() {
            LeafModel {
                slope,
                intercept,
                epsilon: 0,
            }
        } else {
            LeafModel {
                slope: 0.0,
                intercept: mean_p,
                epsilon: 0,
            }
        }
    }

    /// Predicted slot in `[0, span)`; `span` must be positive.
    #[inline]
    pub fn predict(&self, key: f64, span: usize) -> usize {
        let y = self.slope * key + self.intercept;
        if y >= 0.5 {
            ((y + 0.5) as usize).min(span - 1)
        } else {
            0
        }
    }
}

#[inline]
fn floor_log2(x: u64) -> u64 {
    if x == 0 {
        0
    } else {
        63 - x.leading_zeros() as u64
    }
}

/// Error bound minimising the expected comparison count.
///
/// Cost of a candidate `e` is `hits * floor(log2 e) + misses * floor(log2 n)`,
/// where a residual hits when `|d| <= e / 2`, and `e` ranges over
/// `0..=max|d|`. Runs in O(len + max|d|).
pub fn optimal_epsilon(residuals: &[i64], n: usize) -> Result<u32> {
    if residuals.is_empty() || n == 0 {
        return Err(Error::EmptyInput);
    }
    let max_d = residuals.iter().map(|d| d.unsigned_abs()).max().unwrap() as usize;
    let mut hist = vec![0u64; max_d + 1];
    for d in residuals {
        hist[d.unsigned_abs() as usize] += 1;
    }
    // within[h] = number of residuals with |d| <= h
    let mut within = hist;
    for h in 1..within.len() {
        within[h] += within[h - 1];
    }
    let total = residuals.len() as u64;
    let miss_cost = floor_log2(n as u64);
    let mut best = (u64::MAX, 0u32);
    for e in 0..=max_d {
        let hits = within[(e / 2).min(max_d)];
        let cost = hits * floor_log2(e as u64) + (total - hits) * miss_cost;
        if cost < best.0 {
            best = (cost, e as u32);
        }
    }
    Ok(best.1)
}

/// Counters collected by one leaf search.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchTrace {
    /// Binary-search comparisons.
    pub probes: u32,
    /// Probes that landed on a gap and read its left neighbour.
    pub gap_probes: u32,
    pub window_hit: bool,
}

/// Slot index of the `i`-th of `n` entries spread over `capacity` slots.
#[inline]
pub fn spread_pos(i: usize, n: usize, capacity: usize) -> usize {
    ((i as u128 * capacity as u128) / n as u128) as usize
}

/// Capacity a gapped leaf of `n` entries is built with.
pub fn gapped_capacity(n: usize, density: f64, max_capacity: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let want = (n as f64 / (1.0 - density)).ceil() as usize;
    want.max(n + 1).min(2 * n).min(max_capacity.max(n))
}

/// A leaf design evaluated but not yet written to a data array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeafPlan {
    pub kind: LeafKind,
    pub size: usize,
    pub capacity: usize,
    pub model: LeafModel,
    /// Fraction of entries whose slot lies inside the search window.
    pub p_hit: f64,
}

impl LeafPlan {
    pub fn span(&self) -> usize {
        match self.kind {
            LeafKind::Gapped => self.capacity,
            _ => self.size,
        }
    }

    pub fn density(&self) -> f64 {
        if self.capacity == 0 {
            0.0
        } else {
            (self.capacity - self.size) as f64 / self.capacity as f64
        }
    }

    /// Fits the model and error bound for sorted `keys` laid out per `kind`.
    pub fn new(kind: LeafKind, keys: &[f64], capacity: usize) -> Result<LeafPlan> {
        let n = keys.len();
        if n > capacity {
            return Err(Error::CapacityExceeded { len: n, capacity });
        }
        if kind == LeafKind::Gapped && n > 0 && capacity > 2 * n {
            return Err(Error::InvalidConfig(format!(
                "gapped capacity {capacity} leaves adjacent gaps for {n} entries"
            )));
        }
        let span = if kind == LeafKind::Gapped { capacity } else { n };
        let pos = |i: usize| {
            if kind == LeafKind::Gapped {
                spread_pos(i, n, capacity)
            } else {
                i
            }
        };
        let mut model = LeafModel::fit(keys, pos);
        let mut p_hit = 1.0;
        if n > 0 {
            let residuals: Vec<i64> = keys
                .iter()
                .enumerate()
                .map(|(i, &k)| model.predict(k, span) as i64 - pos(i) as i64)
                .collect();
            model.epsilon = optimal_epsilon(&residuals, span)?;
            let h = (model.epsilon / 2) as u64;
            let hits = residuals.iter().filter(|d| d.unsigned_abs() <= h).count();
            p_hit = hits as f64 / n as f64;
        }
        Ok(LeafPlan {
            kind,
            size: n,
            capacity,
            model,
            p_hit,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leaf {
    pub kind: LeafKind,
    pub start: u32,
    /// Slots owned. For external leaves this equals `size`.
    pub capacity: u32,
    /// Occupied slots, tombstones included.
    pub size: u32,
    pub live: u32,
    pub model: LeafModel,
    pub prev: u32,
    pub next: u32,
}

/// Where a key sits in a leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Located {
    /// Last non-gap slot (relative) whose key is <= the probe key.
    pub slot: Option<usize>,
    /// Whether that slot holds the probe key itself.
    pub exact: bool,
}

impl Leaf {
    pub fn empty(kind: LeafKind, start: u32) -> Leaf {
        Leaf {
            kind,
            start,
            capacity: 0,
            size: 0,
            live: 0,
            model: LeafModel::default(),
            prev: NO_LEAF,
            next: NO_LEAF,
        }
    }

    pub fn to_record(&self) -> NodeRecord {
        let mut p = [0u8; PARAM_BYTES];
        put_f64(&mut p, 0, self.model.slope);
        put_f64(&mut p, 8, self.model.intercept);
        put_u32(&mut p, 16, self.model.epsilon);
        put_u32(&mut p, 20, self.size);
        put_u32(&mut p, 24, self.live);
        put_u32(&mut p, 28, self.prev);
        put_u32(&mut p, 32, self.next);
        NodeRecord::new(self.kind.node_type(), self.capacity, self.start, p)
    }

    pub fn from_record(rec: &NodeRecord) -> Result<Leaf> {
        let kind = LeafKind::from_node_type(rec.node_type).ok_or(Error::UnknownTag(rec.node_type.tag()))?;
        let p = &rec.params;
        Ok(Leaf {
            kind,
            start: rec.start,
            capacity: rec.count,
            size: get_u32(p, 20),
            live: get_u32(p, 24),
            model: LeafModel {
                slope: get_f64(p, 0),
                intercept: get_f64(p, 8),
                epsilon: get_u32(p, 16),
            },
            prev: get_u32(p, 28),
            next: get_u32(p, 32),
        })
    }

    /// Decodes a block already known to hold a leaf.
    #[inline]
    pub fn from_block(block: &NodeBlock) -> Leaf {
        let kind = match block.tag() {
            5 => LeafKind::Array,
            6 => LeafKind::Gapped,
            7 => LeafKind::External,
            t => unreachable!("tag {t} is not a leaf"),
        };
        let p = block.params();
        Leaf {
            kind,
            start: block.start(),
            capacity: block.count(),
            size: get_u32(p, 20),
            live: get_u32(p, 24),
            model: LeafModel {
                slope: get_f64(p, 0),
                intercept: get_f64(p, 8),
                epsilon: get_u32(p, 16),
            },
            prev: get_u32(p, 28),
            next: get_u32(p, 32),
        }
    }

    /// Slots covered by the search: the occupied prefix of an array, or the
    /// whole allocation of a gapped leaf.
    #[inline]
    pub fn span(&self) -> usize {
        match self.kind {
            LeafKind::Gapped => self.capacity as usize,
            _ => self.size as usize,
        }
    }

    pub fn density(&self) -> f64 {
        if self.capacity == 0 {
            0.0
        } else {
            (self.capacity - self.size) as f64 / self.capacity as f64
        }
    }

    /// Writes `entries` per `plan` into freshly allocated slots (or, for
    /// external leaves, adopts the slots starting at `external_start`).
    pub fn materialize(plan: &LeafPlan, data: &mut DataArray, entries: &[Entry], external_start: u32) -> Result<Leaf> {
        debug_assert_eq!(plan.size, entries.len());
        let start = match plan.kind {
            LeafKind::External => external_start,
            _ if plan.capacity == 0 => 0,
            _ => data.allocate(plan.capacity)?,
        };
        let leaf = Leaf {
            kind: plan.kind,
            start,
            capacity: plan.capacity as u32,
            size: plan.size as u32,
            live: plan.size as u32,
            model: plan.model,
            prev: NO_LEAF,
            next: NO_LEAF,
        };
        if plan.kind != LeafKind::External {
            leaf.write_entries(data, entries);
        }
        Ok(leaf)
    }

    fn write_entries(&self, data: &mut DataArray, entries: &[Entry]) {
        let base = self.start as usize;
        let n = entries.len();
        match self.kind {
            LeafKind::Gapped => {
                for i in 0..self.capacity as usize {
                    data.set_gap(base + i);
                }
                for (i, e) in entries.iter().enumerate() {
                    data.write(base + spread_pos(i, n, self.capacity as usize), *e);
                }
            }
            _ => {
                for (i, e) in entries.iter().enumerate() {
                    data.write(base + i, *e);
                }
                for i in n..self.capacity as usize {
                    data.set_gap(base + i);
                }
            }
        }
    }

    #[inline]
    fn eff_key(&self, data: &DataArray, r: usize, trace: &mut SearchTrace) -> f64 {
        let i = self.start as usize + r;
        let k = data.key(i);
        if k.is_nan() {
            trace.gap_probes += 1;
            data.key(i - 1)
        } else {
            k
        }
    }

    /// Last slot in `[base, base + size)` whose effective key is <= `key`,
    /// given that the first one qualifies.
    #[inline]
    fn last_le(&self, data: &DataArray, key: f64, mut base: usize, mut size: usize, trace: &mut SearchTrace) -> usize {
        while size > 1 {
            let half = size / 2;
            let mid = base + half;
            trace.probes += 1;
            if self.eff_key(data, mid, trace) <= key {
                base = mid;
            }
            size -= half;
        }
        base
    }

    /// Model-guided search: try the window around the prediction, fall back
    /// to the whole span when the key lies outside it.
    pub fn locate(&self, data: &DataArray, key: f64, trace: &mut SearchTrace) -> Located {
        let span = self.span();
        if span == 0 || self.size == 0 {
            return Located { slot: None, exact: false };
        }
        let base = self.start as usize;
        let p = self.model.predict(key, span);
        let h = (self.model.epsilon / 2) as usize;
        let mut lo = p.saturating_sub(h);
        let mut hi = (p + h).min(span - 1);
        if data.is_gap(base + lo) {
            lo += 1;
        }
        if hi > 0 && data.is_gap(base + hi) {
            hi -= 1;
        }
        let r = if lo <= hi && data.key(base + lo) <= key && key <= data.key(base + hi) {
            trace.window_hit = true;
            self.last_le(data, key, lo, hi - lo + 1, trace)
        } else {
            if key < data.key(base) {
                return Located { slot: None, exact: false };
            }
            self.last_le(data, key, 0, span, trace)
        };
        let r = if data.is_gap(base + r) { r - 1 } else { r };
        Located {
            slot: Some(r),
            exact: data.key(base + r) == key,
        }
    }

    /// Absolute slot of a live entry with `key`.
    #[inline]
    pub fn find(&self, data: &DataArray, key: f64) -> Option<usize> {
        self.find_traced(data, key, &mut SearchTrace::default())
    }

    pub fn find_traced(&self, data: &DataArray, key: f64, trace: &mut SearchTrace) -> Option<usize> {
        let loc = self.locate(data, key, trace);
        match loc.slot {
            Some(r) if loc.exact => {
                let abs = self.start as usize + r;
                (!data.is_tombstone(abs)).then_some(abs)
            }
            _ => None,
        }
    }

    /// Revives a tombstone holding `e.key`, if any. Errors on a live duplicate.
    fn try_revive(&mut self, data: &mut DataArray, loc: Located, e: Entry) -> Result<bool> {
        if let (Some(r), true) = (loc.slot, loc.exact) {
            let abs = self.start as usize + r;
            if !data.is_tombstone(abs) {
                return Err(Error::DuplicateKey(e.key));
            }
            data.write(abs, e);
            self.live += 1;
            return Ok(true);
        }
        Ok(false)
    }

    /// Inserts into an array leaf, shifting later entries right. Returns the
    /// number of entries moved.
    pub fn insert_array(&mut self, data: &mut DataArray, e: Entry) -> Result<usize> {
        let loc = self.locate(data, e.key, &mut SearchTrace::default());
        if self.try_revive(data, loc, e)? {
            return Ok(0);
        }
        if self.size >= self.capacity {
            return Err(Error::LeafFull);
        }
        let base = self.start as usize;
        let size = self.size as usize;
        let pos = loc.slot.map_or(0, |r| r + 1);
        data.shift_right(base + pos, base + size);
        data.write(base + pos, e);
        self.size += 1;
        self.live += 1;
        Ok(size - pos)
    }

    /// Inserts into a gapped leaf, expanding first when it is too dense.
    /// Returns the number of entries moved.
    pub fn insert_gapped(&mut self, data: &mut DataArray, e: Entry, max_capacity: usize) -> Result<usize> {
        if self.capacity == 0 || self.size as f64 >= DENSITY_UPPER * self.capacity as f64 {
            // A tombstone for this key would be purged by the re-spread, so
            // check for a live duplicate before reorganising.
            if self.find(data, e.key).is_some() {
                return Err(Error::DuplicateKey(e.key));
            }
            self.expand_gapped(data, max_capacity)?;
        }
        let loc = self.locate(data, e.key, &mut SearchTrace::default());
        if self.try_revive(data, loc, e)? {
            return Ok(0);
        }
        let base = self.start as usize;
        let cap = self.capacity as usize;
        let pos = loc.slot.map_or(0, |r| r + 1);
        let moves = if pos < cap && data.is_gap(base + pos) {
            data.write(base + pos, e);
            0
        } else if let Some(g) = (pos..cap).find(|&j| data.is_gap(base + j)) {
            data.shift_right(base + pos, base + g);
            data.write(base + pos, e);
            g - pos
        } else {
            let g = (0..pos).rev().find(|&j| data.is_gap(base + j)).ok_or(Error::LeafFull)?;
            data.shift_left(base + g + 1, base + pos);
            data.write(base + pos - 1, e);
            pos - 1 - g
        };
        self.size += 1;
        self.live += 1;
        Ok(moves)
    }

    /// Entries that are neither gaps nor tombstones, in key order.
    pub fn live_entries(&self, data: &DataArray) -> Vec<Entry> {
        let base = self.start as usize;
        (base..base + self.span())
            .filter(|&i| !data.is_gap(i) && !data.is_tombstone(i))
            .map(|i| *data.entry(i))
            .collect()
    }

    /// Lays `entries` out again with `capacity` slots, moving to a new block
    /// when the capacity changes.
    pub fn rebuild(&mut self, data: &mut DataArray, entries: &[Entry], capacity: usize) -> Result<()> {
        let keys: Vec<f64> = entries.iter().map(|e| e.key).collect();
        let plan = LeafPlan::new(self.kind, &keys, capacity)?;
        if capacity != self.capacity as usize || capacity == 0 {
            if self.capacity > 0 {
                data.release(self.start, self.capacity);
            }
            self.start = if capacity > 0 { data.allocate(capacity)? } else { 0 };
        }
        self.capacity = capacity as u32;
        self.size = entries.len() as u32;
        self.live = entries.len() as u32;
        self.model = plan.model;
        self.write_entries(data, entries);
        Ok(())
    }

    /// Re-spreads a dense gapped leaf, doubling its capacity when tombstone
    /// purging alone does not bring it under the density threshold.
    /// Capacity never exceeds twice the entry count so gaps stay isolated.
    pub fn expand_gapped(&mut self, data: &mut DataArray, max_capacity: usize) -> Result<()> {
        let live = self.live_entries(data);
        let n = live.len();
        let c = self.capacity as usize;
        let new_cap = if n == 0 {
            2.min(max_capacity)
        } else if (n as f64) < DENSITY_UPPER * c as f64 {
            c.min(2 * n)
        } else if c >= max_capacity {
            return Err(Error::AtMaxCapacity);
        } else {
            (2 * c).max(2).min(2 * n).min(max_capacity)
        };
        self.rebuild(data, &live, new_cap)
    }

    /// Makes room in a full array leaf: purge tombstones, else double the
    /// allocation up to `max_capacity`.
    pub fn grow_array(&mut self, data: &mut DataArray, max_capacity: usize) -> Result<()> {
        let live = self.live_entries(data);
        let n = live.len();
        let c = self.capacity as usize;
        let new_cap = if n < c {
            c
        } else if c >= max_capacity {
            return Err(Error::AtMaxCapacity);
        } else {
            (2 * c).max(1).min(max_capacity)
        };
        self.rebuild(data, &live, new_cap)
    }

    /// Tombstones a live key.
    pub fn delete(&mut self, data: &mut DataArray, key: f64) -> Result<()> {
        let slot = self.find(data, key).ok_or(Error::NotFound)?;
        data.set_tombstone(slot, true);
        self.live -= 1;
        Ok(())
    }

    pub fn update(&self, data: &mut DataArray, key: f64, value: f64) -> Result<()> {
        let slot = self.find(data, key).ok_or(Error::NotFound)?;
        data.set_value(slot, value);
        Ok(())
    }

    /// Appends live entries with key >= `from` (or all, when `None`) to `out`
    /// until it holds `len` entries.
    pub fn scan_into(&self, data: &DataArray, from: Option<f64>, len: usize, out: &mut Vec<Entry>) {
        let span = self.span();
        let first = match from {
            None => 0,
            Some(key) => {
                let loc = self.locate(data, key, &mut SearchTrace::default());
                match loc.slot {
                    None => 0,
                    Some(r) if loc.exact => r,
                    Some(r) => r + 1,
                }
            }
        };
        let base = self.start as usize;
        for i in base + first..base + span {
            if out.len() >= len {
                return;
            }
            if !data.is_gap(i) && !data.is_tombstone(i) {
                out.push(*data.entry(i));
            }
        }
    }
}

/// Builds an array leaf holding `entries` with room for `capacity` slots.
pub fn build_array_leaf(data: &mut DataArray, entries: &[Entry], capacity: usize, max_capacity: usize) -> Result<Leaf> {
    if entries.len() > max_capacity || capacity > max_capacity {
        return Err(Error::CapacityExceeded {
            len: entries.len().max(capacity),
            capacity: max_capacity,
        });
    }
    let keys: Vec<f64> = entries.iter().map(|e| e.key).collect();
    let plan = LeafPlan::new(LeafKind::Array, &keys, capacity)?;
    Leaf::materialize(&plan, data, entries, 0)
}

/// Builds a gapped leaf spreading `entries` evenly over `capacity` slots.
pub fn build_gapped_leaf(data: &mut DataArray, entries: &[Entry], capacity: usize) -> Result<Leaf> {
    let keys: Vec<f64> = entries.iter().map(|e| e.key).collect();
    let plan = LeafPlan::new(LeafKind::Gapped, &keys, capacity)?;
    Leaf::materialize(&plan, data, entries, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DataSlot;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent exhaustive scan using the averaged cost definition.
    fn epsilon_oracle(d: &[i64], n: usize) -> u32 {
        let lg = |x: f64| if x < 1.0 { 0.0 } else { x.log2().floor() };
        let max = d.iter().map(|x| x.abs()).max().unwrap();
        let mut best = (f64::INFINITY, 0);
        for e in 0..=max {
            let inside = d.iter().filter(|x| (x.abs() as f64) <= e as f64 / 2.0).count() as f64;
            let outside = d.len() as f64 - inside;
            let cost = (inside * lg(e as f64) + outside * lg(n as f64)) / n as f64;
            if cost < best.0 {
                best = (cost, e as u32);
            }
        }
        best.1
    }

    fn entries(keys: &[f64]) -> Vec<Entry> {
        keys.iter().map(|&k| Entry::new(k, k * 2.0)).collect()
    }

    fn random_keys(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let mut set = std::collections::BTreeSet::new();
        while set.len() < n {
            set.insert(rng.random_range(0u64..1_000_000));
        }
        set.into_iter().map(|k| k as f64).collect()
    }

    fn scan_keys(leaf: &Leaf, data: &DataArray) -> Vec<f64> {
        leaf.live_entries(data).iter().map(|e| e.key).collect()
    }

    fn assert_no_adjacent_gaps(leaf: &Leaf, data: &DataArray) {
        let base = leaf.start as usize;
        assert!(leaf.capacity == 0 || !data.is_gap(base));
        for i in 1..leaf.capacity as usize {
            assert!(!(data.is_gap(base + i) && data.is_gap(base + i - 1)), "adjacent gaps at {i}");
        }
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(optimal_epsilon(&[0, 0, 0, 0], 4).unwrap(), 0);
        assert_eq!(optimal_epsilon(&[0, 0, 0, 10], 4).unwrap(), epsilon_oracle(&[0, 0, 0, 10], 4));
        assert_eq!(optimal_epsilon(&[5, 5, 5, 5], 4).unwrap(), 0);
        assert_eq!(epsilon_oracle(&[5, 5, 5, 5], 4), 0);
        assert_eq!(optimal_epsilon(&[], 4), Err(Error::EmptyInput));
    }

    #[test]
    fn epsilon_matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let n = rng.random_range(1..=512);
            let spread = rng.random_range(0..=64i64);
            let d: Vec<i64> = (0..n).map(|_| rng.random_range(-spread..=spread)).collect();
            assert_eq!(optimal_epsilon(&d, n).unwrap(), epsilon_oracle(&d, n), "{d:?}");
        }
    }

    #[test]
    fn empty_array_leaf() {
        let mut data = DataArray::new();
        let leaf = build_array_leaf(&mut data, &[], 16, DEFAULT_MAX_CAPACITY).unwrap();
        assert_eq!(leaf.capacity, 16);
        assert_eq!(leaf.find(&data, 3.0), None);
    }

    #[test]
    fn three_key_array_leaf() {
        let mut data = DataArray::new();
        let leaf = build_array_leaf(&mut data, &entries(&[10.0, 20.0, 30.0]), 3, DEFAULT_MAX_CAPACITY).unwrap();
        // Direct fit: slope 0.1, intercept -1 maps 20 to slot 1 exactly.
        assert!((leaf.model.slope - 0.1).abs() < 1e-12);
        assert!((leaf.model.intercept + 1.0).abs() < 1e-12);
        assert_eq!(leaf.model.predict(20.0, 3), 1);
        assert_eq!(leaf.find(&data, 20.0), Some(leaf.start as usize + 1));
        assert_eq!(leaf.find(&data, 25.0), None);
    }

    #[test]
    fn oversized_array_leaf() {
        let keys: Vec<f64> = (0..4097).map(|i| i as f64).collect();
        let mut data = DataArray::new();
        assert!(matches!(
            build_array_leaf(&mut data, &entries(&keys), 4097, DEFAULT_MAX_CAPACITY),
            Err(Error::CapacityExceeded { .. })
        ));
    }

    #[test]
    fn gapped_layouts() {
        let mut data = DataArray::new();
        let leaf = build_gapped_leaf(&mut data, &entries(&[1.0, 2.0, 3.0, 4.0]), 8).unwrap();
        let gaps: Vec<bool> = (0..8).map(|i| data.is_gap(leaf.start as usize + i)).collect();
        assert_eq!(gaps, [false, true, false, true, false, true, false, true]);

        let keys = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let leaf = build_gapped_leaf(&mut data, &entries(&keys), 8).unwrap();
        let n_gaps = (0..8).filter(|&i| data.is_gap(leaf.start as usize + i)).count();
        assert_eq!(n_gaps, 2);
        assert_no_adjacent_gaps(&leaf, &data);
        assert_eq!(scan_keys(&leaf, &data), keys);
    }

    #[test]
    fn perfect_model_hits_predicted_slot() {
        let keys: Vec<f64> = (0..100).map(|i| i as f64 * 3.0).collect();
        let mut data = DataArray::new();
        let leaf = build_array_leaf(&mut data, &entries(&keys), 100, DEFAULT_MAX_CAPACITY).unwrap();
        assert_eq!(leaf.model.epsilon, 0);
        let mut t = SearchTrace::default();
        assert_eq!(leaf.find_traced(&data, 51.0, &mut t), Some(leaf.start as usize + 17));
        assert!(t.window_hit);
        assert_eq!(t.probes, 0);
        assert_eq!(leaf.find(&data, 52.0), None);
    }

    #[test]
    fn find_agrees_with_linear_scan_on_random_leaves() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut data = DataArray::new();
        for round in 0..10_000 {
            let n = rng.random_range(1..64);
            let mut keys = random_keys(&mut rng, n);
            // Skew some leaves so the model misses and the fallback runs.
            if round % 3 == 0 {
                keys.iter_mut().for_each(|k| *k = (*k / 1e5).exp());
            }
            let gapped = round % 2 == 0;
            let leaf = if gapped {
                let cap = gapped_capacity(n, DEFAULT_GAP_DENSITY, DEFAULT_MAX_CAPACITY);
                build_gapped_leaf(&mut data, &entries(&keys), cap).unwrap()
            } else {
                build_array_leaf(&mut data, &entries(&keys), n, DEFAULT_MAX_CAPACITY).unwrap()
            };
            let base = leaf.start as usize;
            let oracle = |k: f64| (base..base + leaf.span()).find(|&i| data.key(i) == k);
            for &k in &keys {
                assert_eq!(leaf.find(&data, k), oracle(k));
            }
            for _ in 0..4 {
                let probe = rng.random_range(-10.0..1.1e6);
                assert_eq!(leaf.find(&data, probe), oracle(probe));
            }
        }
    }

    #[test]
    fn window_hits_match_build_time_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for gapped in [false, true] {
            for _ in 0..200 {
                let n = rng.random_range(1..400);
                let keys: Vec<f64> = random_keys(&mut rng, n).iter().map(|k| k.sqrt()).collect();
                let mut data = DataArray::new();
                let cap = if gapped { gapped_capacity(n, DEFAULT_GAP_DENSITY, 4096) } else { n };
                let kind = if gapped { LeafKind::Gapped } else { LeafKind::Array };
                let plan = LeafPlan::new(kind, &keys, cap).unwrap();
                let leaf = Leaf::materialize(&plan, &mut data, &entries(&keys), 0).unwrap();
                let hits = keys
                    .iter()
                    .filter(|&&k| {
                        let mut t = SearchTrace::default();
                        assert!(leaf.find_traced(&data, k, &mut t).is_some());
                        t.window_hit
                    })
                    .count();
                assert_eq!(hits as f64 / n as f64, plan.p_hit);
            }
        }
    }

    #[test]
    fn array_insert_moves() {
        let keys: Vec<f64> = (1..=10).map(|i| i as f64 * 10.0).collect();
        let mut data = DataArray::new();
        let mut leaf = build_array_leaf(&mut data, &entries(&keys), 12, DEFAULT_MAX_CAPACITY).unwrap();
        assert_eq!(leaf.insert_array(&mut data, Entry::new(1000.0, 0.0)).unwrap(), 0);
        assert_eq!(leaf.insert_array(&mut data, Entry::new(1.0, 0.0)).unwrap(), 11);
        assert_eq!(leaf.insert_array(&mut data, Entry::new(2.0, 0.0)), Err(Error::LeafFull));
        assert_eq!(leaf.insert_array(&mut data, Entry::new(50.0, 0.0)), Err(Error::DuplicateKey(50.0)));
        let mut want = keys.clone();
        want.insert(0, 1.0);
        want.push(1000.0);
        assert_eq!(scan_keys(&leaf, &data), want);
    }

    #[test]
    fn array_insert_mean_moves_is_half_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 1000;
        let keys: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut data = DataArray::new();
        let mut leaf = build_array_leaf(&mut data, &entries(&keys), n + 1, DEFAULT_MAX_CAPACITY).unwrap();
        let trials = 10_000;
        let mut total = 0usize;
        for _ in 0..trials {
            let k = rng.random_range(0.0..n as f64);
            let k = if k.fract() == 0.0 { k + 0.5 } else { k };
            total += leaf.insert_array(&mut data, Entry::new(k, 0.0)).unwrap();
            leaf.delete(&mut data, k).unwrap();
            // Drop the tombstone so the leaf returns to n entries.
            let live = leaf.live_entries(&data);
            leaf.rebuild(&mut data, &live, n + 1).unwrap();
        }
        let mean = total as f64 / trials as f64;
        assert!((mean - n as f64 / 2.0).abs() <= 0.1 * n as f64 / 2.0, "mean {mean}");
    }

    #[test]
    fn gapped_mean_moves_track_density_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let keys: Vec<f64> = (0..2000).map(|i| i as f64 * 100.0).collect();
        let mut data = DataArray::new();
        let mut leaf = build_gapped_leaf(&mut data, &entries(&keys), 4000).unwrap();
        // Random fill to d = 0.25 so gaps are no longer evenly spaced.
        while leaf.size < 3000 {
            let k = rng.random_range(0.0..200_000.0);
            let _ = leaf.insert_gapped(&mut data, Entry::new(k, 0.0), 4096);
        }
        let d = leaf.density();
        let trials = 10_000;
        let mut total = 0usize;
        for _ in 0..trials {
            let (mut l, mut dd) = (leaf, data.clone());
            let k = rng.random_range(0.0..200_000.0);
            total += l.insert_gapped(&mut dd, Entry::new(k, 0.0), 4096).unwrap_or(0);
        }
        let mean = total as f64 / trials as f64;
        let want = (1.0 - d) / (2.0 * d);
        assert!(mean <= 2.0 * want && mean >= want / 2.0, "mean {mean} want {want}");
    }

    #[test]
    fn gapped_insert_into_gap_is_free() {
        let mut data = DataArray::new();
        let mut leaf = build_gapped_leaf(&mut data, &entries(&[10.0, 20.0, 30.0, 40.0]), 8).unwrap();
        // Slot 1 is a gap right after 10.
        assert_eq!(leaf.insert_gapped(&mut data, Entry::new(15.0, 0.0), 4096).unwrap(), 0);
        // 15 and 20 shift right into the gap at slot 3.
        assert_eq!(leaf.insert_gapped(&mut data, Entry::new(12.0, 0.0), 4096).unwrap(), 2);
        assert_eq!(scan_keys(&leaf, &data), [10.0, 12.0, 15.0, 20.0, 30.0, 40.0]);
    }

    #[test]
    fn gapped_sequence_stays_retrievable() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut data = DataArray::new();
        let mut leaf = build_gapped_leaf(&mut data, &[], 0).unwrap();
        let mut oracle = std::collections::BTreeSet::new();
        for _ in 0..1000 {
            let k = rng.random_range(0u32..1_000_000) as f64;
            if oracle.insert(k as u64) {
                leaf.insert_gapped(&mut data, Entry::new(k, -k), 4096).unwrap();
            }
        }
        let want: Vec<f64> = oracle.iter().map(|&k| k as f64).collect();
        assert_eq!(scan_keys(&leaf, &data), want);
        for &k in &want {
            let slot = leaf.find(&data, k).unwrap();
            assert_eq!(data.entry(slot).value, -k);
        }
    }

    #[test]
    fn expansion_doubles_and_keeps_keys() {
        let keys: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let mut data = DataArray::new();
        // 8 entries at capacity 10 is past the 0.8 threshold.
        let mut leaf = build_gapped_leaf(&mut data, &entries(&keys), 10).unwrap();
        leaf.expand_gapped(&mut data, 4096).unwrap();
        assert_eq!(leaf.capacity, 16);
        assert_no_adjacent_gaps(&leaf, &data);
        for &k in &keys {
            assert!(leaf.find(&data, k).is_some());
        }
        let keys: Vec<f64> = (0..4000).map(|i| i as f64).collect();
        let mut full = build_gapped_leaf(&mut data, &entries(&keys), 4096).unwrap();
        assert_eq!(full.expand_gapped(&mut data, 4096), Err(Error::AtMaxCapacity));
    }

    #[test]
    fn delete_and_revive() {
        let mut data = DataArray::new();
        let mut leaf = build_gapped_leaf(&mut data, &entries(&[1.0, 2.0, 3.0]), 5).unwrap();
        leaf.delete(&mut data, 2.0).unwrap();
        assert_eq!(leaf.find(&data, 2.0), None);
        assert_eq!(leaf.delete(&mut data, 2.0), Err(Error::NotFound));
        assert_eq!(leaf.delete(&mut data, 9.0), Err(Error::NotFound));
        let slot = (0..5).find(|&i| data.slot(leaf.start as usize + i) == DataSlot::Tombstone(Entry::new(2.0, 4.0)));
        assert!(slot.is_some());
        leaf.insert_gapped(&mut data, Entry::new(2.0, 7.0), 4096).unwrap();
        let s = leaf.find(&data, 2.0).unwrap();
        assert_eq!(data.entry(s).value, 7.0);
        assert_eq!(leaf.live, 3);
    }

    #[test]
    fn record_round_trip() {
        let leaf = Leaf {
            kind: LeafKind::Gapped,
            start: 77,
            capacity: 300,
            size: 200,
            live: 190,
            model: LeafModel {
                slope: 0.25,
                intercept: -3.5,
                epsilon: 9,
            },
            prev: 4,
            next: NO_LEAF,
        };
        let rec = leaf.to_record();
        assert_eq!(Leaf::from_record(&rec).unwrap(), leaf);
        let block = crate::node::encode_node(&rec).unwrap();
        assert_eq!(Leaf::from_block(&block), leaf);
    }

    fn ceil_log2(x: usize) -> f64 {
        (x.max(1) as f64).log2().ceil()
    }

    /// Mean comparisons over all stored keys against the read-cost formula.
    fn measured_vs_formula(kind: LeafKind, keys: &[f64]) -> (f64, f64) {
        let n = keys.len();
        let cap = if kind == LeafKind::Gapped {
            gapped_capacity(n, DEFAULT_GAP_DENSITY, 4096)
        } else {
            n
        };
        let plan = LeafPlan::new(kind, keys, cap).unwrap();
        let mut data = DataArray::new();
        let leaf = Leaf::materialize(&plan, &mut data, &entries(keys), 0).unwrap();
        let mut total = 0u64;
        for &k in keys {
            let mut t = SearchTrace::default();
            leaf.find_traced(&data, k, &mut t).unwrap();
            total += (t.probes + t.gap_probes) as u64;
        }
        let eps = plan.model.epsilon as usize;
        let mut formula = plan.p_hit * ceil_log2(eps) + (1.0 - plan.p_hit) * ceil_log2(plan.span());
        if kind == LeafKind::Gapped {
            formula *= 1.0 + plan.density();
        }
        (total as f64 / n as f64, formula)
    }

    #[test]
    fn comparison_counts_track_read_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for round in 0..40 {
            let n = rng.random_range(200..4000);
            let keys: Vec<f64> = random_keys(&mut rng, n).iter().map(|k| (k / 2e5).exp()).collect();
            let (m, f) = measured_vs_formula(LeafKind::Array, &keys);
            assert!((m - f).abs() <= 1.0, "round {round} array n={n}: measured {m} formula {f}");
            let (m, f) = measured_vs_formula(LeafKind::Gapped, &keys);
            assert!(
                (m - f).abs() <= 0.2 * f.max(1.0),
                "round {round} gapped n={n}: measured {m} formula {f}"
            );
        }
    }

    proptest! {
        #[test]
        fn gapped_layout_invariants(keys in proptest::collection::btree_set(0u32..100_000, 1..300), extra in 0usize..100) {
            let keys: Vec<f64> = keys.into_iter().map(|k| k as f64).collect();
            let n = keys.len();
            let cap = (n + 1 + extra).min(2 * n).max(n);
            let mut data = DataArray::new();
            let leaf = build_gapped_leaf(&mut data, &entries(&keys), cap).unwrap();
            assert_no_adjacent_gaps(&leaf, &data);
            prop_assert_eq!(scan_keys(&leaf, &data), keys);
        }
    }
}

//! In-memory B+-tree baseline with fixed-size, cache-line aligned nodes.
//!
//! Every node occupies `node_bytes / 8` consecutive 64-bit words. Word 0 is
//! the header: the entry count in the low 32 bits and, for leaves, the next
//! leaf id in the high 32 bits. Leaves then hold `leaf_cap` keys followed by
//! `leaf_cap` values; inner nodes hold `inner_cap` separator keys followed by
//! `inner_cap + 1` child ids packed two per word.

use carmi_core::Entry;

use crate::error::{BenchError, BenchResultT};

pub const DEFAULT_NODE_BYTES: usize = 256;
const NONE: u32 = u32::MAX;

#[repr(C, align(64))]
#[derive(Clone, Copy, Default)]
struct Line([u64; 8]);

#[derive(Clone)]
pub struct BTree {
    lines: Vec<Line>,
    words: usize,
    leaf_cap: usize,
    inner_cap: usize,
    root: u32,
    /// Levels including the leaf level.
    height: usize,
    len: usize,
    nodes: usize,
    inner_nodes: usize,
    first_leaf: u32,
}

impl std::fmt::Debug for BTree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BTree")
            .field("node_bytes", &(self.words * 8))
            .field("len", &self.len)
            .field("height", &self.height)
            .field("nodes", &self.nodes)
            .finish()
    }
}

impl BTree {
    pub fn new() -> Self {
        Self::with_node_bytes(DEFAULT_NODE_BYTES).expect("default node size is valid")
    }

    /// `node_bytes` must be a multiple of 64 of at least 128.
    pub fn with_node_bytes(node_bytes: usize) -> BenchResultT<Self> {
        if node_bytes < 128 || node_bytes % 64 != 0 {
            return Err(BenchError::Usage(format!("node size {node_bytes} is not a multiple of 64 >= 128")));
        }
        let words = node_bytes / 8;
        let leaf_cap = (words - 1) / 2;
        // 1 + k + ceil((k + 1) / 2) <= words
        let mut inner_cap: usize = 1;
        while 1 + (inner_cap + 1) + (inner_cap + 2).div_ceil(2) <= words {
            inner_cap += 1;
        }
        let mut t = BTree {
            lines: Vec::new(),
            words,
            leaf_cap,
            inner_cap,
            root: 0,
            height: 1,
            len: 0,
            nodes: 0,
            inner_nodes: 0,
            first_leaf: 0,
        };
        t.root = t.alloc(false);
        t.set_next(t.root, NONE);
        Ok(t)
    }

    /// Packs sorted distinct keys into full leaves, as a bulk load does.
    pub fn bulk_load(keys: &[f64], values: &[f64], node_bytes: usize) -> BenchResultT<Self> {
        let mut t = Self::with_node_bytes(node_bytes)?;
        if keys.len() != values.len() {
            return Err(BenchError::Usage("keys and values differ in length".into()));
        }
        if keys.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) || keys.iter().any(|k| !k.is_finite()) {
            return Err(BenchError::Usage("bulk load needs sorted, distinct, finite keys".into()));
        }
        if keys.is_empty() {
            return Ok(t);
        }
        t.lines.clear();
        t.nodes = 0;
        let n = keys.len();
        let leaves = n.div_ceil(t.leaf_cap);
        let mut level: Vec<(u32, f64)> = Vec::with_capacity(leaves);
        for j in 0..leaves {
            let (lo, hi) = (j * n / leaves, (j + 1) * n / leaves);
            let id = t.alloc(false);
            for (s, i) in (lo..hi).enumerate() {
                t.set_key(id, s, keys[i]);
                t.set_leaf_val(id, s, values[i]);
            }
            t.set_count(id, hi - lo);
            t.set_next(id, NONE);
            if let Some(&(prev, _)) = level.last() {
                t.set_next(prev, id);
            }
            level.push((id, keys[lo]));
        }
        t.first_leaf = level[0].0;
        let mut height = 1;
        while level.len() > 1 {
            let fan = t.inner_cap + 1;
            let groups = level.len().div_ceil(fan);
            let mut up = Vec::with_capacity(groups);
            for g in 0..groups {
                let (lo, hi) = (g * level.len() / groups, (g + 1) * level.len() / groups);
                let id = t.alloc(true);
                for (s, &(child, min)) in level[lo..hi].iter().enumerate() {
                    t.set_child(id, s, child);
                    if s > 0 {
                        t.set_key(id, s - 1, min);
                    }
                }
                t.set_count(id, hi - lo - 1);
                up.push((id, level[lo].1));
            }
            level = up;
            height += 1;
        }
        t.root = level[0].0;
        t.height = height;
        t.len = n;
        Ok(t)
    }

    fn alloc(&mut self, inner: bool) -> u32 {
        let id = self.nodes as u32;
        self.lines.resize(self.lines.len() + self.words / 8, Line::default());
        self.nodes += 1;
        if inner {
            self.inner_nodes += 1;
        }
        id
    }

    #[inline]
    fn w(&self) -> &[u64] {
        // SAFETY: `Line` is a padding-free `repr(C)` wrapper around `[u64; 8]`,
        // so the vector's buffer is a valid run of `8 * len` words.
        unsafe { std::slice::from_raw_parts(self.lines.as_ptr().cast::<u64>(), self.lines.len() * 8) }
    }

    #[inline]
    fn w_mut(&mut self) -> &mut [u64] {
        // SAFETY: as in `w`, with exclusive access through `&mut self`.
        unsafe { std::slice::from_raw_parts_mut(self.lines.as_mut_ptr().cast::<u64>(), self.lines.len() * 8) }
    }

    #[inline]
    fn base(&self, id: u32) -> usize {
        id as usize * self.words
    }

    #[inline]
    fn count(&self, id: u32) -> usize {
        (self.w()[self.base(id)] & 0xffff_ffff) as usize
    }

    fn set_count(&mut self, id: u32, c: usize) {
        let b = self.base(id);
        let w = self.w_mut();
        w[b] = (w[b] & !0xffff_ffff) | c as u64;
    }

    #[inline]
    fn next(&self, id: u32) -> u32 {
        (self.w()[self.base(id)] >> 32) as u32
    }

    fn set_next(&mut self, id: u32, next: u32) {
        let b = self.base(id);
        let w = self.w_mut();
        w[b] = (w[b] & 0xffff_ffff) | ((next as u64) << 32);
    }

    #[inline]
    fn key(&self, id: u32, s: usize) -> f64 {
        f64::from_bits(self.w()[self.base(id) + 1 + s])
    }

    fn set_key(&mut self, id: u32, s: usize, k: f64) {
        let i = self.base(id) + 1 + s;
        self.w_mut()[i] = k.to_bits();
    }

    #[inline]
    fn leaf_val(&self, id: u32, s: usize) -> f64 {
        f64::from_bits(self.w()[self.base(id) + 1 + self.leaf_cap + s])
    }

    fn set_leaf_val(&mut self, id: u32, s: usize, v: f64) {
        let i = self.base(id) + 1 + self.leaf_cap + s;
        self.w_mut()[i] = v.to_bits();
    }

    #[inline]
    fn child(&self, id: u32, s: usize) -> u32 {
        let word = self.w()[self.base(id) + 1 + self.inner_cap + s / 2];
        (word >> (32 * (s % 2))) as u32
    }

    fn set_child(&mut self, id: u32, s: usize, c: u32) {
        let i = self.base(id) + 1 + self.inner_cap + s / 2;
        let shift = 32 * (s % 2);
        let w = self.w_mut();
        w[i] = (w[i] & !(0xffff_ffffu64 << shift)) | ((c as u64) << shift);
    }

    /// Number of keys `<= key`.
    #[inline]
    fn upper_bound(&self, id: u32, key: f64) -> usize {
        let (mut lo, mut hi) = (0, self.count(id));
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.key(id, mid) <= key {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Number of keys `< key` in a leaf.
    #[inline]
    fn lower_bound(&self, id: u32, key: f64) -> usize {
        let (mut lo, mut hi) = (0, self.count(id));
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.key(id, mid) < key {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    }

    #[inline]
    fn leaf_for(&self, key: f64) -> u32 {
        let mut id = self.root;
        for _ in 1..self.height {
            id = self.child(id, self.upper_bound(id, key));
        }
        id
    }

    fn leaf_slot(&self, key: f64) -> Option<(u32, usize)> {
        let id = self.leaf_for(key);
        let s = self.lower_bound(id, key);
        (s < self.count(id) && self.key(id, s) == key).then_some((id, s))
    }

    pub fn find(&self, key: f64) -> Option<f64> {
        self.leaf_slot(key).map(|(id, s)| self.leaf_val(id, s))
    }

    pub fn update(&mut self, key: f64, value: f64) -> bool {
        match self.leaf_slot(key) {
            Some((id, s)) => {
                self.set_leaf_val(id, s, value);
                true
            }
            None => false,
        }
    }

    /// Removes `key` from its leaf. Underfull leaves are not merged.
    pub fn delete(&mut self, key: f64) -> bool {
        let Some((id, s)) = self.leaf_slot(key) else {
            return false;
        };
        let c = self.count(id);
        for i in s..c - 1 {
            let (k, v) = (self.key(id, i + 1), self.leaf_val(id, i + 1));
            self.set_key(id, i, k);
            self.set_leaf_val(id, i, v);
        }
        self.set_count(id, c - 1);
        self.len -= 1;
        true
    }

    /// Returns false when `key` is already present or not finite.
    pub fn insert(&mut self, key: f64, value: f64) -> bool {
        if !key.is_finite() {
            return false;
        }
        let mut path = Vec::with_capacity(self.height);
        let mut id = self.root;
        for _ in 1..self.height {
            let s = self.upper_bound(id, key);
            path.push((id, s));
            id = self.child(id, s);
        }
        let s = self.lower_bound(id, key);
        let c = self.count(id);
        if s < c && self.key(id, s) == key {
            return false;
        }
        self.len += 1;
        if c < self.leaf_cap {
            self.leaf_insert_at(id, s, key, value);
            return true;
        }
        // Split the full leaf, then place the entry in the proper half.
        let right = self.alloc(false);
        let half = c / 2;
        for i in half..c {
            let (k, v) = (self.key(id, i), self.leaf_val(id, i));
            self.set_key(right, i - half, k);
            self.set_leaf_val(right, i - half, v);
        }
        self.set_count(right, c - half);
        self.set_count(id, half);
        let next = self.next(id);
        self.set_next(right, next);
        self.set_next(id, right);
        if s <= half {
            self.leaf_insert_at(id, s, key, value);
        } else {
            self.leaf_insert_at(right, s - half, key, value);
        }
        let sep = self.key(right, 0);
        self.insert_up(path, sep, right);
        true
    }

    fn leaf_insert_at(&mut self, id: u32, s: usize, key: f64, value: f64) {
        let c = self.count(id);
        for i in (s..c).rev() {
            let (k, v) = (self.key(id, i), self.leaf_val(id, i));
            self.set_key(id, i + 1, k);
            self.set_leaf_val(id, i + 1, v);
        }
        self.set_key(id, s, key);
        self.set_leaf_val(id, s, value);
        self.set_count(id, c + 1);
    }

    /// Adds separator `sep` with right child `right` up the recorded path.
    fn insert_up(&mut self, mut path: Vec<(u32, usize)>, mut sep: f64, mut right: u32) {
        while let Some((id, s)) = path.pop() {
            let c = self.count(id);
            if c < self.inner_cap {
                self.inner_insert_at(id, s, sep, right);
                return;
            }
            // Gather c + 1 keys and c + 2 children, then split around the middle key.
            let mut keys: Vec<f64> = (0..c).map(|i| self.key(id, i)).collect();
            let mut kids: Vec<u32> = (0..=c).map(|i| self.child(id, i)).collect();
            keys.insert(s, sep);
            kids.insert(s + 1, right);
            let mid = keys.len() / 2;
            let new = self.alloc(true);
            for (i, &k) in keys[..mid].iter().enumerate() {
                self.set_key(id, i, k);
            }
            for (i, &ch) in kids[..=mid].iter().enumerate() {
                self.set_child(id, i, ch);
            }
            self.set_count(id, mid);
            for (i, &k) in keys[mid + 1..].iter().enumerate() {
                self.set_key(new, i, k);
            }
            for (i, &ch) in kids[mid + 1..].iter().enumerate() {
                self.set_child(new, i, ch);
            }
            self.set_count(new, keys.len() - mid - 1);
            sep = keys[mid];
            right = new;
        }
        let root = self.alloc(true);
        self.set_child(root, 0, self.root);
        self.set_child(root, 1, right);
        self.set_key(root, 0, sep);
        self.set_count(root, 1);
        self.root = root;
        self.height += 1;
    }

    fn inner_insert_at(&mut self, id: u32, s: usize, sep: f64, right: u32) {
        let c = self.count(id);
        for i in (s..c).rev() {
            let k = self.key(id, i);
            self.set_key(id, i + 1, k);
        }
        for i in (s + 1..=c).rev() {
            let ch = self.child(id, i);
            self.set_child(id, i + 1, ch);
        }
        self.set_key(id, s, sep);
        self.set_child(id, s + 1, right);
        self.set_count(id, c + 1);
    }

    /// Up to `len` entries with key >= `start`.
    pub fn range_scan(&self, start: f64, len: usize) -> Vec<Entry> {
        let mut out = Vec::with_capacity(len.min(4096));
        if len == 0 || start.is_nan() {
            return out;
        }
        let mut id = self.leaf_for(start);
        let mut s = self.lower_bound(id, start);
        loop {
            let c = self.count(id);
            while s < c {
                if out.len() >= len {
                    return out;
                }
                out.push(Entry::new(self.key(id, s), self.leaf_val(id, s)));
                s += 1;
            }
            id = self.next(id);
            if id == NONE || out.len() >= len {
                return out;
            }
            s = 0;
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn node_bytes(&self) -> usize {
        self.words * 8
    }

    pub fn space_bytes(&self) -> usize {
        self.nodes * self.node_bytes()
    }

    pub fn inner_nodes(&self) -> usize {
        self.inner_nodes
    }

    pub fn leaf_nodes(&self) -> usize {
        self.nodes - self.inner_nodes
    }

    pub fn leaf_capacity(&self) -> usize {
        self.leaf_cap
    }

    pub fn inner_capacity(&self) -> usize {
        self.inner_cap
    }

    /// Checks ordering, separator bounds and uniform leaf depth.
    pub fn check(&self) -> BenchResultT<()> {
        let bad = |m: String| Err(BenchError::Mismatch(m));
        let mut leaf_depths = Vec::new();
        let mut stack = vec![(self.root, 1usize, f64::NEG_INFINITY, f64::INFINITY)];
        while let Some((id, depth, lo, hi)) = stack.pop() {
            let c = self.count(id);
            for i in 0..c {
                let k = self.key(id, i);
                if k < lo || k >= hi || (i > 0 && self.key(id, i - 1) >= k) {
                    return bad(format!("node {id} key {k} outside [{lo}, {hi})"));
                }
            }
            if depth == self.height {
                leaf_depths.push(depth);
            } else {
                for i in 0..=c {
                    let l = if i == 0 { lo } else { self.key(id, i - 1) };
                    let h = if i == c { hi } else { self.key(id, i) };
                    stack.push((self.child(id, i), depth + 1, l, h));
                }
            }
        }
        let mut n = 0;
        let mut id = self.first_leaf;
        while id != NONE {
            n += self.count(id);
            id = self.next(id);
        }
        if n != self.len {
            return bad(format!("leaf chain holds {n} keys, expected {}", self.len));
        }
        Ok(())
    }
}

impl Default for BTree {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    #[test]
    fn node_geometry() {
        let t = BTree::new();
        assert_eq!((t.node_bytes(), t.leaf_capacity(), t.inner_capacity()), (256, 15, 20));
        assert_eq!(std::mem::align_of::<Line>(), 64);
        assert!(BTree::with_node_bytes(100).is_err());
    }

    #[test]
    fn empty_tree() {
        let t = BTree::new();
        assert_eq!(t.find(1.0), None);
        assert!(t.range_scan(0.0, 10).is_empty());
        t.check().unwrap();
    }

    #[test]
    fn sequential_inserts_stay_balanced() {
        let mut t = BTree::new();
        let n = 100_000;
        for i in 0..n {
            assert!(t.insert(i as f64, -(i as f64)));
        }
        t.check().unwrap();
        let bound = (n as f64).log(t.inner_capacity() as f64 / 2.0).ceil() as usize + 1;
        assert!(t.height() <= bound, "height {} bound {bound}", t.height());
        assert_eq!(t.find(777.0), Some(-777.0));
        assert!(!t.insert(5.0, 0.0));
    }

    #[test]
    fn bulk_load_fills_leaves() {
        let keys: Vec<f64> = (0..10_000).map(|i| i as f64 * 3.0).collect();
        let t = BTree::bulk_load(&keys, &keys, 256).unwrap();
        t.check().unwrap();
        assert_eq!(t.leaf_nodes(), 10_000usize.div_ceil(15));
        assert!(keys.iter().all(|&k| t.find(k) == Some(k)));
        assert_eq!(t.find(1.0), None);
        assert!(BTree::bulk_load(&[2.0, 1.0], &[0.0, 0.0], 256).is_err());
    }

    #[test]
    fn oracle_equivalence() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let keys: Vec<f64> = (0..5000).map(|i| i as f64 * 4.0).collect();
        let mut t = BTree::bulk_load(&keys, &keys, 256).unwrap();
        let mut oracle: BTreeMap<u64, f64> = keys.iter().map(|&k| (k as u64, k)).collect();
        for step in 0..100_000 {
            let k = rng.random_range(0..40_000u64);
            let kf = k as f64;
            match rng.random_range(0..6) {
                0 | 1 => {
                    let fresh = !oracle.contains_key(&k);
                    if fresh {
                        oracle.insert(k, step as f64);
                    }
                    assert_eq!(t.insert(kf, step as f64), fresh);
                }
                2 => assert_eq!(t.find(kf), oracle.get(&k).copied()),
                3 => assert_eq!(t.delete(kf), oracle.remove(&k).is_some()),
                4 => assert_eq!(t.update(kf, 1.5), oracle.get_mut(&k).map(|v| *v = 1.5).is_some()),
                _ => {
                    let len = rng.random_range(1..40);
                    let got: Vec<(u64, f64)> = t.range_scan(kf, len).iter().map(|e| (e.key as u64, e.value)).collect();
                    let want: Vec<(u64, f64)> = oracle.range(k..).take(len).map(|(&a, &b)| (a, b)).collect();
                    assert_eq!(got, want);
                }
            }
        }
        t.check().unwrap();
        assert_eq!(t.len(), oracle.len());
    }
}

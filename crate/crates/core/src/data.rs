//! The data array: contiguous key-value slots owned in ranges by leaves.
//!
//! A gap is a slot whose key is NaN. Tombstones keep their entry in place
//! and are flagged in a side bitmap, so a slot stays 16 bytes wide.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[repr(C)]
pub struct Entry {
    pub key: f64,
    pub value: f64,
}

impl Entry {
    pub const GAP: Entry = Entry { key: f64::NAN, value: 0.0 };

    pub fn new(key: f64, value: f64) -> Self {
        Entry { key, value }
    }

    #[inline]
    pub fn is_gap(&self) -> bool {
        self.key.is_nan()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DataSlot {
    Occupied(Entry),
    Gap,
    Tombstone(Entry),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryKind {
    Read,
    Insert,
    Update,
    Delete,
    Scan,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Query {
    pub kind: QueryKind,
    pub key: f64,
    /// Payload for inserts and updates.
    pub value: f64,
    /// Number of entries requested by a scan; zero otherwise.
    pub scan_len: u32,
}

impl Query {
    pub fn read(key: f64) -> Self {
        Query {
            kind: QueryKind::Read,
            key,
            value: 0.0,
            scan_len: 0,
        }
    }

    pub fn insert(key: f64, value: f64) -> Self {
        Query {
            kind: QueryKind::Insert,
            key,
            value,
            scan_len: 0,
        }
    }

    pub fn update(key: f64, value: f64) -> Self {
        Query {
            kind: QueryKind::Update,
            key,
            value,
            scan_len: 0,
        }
    }

    pub fn delete(key: f64) -> Self {
        Query {
            kind: QueryKind::Delete,
            key,
            value: 0.0,
            scan_len: 0,
        }
    }

    pub fn scan(key: f64, len: u32) -> Self {
        Query {
            kind: QueryKind::Scan,
            key,
            value: 0.0,
            scan_len: len,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DataArray {
    slots: Vec<Entry>,
    tombs: Vec<u64>,
    n_tombs: usize,
    /// Released blocks as (start, len), sorted by start.
    free: Vec<(u32, u32)>,
}

impl DataArray {
    pub fn new() -> Self {
        Self::default()
    }

    /// Wraps a sorted run of entries, e.g. a caller-owned external array.
    pub fn from_entries(entries: Vec<Entry>) -> Self {
        let words = entries.len().div_ceil(64);
        DataArray {
            slots: entries,
            tombs: vec![0; words],
            n_tombs: 0,
            free: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Reserves `n` contiguous gap slots, reusing a freed block when one fits.
    pub fn allocate(&mut self, n: usize) -> Result<u32> {
        if n == 0 {
            return Err(Error::ZeroAllocation);
        }
        if let Some(pos) = self.free.iter().position(|&(_, len)| len as usize >= n) {
            let (start, len) = self.free[pos];
            if len as usize == n {
                self.free.remove(pos);
            } else {
                self.free[pos] = (start + n as u32, len - n as u32);
            }
            for i in start as usize..start as usize + n {
                self.slots[i] = Entry::GAP;
                self.set_tombstone(i, false);
            }
            return Ok(start);
        }
        let start = self.slots.len();
        if start + n > u32::MAX as usize {
            return Err(Error::CapacityExceeded {
                len: start + n,
                capacity: u32::MAX as usize,
            });
        }
        self.slots.resize(start + n, Entry::GAP);
        self.tombs.resize((start + n).div_ceil(64), 0);
        Ok(start as u32)
    }

    /// Returns a block to the free list. Its slots become gaps.
    pub fn release(&mut self, start: u32, len: u32) {
        if len == 0 {
            return;
        }
        for i in start as usize..(start + len) as usize {
            self.slots[i] = Entry::GAP;
            self.set_tombstone(i, false);
        }
        let at = self.free.partition_point(|&(s, _)| s < start);
        self.free.insert(at, (start, len));
        // Merge neighbours so large requests can reuse adjacent frees.
        let mut merged: Vec<(u32, u32)> = Vec::with_capacity(self.free.len());
        for &(s, l) in &self.free {
            if let Some(last) = merged.last_mut() {
                if last.0 + last.1 == s {
                    last.1 += l;
                    continue;
                }
            }
            merged.push((s, l));
        }
        self.free = merged;
    }

    pub fn free_slots(&self) -> usize {
        self.free.iter().map(|&(_, l)| l as usize).sum()
    }

    #[inline]
    pub fn entry(&self, i: usize) -> &Entry {
        &self.slots[i]
    }

    #[inline]
    pub fn key(&self, i: usize) -> f64 {
        self.slots[i].key
    }

    #[inline]
    pub fn is_gap(&self, i: usize) -> bool {
        self.slots[i].key.is_nan()
    }

    #[inline]
    pub fn is_tombstone(&self, i: usize) -> bool {
        self.n_tombs > 0 && (self.tombs[i >> 6] >> (i & 63)) & 1 == 1
    }

    pub fn has_tombstones(&self) -> bool {
        self.n_tombs > 0
    }

    pub fn slot(&self, i: usize) -> DataSlot {
        let e = self.slots[i];
        if e.is_gap() {
            DataSlot::Gap
        } else if self.is_tombstone(i) {
            DataSlot::Tombstone(e)
        } else {
            DataSlot::Occupied(e)
        }
    }

    pub fn set_tombstone(&mut self, i: usize, on: bool) {
        let word = &mut self.tombs[i >> 6];
        let bit = 1u64 << (i & 63);
        let was = *word & bit != 0;
        if on && !was {
            *word |= bit;
            self.n_tombs += 1;
        } else if !on && was {
            *word &= !bit;
            self.n_tombs -= 1;
        }
    }

    #[inline]
    pub fn write(&mut self, i: usize, e: Entry) {
        self.slots[i] = e;
        if self.n_tombs > 0 {
            self.set_tombstone(i, false);
        }
    }

    pub fn set_value(&mut self, i: usize, value: f64) {
        self.slots[i].value = value;
    }

    pub fn set_gap(&mut self, i: usize) {
        self.write(i, Entry::GAP);
    }

    /// Moves slots `[from, to)` one position right; slot `from` keeps its old content.
    pub fn shift_right(&mut self, from: usize, to: usize) {
        if from >= to {
            return;
        }
        self.slots.copy_within(from..to, from + 1);
        if self.n_tombs > 0 {
            for i in (from..to).rev() {
                let t = self.is_tombstone(i);
                self.set_tombstone(i + 1, t);
            }
        }
    }

    /// Moves slots `[from, to)` one position left; slot `to - 1` keeps its old content.
    pub fn shift_left(&mut self, from: usize, to: usize) {
        if from >= to {
            return;
        }
        self.slots.copy_within(from..to, from - 1);
        if self.n_tombs > 0 {
            for i in from..to {
                let t = self.is_tombstone(i);
                self.set_tombstone(i - 1, t);
            }
        }
    }

    /// Appends an entry at the end of the array (external mode).
    pub fn push(&mut self, e: Entry) {
        self.slots.push(e);
        if self.tombs.len() * 64 < self.slots.len() {
            self.tombs.push(0);
        }
    }

    pub fn entries(&self) -> &[Entry] {
        &self.slots
    }
}

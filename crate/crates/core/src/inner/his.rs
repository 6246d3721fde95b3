use super::{check_training, Branch};
use crate::error::{Error, Result};
use crate::node::{get_f64, get_u16, put_f64, put_u16, Params, PARAM_BYTES};

pub const HIS_BUCKETS: usize = 160;
pub const HIS_MAX_FANOUT: usize = 16;
const GROUP: usize = 16;
const GROUPS: usize = HIS_BUCKETS / GROUP;

#[inline]
fn bucket_of(key: f64, key_min: f64, inv_width: f64, buckets: usize) -> usize {
    let x = (key - key_min) * inv_width;
    if x > 0.0 {
        (x as usize).min(buckets - 1)
    } else {
        0
    }
}

fn inverse_width(keys: &[f64], buckets: usize) -> f64 {
    let range = keys[keys.len() - 1] - keys[0];
    if range > 0.0 && range.is_finite() {
        let inv = buckets as f64 / range;
        if inv.is_finite() {
            inv
        } else {
            0.0
        }
    } else {
        0.0
    }
}

/// Child of each bucket: the rank of the bucket's first key scaled to `c`,
/// with steps capped at one. A larger natural jump spills over into the
/// following buckets.
fn bucket_children(keys: &[f64], key_min: f64, inv_width: f64, buckets: usize, c: usize) -> Vec<u32> {
    let n = keys.len();
    let mut counts = vec![0usize; buckets];
    for &k in keys {
        counts[bucket_of(k, key_min, inv_width, buckets)] += 1;
    }
    let mut out = Vec::with_capacity(buckets);
    let mut before = 0usize;
    let mut prev = 0u32;
    for (b, &cnt) in counts.iter().enumerate() {
        let natural = ((before as u128 * c as u128) / n as u128).min(c as u128 - 1) as u32;
        let child = if b == 0 { 0 } else { natural.min(prev + 1).max(prev) };
        out.push(child);
        prev = child;
        before += cnt;
    }
    out
}

/// Packs a bucket->child table into a base value per group of 16 buckets
/// plus one bit per bucket marking a step of +1 over its predecessor.
fn encode_groups(children: &[u32]) -> (Vec<u32>, Vec<u16>) {
    let groups = children.len().div_ceil(GROUP);
    let mut base = Vec::with_capacity(groups);
    let mut offset = Vec::with_capacity(groups);
    for g in 0..groups {
        let lo = g * GROUP;
        let hi = (lo + GROUP).min(children.len());
        base.push(children[lo]);
        let mut bits = 0u16;
        for b in lo + 1..hi {
            if children[b] > children[b - 1] {
                bits |= 1 << (b - lo);
            }
        }
        offset.push(bits);
    }
    (base, offset)
}

#[inline]
fn lookup(base: u32, bits: u16, bucket_in_group: usize) -> u32 {
    let mask = ((2u32 << bucket_in_group) - 1) as u16;
    base + (bits & mask).count_ones()
}

/// Histogram model: 160 equal-width buckets, 10 `u16` bases and 10 `u16`
/// step bitmaps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HisModel {
    fanout: u32,
    key_min: f64,
    inv_width: f64,
    base: [u16; GROUPS],
    offset: [u16; GROUPS],
}

impl HisModel {
    pub fn train(keys: &[f64], c: usize) -> Result<Self> {
        if c > HIS_MAX_FANOUT {
            return Err(Error::FanoutTooLarge {
                fanout: c,
                max: HIS_MAX_FANOUT,
            });
        }
        check_training(keys, c)?;
        let key_min = keys[0];
        let inv_width = inverse_width(keys, HIS_BUCKETS);
        let children = bucket_children(keys, key_min, inv_width, HIS_BUCKETS, c);
        let (b, o) = encode_groups(&children);
        let mut m = HisModel {
            fanout: c as u32,
            key_min,
            inv_width,
            base: [0; GROUPS],
            offset: [0; GROUPS],
        };
        for g in 0..GROUPS {
            m.base[g] = b[g] as u16;
            m.offset[g] = o[g];
        }
        Ok(m)
    }

    pub fn tables(&self) -> ([u16; GROUPS], [u16; GROUPS]) {
        (self.base, self.offset)
    }

    /// Child index assigned to `bucket`, decoded from the tables.
    pub fn bucket_child(&self, bucket: usize) -> usize {
        let g = bucket / GROUP;
        lookup(self.base[g] as u32, self.offset[g], bucket % GROUP) as usize
    }

    pub fn bucket(&self, key: f64) -> usize {
        bucket_of(key, self.key_min, self.inv_width, HIS_BUCKETS)
    }

    pub fn encode(&self) -> Params {
        let mut p = [0u8; PARAM_BYTES];
        put_f64(&mut p, 0, self.key_min);
        put_f64(&mut p, 8, self.inv_width);
        for g in 0..GROUPS {
            put_u16(&mut p, 16 + 2 * g, self.base[g]);
            put_u16(&mut p, 36 + 2 * g, self.offset[g]);
        }
        p
    }

    pub fn decode(p: &Params, c: usize) -> Self {
        let mut m = HisModel {
            fanout: c as u32,
            key_min: get_f64(p, 0),
            inv_width: get_f64(p, 8),
            base: [0; GROUPS],
            offset: [0; GROUPS],
        };
        for g in 0..GROUPS {
            m.base[g] = get_u16(p, 16 + 2 * g);
            m.offset[g] = get_u16(p, 36 + 2 * g);
        }
        m
    }
}

impl Branch for HisModel {
    fn fanout(&self) -> usize {
        self.fanout as usize
    }

    #[inline]
    fn predict(&self, key: f64) -> usize {
        self.bucket_child(self.bucket(key)).min(self.fanout as usize - 1)
    }
}

#[inline]
pub(super) fn predict_params(p: &Params, c: usize, key: f64) -> usize {
    let b = bucket_of(key, get_f64(p, 0), get_f64(p, 8), HIS_BUCKETS);
    let g = b / GROUP;
    let child = lookup(get_u16(p, 16 + 2 * g) as u32, get_u16(p, 36 + 2 * g), b % GROUP);
    (child as usize).min(c - 1)
}

/// Histogram root with one bucket per child.
#[derive(Debug, Clone, PartialEq)]
pub struct HisRoot {
    fanout: usize,
    key_min: f64,
    inv_width: f64,
    base: Vec<u32>,
    offset: Vec<u16>,
}

impl HisRoot {
    pub fn train(keys: &[f64], c: usize) -> Result<Self> {
        check_training(keys, c)?;
        let key_min = keys[0];
        let inv_width = inverse_width(keys, c);
        let children = bucket_children(keys, key_min, inv_width, c, c);
        let (base, offset) = encode_groups(&children);
        Ok(HisRoot {
            fanout: c,
            key_min,
            inv_width,
            base,
            offset,
        })
    }
}

impl Branch for HisRoot {
    fn fanout(&self) -> usize {
        self.fanout
    }

    #[inline]
    fn predict(&self, key: f64) -> usize {
        let b = bucket_of(key, self.key_min, self.inv_width, self.fanout);
        let g = b / GROUP;
        (lookup(self.base[g], self.offset[g], b % GROUP) as usize).min(self.fanout - 1)
    }
}

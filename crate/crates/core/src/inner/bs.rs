use super::{boundary_rank, check_training, f32_down, Branch};
use crate::error::{Error, Result};
use crate::node::{get_f32, put_f32, Params, PARAM_BYTES};

pub const BS_MAX_FANOUT: usize = 15;
const SLOTS: usize = BS_MAX_FANOUT - 1;

/// Boundary of branch `b`: the key at its first rank, or +inf when the
/// branch is empty because there are fewer keys than branches.
fn boundary_key(keys: &[f64], b: usize, c: usize) -> f64 {
    let r = boundary_rank(b, keys.len(), c);
    if r < keys.len() {
        keys[r]
    } else {
        f64::INFINITY
    }
}

/// Binary search over up to 14 `f32` boundaries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsModel {
    fanout: u32,
    bounds: [f32; SLOTS],
}

impl BsModel {
    pub fn train(keys: &[f64], c: usize) -> Result<Self> {
        if c > BS_MAX_FANOUT {
            return Err(Error::FanoutTooLarge {
                fanout: c,
                max: BS_MAX_FANOUT,
            });
        }
        check_training(keys, c)?;
        let pad = f32_down(keys[keys.len() - 1]);
        let mut bounds = [pad; SLOTS];
        for b in 1..c {
            bounds[b - 1] = f32_down(boundary_key(keys, b, c));
        }
        Ok(BsModel { fanout: c as u32, bounds })
    }

    pub fn boundaries(&self) -> &[f32] {
        &self.bounds[..self.fanout as usize - 1]
    }

    pub fn encode(&self) -> Params {
        let mut p = [0u8; PARAM_BYTES];
        for (j, &b) in self.bounds.iter().enumerate() {
            put_f32(&mut p, 4 * j, b);
        }
        p
    }

    pub fn decode(p: &Params, c: usize) -> Self {
        let mut bounds = [0f32; SLOTS];
        for (j, b) in bounds.iter_mut().enumerate() {
            *b = get_f32(p, 4 * j);
        }
        BsModel { fanout: c as u32, bounds }
    }
}

impl Branch for BsModel {
    fn fanout(&self) -> usize {
        self.fanout as usize
    }

    #[inline]
    fn predict(&self, key: f64) -> usize {
        let n = self.bounds.partition_point(|&b| b as f64 <= key);
        n.min(self.fanout as usize - 1)
    }
}

#[inline]
pub(super) fn predict_params(p: &Params, c: usize, key: f64) -> usize {
    let (mut lo, mut size) = (0usize, SLOTS);
    while size > 0 {
        let half = size / 2;
        let mid = lo + half;
        if get_f32(p, 4 * mid) as f64 <= key {
            lo = mid + 1;
            size -= half + 1;
        } else {
            size = half;
        }
    }
    lo.min(c - 1)
}

/// Binary search root over `c - 1` full-precision boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct BsRoot {
    bounds: Vec<f64>,
}

impl BsRoot {
    pub fn train(keys: &[f64], c: usize) -> Result<Self> {
        check_training(keys, c)?;
        let bounds = (1..c).map(|b| boundary_key(keys, b, c)).collect();
        Ok(BsRoot { bounds })
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.bounds
    }
}

impl Branch for BsRoot {
    fn fanout(&self) -> usize {
        self.bounds.len() + 1
    }

    #[inline]
    fn predict(&self, key: f64) -> usize {
        self.bounds.partition_point(|&b| b <= key)
    }
}

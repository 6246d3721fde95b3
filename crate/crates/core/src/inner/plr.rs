use super::{boundary_rank, check_training, clamp_branch, f32_down, Branch};
use crate::error::{Error, Result};
use crate::node::{get_f32, get_u16, put_f32, put_u16, Params, PARAM_BYTES};

pub const PLR_ENDPOINTS: usize = 8;

/// Chooses the ranks of the 8 endpoints.
///
/// Endpoints start at equal-frequency ranks. Interior endpoints are then
/// snapped onto branch-boundary ranks (the first rank of each branch), so
/// that a segment never straddles a boundary when there are few branches.
fn endpoint_ranks(n: usize, c: usize) -> [usize; PLR_ENDPOINTS] {
    let last = n - 1;
    let mut ranks = [0usize; PLR_ENDPOINTS];
    for (j, r) in ranks.iter_mut().enumerate() {
        *r = ((j * last) as f64 / (PLR_ENDPOINTS - 1) as f64).round() as usize;
    }
    let interior = PLR_ENDPOINTS - 2;
    let boundaries: Vec<usize> = (1..c).map(|b| boundary_rank(b, n, c)).filter(|&r| r < n).collect();
    if boundaries.is_empty() {
        return ranks;
    }
    if boundaries.len() <= interior {
        // Each boundary claims the closest unclaimed interior endpoint.
        let mut taken = [false; PLR_ENDPOINTS];
        for &b in &boundaries {
            let best = (1..=interior)
                .filter(|&j| !taken[j])
                .min_by_key(|&j| (ranks[j].abs_diff(b), j))
                .expect("at most six boundaries");
            taken[best] = true;
            ranks[best] = b;
        }
        ranks[1..=interior].sort_unstable();
    } else {
        for r in ranks[1..=interior].iter_mut() {
            let at = boundaries.partition_point(|&b| b < *r);
            let mut best = boundaries[at.min(boundaries.len() - 1)];
            if at > 0 && r.abs_diff(boundaries[at - 1]) <= r.abs_diff(best) {
                best = boundaries[at - 1];
            }
            *r = best;
        }
    }
    ranks
}

#[inline]
fn interpolate(keys: &[f64], idx: &[f64], c: usize, key: f64) -> usize {
    // Number of endpoint keys <= key.
    let pos = keys.partition_point(|&k| k <= key);
    if pos == 0 {
        return clamp_branch(idx[0], c);
    }
    let s = pos - 1;
    if s == keys.len() - 1 {
        return clamp_branch(idx[s], c);
    }
    let f = (key - keys[s]) / (keys[s + 1] - keys[s]);
    clamp_branch(idx[s] + f * (idx[s + 1] - idx[s]), c)
}

/// Seven-segment piecewise linear model: 8 `f32` keys and 8 `u16` branch indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlrModel {
    fanout: u32,
    keys: [f32; PLR_ENDPOINTS],
    idx: [u16; PLR_ENDPOINTS],
}

impl PlrModel {
    pub fn train(keys: &[f64], c: usize) -> Result<Self> {
        check_training(keys, c)?;
        if c > u16::MAX as usize {
            return Err(Error::FanoutTooLarge {
                fanout: c,
                max: u16::MAX as usize,
            });
        }
        let n = keys.len();
        let ranks = endpoint_ranks(n, c);
        let mut m = PlrModel {
            fanout: c as u32,
            keys: [0.0; PLR_ENDPOINTS],
            idx: [0; PLR_ENDPOINTS],
        };
        for (j, &r) in ranks.iter().enumerate() {
            m.keys[j] = f32_down(keys[r]);
            m.idx[j] = (r * c / n) as u16;
        }
        Ok(m)
    }

    pub fn endpoints(&self) -> ([f32; PLR_ENDPOINTS], [u16; PLR_ENDPOINTS]) {
        (self.keys, self.idx)
    }

    pub fn encode(&self) -> Params {
        let mut p = [0u8; PARAM_BYTES];
        for j in 0..PLR_ENDPOINTS {
            put_f32(&mut p, 4 * j, self.keys[j]);
            put_u16(&mut p, 32 + 2 * j, self.idx[j]);
        }
        p
    }

    pub fn decode(p: &Params, c: usize) -> Self {
        let mut m = PlrModel {
            fanout: c as u32,
            keys: [0.0; PLR_ENDPOINTS],
            idx: [0; PLR_ENDPOINTS],
        };
        for j in 0..PLR_ENDPOINTS {
            m.keys[j] = get_f32(p, 4 * j);
            m.idx[j] = get_u16(p, 32 + 2 * j);
        }
        m
    }

    fn widened(&self) -> ([f64; PLR_ENDPOINTS], [f64; PLR_ENDPOINTS]) {
        let mut k = [0.0; PLR_ENDPOINTS];
        let mut i = [0.0; PLR_ENDPOINTS];
        for j in 0..PLR_ENDPOINTS {
            k[j] = self.keys[j] as f64;
            i[j] = self.idx[j] as f64;
        }
        (k, i)
    }
}

impl Branch for PlrModel {
    fn fanout(&self) -> usize {
        self.fanout as usize
    }

    #[inline]
    fn predict(&self, key: f64) -> usize {
        let (k, i) = self.widened();
        interpolate(&k, &i, self.fanout as usize, key)
    }
}

#[inline]
pub(super) fn predict_params(p: &Params, c: usize, key: f64) -> usize {
    PlrModel::decode(p, c).predict(key)
}

/// Full-precision piecewise linear root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlrRoot {
    fanout: usize,
    keys: [f64; PLR_ENDPOINTS],
    idx: [f64; PLR_ENDPOINTS],
}

impl PlrRoot {
    pub fn train(keys: &[f64], c: usize) -> Result<Self> {
        check_training(keys, c)?;
        let n = keys.len();
        let ranks = endpoint_ranks(n, c);
        let mut m = PlrRoot {
            fanout: c,
            keys: [0.0; PLR_ENDPOINTS],
            idx: [0.0; PLR_ENDPOINTS],
        };
        for (j, &r) in ranks.iter().enumerate() {
            m.keys[j] = keys[r];
            m.idx[j] = ((r as u128 * c as u128) / n as u128) as f64;
        }
        Ok(m)
    }
}

impl Branch for PlrRoot {
    fn fanout(&self) -> usize {
        self.fanout
    }

    #[inline]
    fn predict(&self, key: f64) -> usize {
        interpolate(&self.keys, &self.idx, self.fanout, key)
    }
}

use super::{check_training, clamp_branch, f32_down, f32_up, Branch};
use crate::error::Result;
use crate::node::{get_f32, put_f32, Params, PARAM_BYTES};

pub const LR_SEGMENTS: usize = 6;

/// Six linear models over equal-width slices of the key range, packed as
/// `f32` into 56 bytes: key_min, scale, then (intercept, slope) per slice.
///
/// A key is mapped to `x = (key - key_min) * scale` in `[0, 6]`; slice `j`
/// covers `[j, j + 1)` and predicts `a_j + b_j * (x - j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrModel {
    fanout: u32,
    key_min: f32,
    scale: f32,
    segs: [(f32, f32); LR_SEGMENTS],
}

impl LrModel {
    pub fn train(keys: &[f64], c: usize) -> Result<Self> {
        check_training(keys, c)?;
        let n = keys.len();
        let key_min = f32_down(keys[0]);
        let range = keys[n - 1] - key_min as f64;
        let scale = if range > 0.0 && range.is_finite() {
            let s = LR_SEGMENTS as f64 / range;
            if s.is_finite() {
                (s as f32).min(f32::MAX)
            } else {
                f32::MAX
            }
        } else {
            0.0
        };
        let mut model = LrModel {
            fanout: c as u32,
            key_min,
            scale,
            segs: [(0.0, 0.0); LR_SEGMENTS],
        };

        // Per-slice sums over (t, y) where y is the rank target.
        let mut sums = [[0f64; 5]; LR_SEGMENTS]; // count, st, sy, stt, sty
        let mut pts: Vec<(usize, f64, f64)> = Vec::with_capacity(n);
        for (i, &k) in keys.iter().enumerate() {
            let (seg, t) = model.locate(k);
            // A lone key has no rank spread; pin it to branch 0.
            let y = if n == 1 { 0.0 } else { (i as f64 + 0.5) * c as f64 / n as f64 };
            pts.push((seg, t, y));
            let s = &mut sums[seg];
            s[0] += 1.0;
            s[1] += t;
            s[2] += y;
        }
        let mut means = [(0f64, 0f64); LR_SEGMENTS];
        for j in 0..LR_SEGMENTS {
            if sums[j][0] > 0.0 {
                means[j] = (sums[j][1] / sums[j][0], sums[j][2] / sums[j][0]);
            }
        }
        for &(seg, t, y) in &pts {
            let (mt, my) = means[seg];
            sums[seg][3] += (t - mt) * (t - mt);
            sums[seg][4] += (t - mt) * (y - my);
        }

        let mut prev_end = f64::NEG_INFINITY;
        for j in 0..LR_SEGMENTS {
            let s = sums[j];
            let (a, b) = if s[0] == 0.0 {
                (prev_end.max(0.0), 0.0)
            } else {
                let (mt, my) = means[j];
                let b = if s[3] > 0.0 { (s[4] / s[3]).max(0.0) } else { 0.0 };
                (my - b * mt, b)
            };
            let b32 = b as f32;
            let mut a32 = a as f32;
            if (a32 as f64) < prev_end {
                a32 = f32_up(prev_end);
            }
            model.segs[j] = (a32, b32);
            // Matches the arithmetic of `predict` at t = 1.
            prev_end = a32 as f64 + b32 as f64;
        }
        Ok(model)
    }

    #[inline]
    fn locate(&self, key: f64) -> (usize, f64) {
        let x = if self.scale > 0.0 {
            let x = (key - self.key_min as f64) * self.scale as f64;
            if x > 0.0 {
                x.min(LR_SEGMENTS as f64)
            } else {
                0.0
            }
        } else {
            0.0
        };
        let seg = (x as usize).min(LR_SEGMENTS - 1);
        (seg, x - seg as f64)
    }

    pub fn encode(&self) -> Params {
        let mut p = [0u8; PARAM_BYTES];
        put_f32(&mut p, 0, self.key_min);
        put_f32(&mut p, 4, self.scale);
        for (j, &(a, b)) in self.segs.iter().enumerate() {
            put_f32(&mut p, 8 + 8 * j, a);
            put_f32(&mut p, 12 + 8 * j, b);
        }
        p
    }

    pub fn decode(p: &Params, c: usize) -> Self {
        let mut segs = [(0.0, 0.0); LR_SEGMENTS];
        for (j, s) in segs.iter_mut().enumerate() {
            *s = (get_f32(p, 8 + 8 * j), get_f32(p, 12 + 8 * j));
        }
        LrModel {
            fanout: c as u32,
            key_min: get_f32(p, 0),
            scale: get_f32(p, 4),
            segs,
        }
    }

    pub fn segments(&self) -> &[(f32, f32); LR_SEGMENTS] {
        &self.segs
    }
}

impl Branch for LrModel {
    fn fanout(&self) -> usize {
        self.fanout as usize
    }

    #[inline]
    fn predict(&self, key: f64) -> usize {
        if key < self.key_min as f64 {
            return 0;
        }
        let (seg, t) = self.locate(key);
        let (a, b) = self.segs[seg];
        clamp_branch(a as f64 + b as f64 * t, self.fanout as usize)
    }
}

#[inline]
pub(super) fn predict_params(p: &Params, c: usize, key: f64) -> usize {
    let key_min = get_f32(p, 0) as f64;
    if key < key_min {
        return 0;
    }
    let scale = get_f32(p, 4) as f64;
    let x = if scale > 0.0 {
        let x = (key - key_min) * scale;
        if x > 0.0 {
            x.min(LR_SEGMENTS as f64)
        } else {
            0.0
        }
    } else {
        0.0
    };
    let seg = (x as usize).min(LR_SEGMENTS - 1);
    let a = get_f32(p, 8 + 8 * seg) as f64;
    let b = get_f32(p, 12 + 8 * seg) as f64;
    clamp_branch(a + b * (x - seg as f64), c)
}

/// A single linear model at full precision (24 bytes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrRoot {
    fanout: usize,
    key_min: f64,
    slope: f64,
    intercept: f64,
}

impl LrRoot {
    pub fn train(keys: &[f64], c: usize) -> Result<Self> {
        check_training(keys, c)?;
        let n = keys.len() as f64;
        let mean_k = keys.iter().sum::<f64>() / n;
        let target = |i: usize| (i as f64 + 0.5) * c as f64 / n;
        let mean_y = if keys.len() == 1 { 0.0 } else { c as f64 / 2.0 };
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for (i, &k) in keys.iter().enumerate() {
            let dx = k - mean_k;
            sxx += dx * dx;
            sxy += dx * (target(i) - c as f64 / 2.0);
        }
        let slope = if sxx > 0.0 && sxx.is_finite() { (sxy / sxx).max(0.0) } else { 0.0 };
        let slope = if slope.is_finite() { slope } else { 0.0 };
        let intercept = mean_y - slope * mean_k;
        let intercept = if intercept.is_finite() { intercept } else { mean_y };
        Ok(LrRoot {
            fanout: c,
            key_min: keys[0],
            slope,
            intercept,
        })
    }
}

impl Branch for LrRoot {
    fn fanout(&self) -> usize {
        self.fanout
    }

    #[inline]
    fn predict(&self, key: f64) -> usize {
        if key < self.key_min {
            return 0;
        }
        clamp_branch(self.slope * key + self.intercept, self.fanout)
    }
}

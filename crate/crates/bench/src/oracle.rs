//! Random operation interleavings checked against an ordered map.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{BenchError, BenchResultT};
use crate::structure::KvIndex;

/// Orders nonnegative finite keys by their bit pattern.
fn bits(k: f64) -> u64 {
    debug_assert!(k >= 0.0 && k.is_finite());
    k.to_bits()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OracleReport {
    pub ops: usize,
    pub inserts: usize,
    pub deletes: usize,
    pub mismatches: usize,
}

/// Runs `ops` random finds, inserts, updates, deletes and scans on `index`,
/// loaded with the nonnegative `keys` (values equal to keys), comparing every
/// result with a `BTreeMap`. Stops at the first mismatch.
pub fn check_against_map(index: &mut dyn KvIndex, keys: &[f64], max_key: f64, ops: usize, seed: u64) -> BenchResultT<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut map: BTreeMap<u64, f64> = keys.iter().map(|&k| (bits(k), k)).collect();
    // Keys seen so far, live or not, so lookups hit existing entries often.
    let mut pool: Vec<f64> = keys.to_vec();
    let mut report = OracleReport::default();
    let fail = |step: usize, what: String| Err(BenchError::Mismatch(format!("step {step}: {what}")));
    for step in 0..ops {
        let key = if pool.is_empty() || rng.random_bool(0.4) {
            (rng.random_range(0.0..max_key) * 16.0).round() / 16.0
        } else {
            pool[rng.random_range(0..pool.len())]
        };
        let b = bits(key);
        match rng.random_range(0..20) {
            0..=5 => {
                let v = step as f64;
                let want = !map.contains_key(&b);
                let got = index.insert(key, v);
                if got != want {
                    return fail(step, format!("insert {key} returned {got}"));
                }
                if want {
                    map.insert(b, v);
                    pool.push(key);
                    report.inserts += 1;
                }
            }
            6..=11 => {
                let got = index.find(key);
                if got != map.get(&b).copied() {
                    return fail(step, format!("find {key} returned {got:?}"));
                }
            }
            12..=14 => {
                let want = map.remove(&b).is_some();
                if index.delete(key) != want {
                    return fail(step, format!("delete {key}"));
                }
                report.deletes += want as usize;
            }
            15..=17 => {
                let want = match map.get_mut(&b) {
                    Some(v) => {
                        *v = -(step as f64);
                        true
                    }
                    None => false,
                };
                if index.update(key, -(step as f64)) != want {
                    return fail(step, format!("update {key}"));
                }
            }
            _ => {
                let len = rng.random_range(1..=100);
                let got: Vec<(u64, f64)> = index.range_scan(key, len).iter().map(|e| (bits(e.key), e.value)).collect();
                let want: Vec<(u64, f64)> = map.range(b..).take(len).map(|(&k, &v)| (k, v)).collect();
                if got != want {
                    return fail(step, format!("scan {key} len {len}: {} vs {} entries", got.len(), want.len()));
                }
            }
        }
        if index.len() != map.len() {
            return fail(step, format!("len {} vs {}", index.len(), map.len()));
        }
        report.ops += 1;
    }
    let all = index.range_scan(0.0, usize::MAX);
    if all.len() != map.len() || all.iter().zip(&map).any(|(e, (&k, &v))| bits(e.key) != k || e.value != v) {
        return fail(ops, "final contents differ".into());
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::btree::BTree;

    #[test]
    fn btree_passes() {
        let keys: Vec<f64> = (0..2000).map(|i| i as f64 * 50.0).collect();
        let mut t = BTree::bulk_load(&keys, &keys, 256).unwrap();
        let r = check_against_map(&mut t, &keys, 100_000.0, 20_000, 1).unwrap();
        assert_eq!(r.ops, 20_000);
        assert!(r.inserts > 1000 && r.deletes > 100);
    }

    /// A structure that forgets every insert.
    struct Forgetful(BTree);

    impl KvIndex for Forgetful {
        fn find(&self, key: f64) -> Option<f64> {
            self.0.find(key)
        }
        fn insert(&mut self, _: f64, _: f64) -> bool {
            true
        }
        fn update(&mut self, key: f64, value: f64) -> bool {
            self.0.update(key, value)
        }
        fn delete(&mut self, key: f64) -> bool {
            self.0.delete(key)
        }
        fn range_scan(&self, start: f64, len: usize) -> Vec<carmi_core::Entry> {
            self.0.range_scan(start, len)
        }
        fn len(&self) -> usize {
            self.0.len()
        }
        fn space_bytes(&self) -> f64 {
            0.0
        }
        fn depth(&self) -> usize {
            0
        }
        fn census(&self) -> [usize; 7] {
            [0; 7]
        }
    }

    #[test]
    fn detects_a_broken_structure() {
        let keys: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let mut f = Forgetful(BTree::bulk_load(&keys, &keys, 256).unwrap());
        assert!(matches!(
            check_against_map(&mut f, &keys, 1000.0, 10_000, 2),
            Err(BenchError::Mismatch(_))
        ));
    }
}

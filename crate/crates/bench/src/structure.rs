//! The structures under comparison behind one interface.

use std::fmt;
use std::str::FromStr;

use carmi_core::{BuildConfig, Entry, Error, Index, NodeType, TrainingWorkload};

use crate::btree::{BTree, DEFAULT_NODE_BYTES};
use crate::error::{BenchError, BenchResultT};

/// Keys per leaf the fixed two-level structure aims for.
pub const RMI_KEYS_PER_LEAF: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    Carmi,
    Btree,
    Rmi,
    Alex,
}

impl Structure {
    pub const ALL: [Structure; 4] = [Structure::Carmi, Structure::Btree, Structure::Rmi, Structure::Alex];

    pub fn name(self) -> &'static str {
        match self {
            Structure::Carmi => "carmi",
            Structure::Btree => "btree",
            Structure::Rmi => "rmi",
            Structure::Alex => "alex",
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Structure {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Structure::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| BenchError::Usage(format!("unknown structure {s}")))
    }
}

/// Ordered key-value operations shared by every benchmarked structure.
pub trait KvIndex {
    fn find(&self, key: f64) -> Option<f64>;
    /// False when the key is already live.
    fn insert(&mut self, key: f64, value: f64) -> bool;
    fn update(&mut self, key: f64, value: f64) -> bool;
    fn delete(&mut self, key: f64) -> bool;
    fn range_scan(&self, start: f64, len: usize) -> Vec<Entry>;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn space_bytes(&self) -> f64;
    fn depth(&self) -> usize;
    /// Node counts per type in `NodeType::ALL` order.
    fn census(&self) -> [usize; 7];
}

impl KvIndex for Index {
    #[inline]
    fn find(&self, key: f64) -> Option<f64> {
        Index::find(self, key).ok()
    }

    fn insert(&mut self, key: f64, value: f64) -> bool {
        match Index::insert(self, key, value) {
            Ok(()) => true,
            Err(Error::DuplicateKey(_)) => false,
            Err(e) => panic!("insert {key}: {e}"),
        }
    }

    fn update(&mut self, key: f64, value: f64) -> bool {
        Index::update(self, key, value).is_ok()
    }

    fn delete(&mut self, key: f64) -> bool {
        Index::delete(self, key).is_ok()
    }

    fn range_scan(&self, start: f64, len: usize) -> Vec<Entry> {
        Index::range_scan(self, start, len)
    }

    fn len(&self) -> usize {
        Index::len(self)
    }

    fn space_bytes(&self) -> f64 {
        self.stats().space_bytes
    }

    fn depth(&self) -> usize {
        self.stats().depth
    }

    fn census(&self) -> [usize; 7] {
        self.stats().counts
    }
}

impl KvIndex for BTree {
    #[inline]
    fn find(&self, key: f64) -> Option<f64> {
        BTree::find(self, key)
    }

    fn insert(&mut self, key: f64, value: f64) -> bool {
        BTree::insert(self, key, value)
    }

    fn update(&mut self, key: f64, value: f64) -> bool {
        BTree::update(self, key, value)
    }

    fn delete(&mut self, key: f64) -> bool {
        BTree::delete(self, key)
    }

    fn range_scan(&self, start: f64, len: usize) -> Vec<Entry> {
        BTree::range_scan(self, start, len)
    }

    fn len(&self) -> usize {
        BTree::len(self)
    }

    fn space_bytes(&self) -> f64 {
        BTree::space_bytes(self) as f64
    }

    fn depth(&self) -> usize {
        self.height()
    }

    /// B+-tree nodes are reported as binary-search inner nodes and array leaves.
    fn census(&self) -> [usize; 7] {
        let mut c = [0; 7];
        c[NodeType::BsInner.tag() as usize - 1] = self.inner_nodes();
        c[NodeType::ArrayLeaf.tag() as usize - 1] = self.leaf_nodes();
        c
    }
}

/// Root fanout for the fixed two-level structure.
pub fn default_rmi_fanout(n: usize) -> usize {
    (n / RMI_KEYS_PER_LEAF).max(1).next_power_of_two()
}

pub fn build_fixed_rmi(keys: &[f64], values: &[f64], fanout: usize, config: &BuildConfig) -> BenchResultT<Index> {
    Ok(Index::fixed_rmi(keys, values, fanout, config)?)
}

pub fn build_fixed_alex(keys: &[f64], values: &[f64], training: &TrainingWorkload, config: &BuildConfig) -> BenchResultT<Index> {
    Ok(Index::fixed_alex(keys, values, training, config)?)
}

/// Builds `structure` over sorted distinct keys.
pub fn build_structure(
    structure: Structure,
    keys: &[f64],
    values: &[f64],
    training: &TrainingWorkload,
    config: &BuildConfig,
) -> BenchResultT<Box<dyn KvIndex>> {
    Ok(match structure {
        Structure::Carmi => Box::new(Index::build(keys, values, training, config)?),
        Structure::Btree => Box::new(BTree::bulk_load(keys, values, DEFAULT_NODE_BYTES)?),
        Structure::Rmi => Box::new(build_fixed_rmi(keys, values, default_rmi_fanout(keys.len()), config)?),
        Structure::Alex => Box::new(build_fixed_alex(keys, values, training, config)?),
    })
}

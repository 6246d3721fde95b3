//! Order-preserving branch predictors used by inner nodes and the root.
//!
//! Every model maps a key to a branch in `[0, c)` and is nondecreasing in
//! the key, so routing a sorted run of keys yields contiguous child ranges.

mod bs;
mod his;
mod lr;
mod plr;

pub use bs::{BsModel, BsRoot, BS_MAX_FANOUT};
pub use his::{HisModel, HisRoot, HIS_BUCKETS, HIS_MAX_FANOUT};
pub use lr::{LrModel, LrRoot, LR_SEGMENTS};
pub use plr::{PlrModel, PlrRoot, PLR_ENDPOINTS};

use crate::error::{Error, Result};
use crate::node::{NodeBlock, NodeRecord, NodeType, MAX_COUNT};

/// Anything that routes keys to one of `fanout()` branches.
pub trait Branch {
    fn fanout(&self) -> usize;
    fn predict(&self, key: f64) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InnerKind {
    Lr,
    Plr,
    His,
    Bs,
}

impl InnerKind {
    pub const ALL: [InnerKind; 4] = [InnerKind::Lr, InnerKind::Plr, InnerKind::His, InnerKind::Bs];

    pub fn node_type(self) -> NodeType {
        match self {
            InnerKind::Lr => NodeType::LrInner,
            InnerKind::Plr => NodeType::PlrInner,
            InnerKind::His => NodeType::HisInner,
            InnerKind::Bs => NodeType::BsInner,
        }
    }

    /// Largest fanout the 64-byte form can represent.
    pub fn max_inner_fanout(self) -> usize {
        match self {
            InnerKind::Lr => MAX_COUNT as usize,
            InnerKind::Plr => u16::MAX as usize,
            InnerKind::His => HIS_MAX_FANOUT,
            InnerKind::Bs => BS_MAX_FANOUT,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InnerKind::Lr => "lr",
            InnerKind::Plr => "plr",
            InnerKind::His => "his",
            InnerKind::Bs => "bs",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lr" => Some(InnerKind::Lr),
            "plr" => Some(InnerKind::Plr),
            "his" => Some(InnerKind::His),
            "bs" => Some(InnerKind::Bs),
            _ => None,
        }
    }
}

/// An inner-node model in its 56-byte form.
#[derive(Debug, Clone, PartialEq)]
pub enum InnerModel {
    Lr(LrModel),
    Plr(PlrModel),
    His(HisModel),
    Bs(BsModel),
}

impl InnerModel {
    pub fn train(kind: InnerKind, keys: &[f64], c: usize) -> Result<Self> {
        Ok(match kind {
            InnerKind::Lr => InnerModel::Lr(LrModel::train(keys, c)?),
            InnerKind::Plr => InnerModel::Plr(PlrModel::train(keys, c)?),
            InnerKind::His => InnerModel::His(HisModel::train(keys, c)?),
            InnerKind::Bs => InnerModel::Bs(BsModel::train(keys, c)?),
        })
    }

    pub fn kind(&self) -> InnerKind {
        match self {
            InnerModel::Lr(_) => InnerKind::Lr,
            InnerModel::Plr(_) => InnerKind::Plr,
            InnerModel::His(_) => InnerKind::His,
            InnerModel::Bs(_) => InnerKind::Bs,
        }
    }

    pub fn to_record(&self, start: u32) -> NodeRecord {
        let (params, c) = match self {
            InnerModel::Lr(m) => (m.encode(), m.fanout()),
            InnerModel::Plr(m) => (m.encode(), m.fanout()),
            InnerModel::His(m) => (m.encode(), m.fanout()),
            InnerModel::Bs(m) => (m.encode(), m.fanout()),
        };
        NodeRecord::new(self.kind().node_type(), c as u32, start, params)
    }

    pub fn from_record(rec: &NodeRecord) -> Result<Self> {
        let c = rec.count as usize;
        Ok(match rec.node_type {
            NodeType::LrInner => InnerModel::Lr(LrModel::decode(&rec.params, c)),
            NodeType::PlrInner => InnerModel::Plr(PlrModel::decode(&rec.params, c)),
            NodeType::HisInner => InnerModel::His(HisModel::decode(&rec.params, c)),
            NodeType::BsInner => InnerModel::Bs(BsModel::decode(&rec.params, c)),
            other => return Err(Error::UnknownTag(other.tag())),
        })
    }
}

impl Branch for InnerModel {
    fn fanout(&self) -> usize {
        match self {
            InnerModel::Lr(m) => m.fanout(),
            InnerModel::Plr(m) => m.fanout(),
            InnerModel::His(m) => m.fanout(),
            InnerModel::Bs(m) => m.fanout(),
        }
    }

    fn predict(&self, key: f64) -> usize {
        match self {
            InnerModel::Lr(m) => m.predict(key),
            InnerModel::Plr(m) => m.predict(key),
            InnerModel::His(m) => m.predict(key),
            InnerModel::Bs(m) => m.predict(key),
        }
    }
}

/// Routes `key` through an encoded inner record without building a model value.
#[inline]
pub fn predict_block(block: &NodeBlock, key: f64) -> usize {
    let c = block.count() as usize;
    match block.tag() {
        1 => lr::predict_params(block.params(), c, key),
        2 => plr::predict_params(block.params(), c, key),
        3 => his::predict_params(block.params(), c, key),
        4 => bs::predict_params(block.params(), c, key),
        t => unreachable!("tag {t} is not an inner node"),
    }
}

/// The root model: same families without the 56-byte budget.
#[derive(Debug, Clone, PartialEq)]
pub enum RootNode {
    Lr(LrRoot),
    Plr(PlrRoot),
    His(HisRoot),
    Bs(BsRoot),
}

impl RootNode {
    pub fn train(kind: InnerKind, keys: &[f64], c: usize) -> Result<Self> {
        Ok(match kind {
            InnerKind::Lr => RootNode::Lr(LrRoot::train(keys, c)?),
            InnerKind::Plr => RootNode::Plr(PlrRoot::train(keys, c)?),
            InnerKind::His => RootNode::His(HisRoot::train(keys, c)?),
            InnerKind::Bs => RootNode::Bs(BsRoot::train(keys, c)?),
        })
    }

    /// Bytes held by the root's parameters.
    pub fn space_bytes(&self) -> usize {
        match self {
            RootNode::Lr(_) => 24,
            RootNode::Plr(_) => 16 * PLR_ENDPOINTS,
            RootNode::His(m) => 16 + 6 * m.fanout().div_ceil(16),
            RootNode::Bs(m) => 8 * (m.fanout() - 1),
        }
    }

    pub fn kind(&self) -> InnerKind {
        match self {
            RootNode::Lr(_) => InnerKind::Lr,
            RootNode::Plr(_) => InnerKind::Plr,
            RootNode::His(_) => InnerKind::His,
            RootNode::Bs(_) => InnerKind::Bs,
        }
    }
}

impl Branch for RootNode {
    fn fanout(&self) -> usize {
        match self {
            RootNode::Lr(m) => m.fanout(),
            RootNode::Plr(m) => m.fanout(),
            RootNode::His(m) => m.fanout(),
            RootNode::Bs(m) => m.fanout(),
        }
    }

    #[inline]
    fn predict(&self, key: f64) -> usize {
        match self {
            RootNode::Lr(m) => m.predict(key),
            RootNode::Plr(m) => m.predict(key),
            RootNode::His(m) => m.predict(key),
            RootNode::Bs(m) => m.predict(key),
        }
    }
}

/// Splits sorted `keys` by `model` into child ranges; child `i` covers
/// `bounds[i]..bounds[i + 1]`.
pub fn partition<M: Branch + ?Sized>(model: &M, keys: &[f64]) -> Vec<usize> {
    let c = model.fanout();
    let mut bounds = vec![0usize; c + 1];
    let mut prev = 0usize;
    for &k in keys {
        let b = model.predict(k);
        debug_assert!(b >= prev, "model is not order preserving");
        prev = b;
        bounds[b + 1] += 1;
    }
    for i in 0..c {
        bounds[i + 1] += bounds[i];
    }
    bounds
}

pub(crate) fn check_training(keys: &[f64], c: usize) -> Result<()> {
    if keys.is_empty() {
        return Err(Error::EmptyInput);
    }
    if c == 0 {
        return Err(Error::InvalidConfig("fanout must be at least 1".into()));
    }
    Ok(())
}

#[inline]
pub(crate) fn clamp_branch(y: f64, c: usize) -> usize {
    if y > 0.0 {
        (y as usize).min(c - 1)
    } else {
        0
    }
}

/// Largest `f32` not above `x`.
pub(crate) fn f32_down(x: f64) -> f32 {
    let f = x as f32;
    if f as f64 > x {
        f.next_down()
    } else {
        f
    }
}

/// Smallest `f32` not below `x`.
pub(crate) fn f32_up(x: f64) -> f32 {
    let f = x as f32;
    if (f as f64) < x {
        f.next_up()
    } else {
        f
    }
}

/// First rank routed to branch `b` when ranks map to `floor(r * c / n)`.
#[inline]
pub(crate) fn boundary_rank(b: usize, n: usize, c: usize) -> usize {
    ((b as u128 * n as u128).div_ceil(c as u128)) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sorted_keys() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::btree_set(-1_000_000i64..1_000_000, 1..400)
            .prop_map(|s| s.into_iter().map(|k| k as f64 * 0.37).collect::<Vec<_>>())
    }

    fn skewed_keys() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::btree_set(0u32..60_000, 1..400)
            .prop_map(|s| s.into_iter().map(|k| (k as f64 / 4000.0).exp()).collect::<Vec<_>>())
    }

    fn max_fanout(kind: InnerKind) -> usize {
        kind.max_inner_fanout().min(64)
    }

    fn check_model<M: Branch>(m: &M, keys: &[f64], probes: &[f64]) -> std::result::Result<(), TestCaseError> {
        let c = m.fanout();
        let mut all: Vec<f64> = keys.iter().chain(probes).copied().collect();
        all.push(keys[0] - 1e9);
        all.push(keys[keys.len() - 1] + 1e9);
        all.push(f64::MIN);
        all.push(f64::MAX);
        all.sort_by(f64::total_cmp);
        let mut prev = 0;
        for &k in &all {
            let b = m.predict(k);
            prop_assert!(b < c, "branch {} out of range for c={}", b, c);
            prop_assert!(b >= prev, "not monotone at {}", k);
            prev = b;
        }
        prop_assert_eq!(m.predict(keys[0] - 1e9), 0);
        let bounds = partition(m, keys);
        prop_assert_eq!(bounds[c], keys.len());
        Ok(())
    }

    proptest! {
        #[test]
        fn inner_models_are_monotone_and_clamped(
            keys in prop_oneof![sorted_keys(), skewed_keys()],
            kind in (0usize..4).prop_map(|i| InnerKind::ALL[i]),
            c in 1usize..64,
            probes in proptest::collection::vec(-1e7f64..1e7, 0..50),
        ) {
            let c = c.min(max_fanout(kind));
            let m = InnerModel::train(kind, &keys, c).unwrap();
            check_model(&m, &keys, &probes)?;
            let rec = m.to_record(0);
            let back = InnerModel::from_record(&rec).unwrap();
            prop_assert_eq!(&back, &m);
            let block = crate::node::encode_node(&rec).unwrap();
            for &k in keys.iter().chain(&probes) {
                prop_assert_eq!(predict_block(&block, k), m.predict(k));
            }
        }

        #[test]
        fn root_models_are_monotone_and_clamped(
            keys in prop_oneof![sorted_keys(), skewed_keys()],
            kind in (0usize..4).prop_map(|i| InnerKind::ALL[i]),
            c in 1usize..2000,
            probes in proptest::collection::vec(-1e7f64..1e7, 0..50),
        ) {
            let m = RootNode::train(kind, &keys, c).unwrap();
            check_model(&m, &keys, &probes)?;
        }
    }

    #[test]
    fn partition_with_single_child_is_identity() {
        let keys: Vec<f64> = (0..10).map(|i| i as f64).collect();
        for kind in InnerKind::ALL {
            let m = InnerModel::train(kind, &keys, 1).unwrap();
            assert_eq!(partition(&m, &keys), vec![0, 10]);
        }
    }

    #[test]
    fn below_training_range_routes_to_zero() {
        let keys: Vec<f64> = (0..100).map(|i| 5.0 + i as f64).collect();
        for kind in InnerKind::ALL {
            let c = 8;
            assert_eq!(InnerModel::train(kind, &keys, c).unwrap().predict(-1e300), 0);
            assert_eq!(RootNode::train(kind, &keys, c).unwrap().predict(-1e300), 0);
        }
    }

    #[test]
    fn empty_training_input_is_rejected() {
        for kind in InnerKind::ALL {
            assert_eq!(InnerModel::train(kind, &[], 4), Err(Error::EmptyInput));
            assert_eq!(RootNode::train(kind, &[], 4), Err(Error::EmptyInput));
        }
    }

    #[test]
    fn float_rounding_helpers() {
        let x = 0.1f64;
        assert!(f32_down(x) as f64 <= x);
        assert!(f32_up(x) as f64 >= x);
        assert_eq!(f32_down(1e300), f32::MAX);
        assert_eq!(f32_down(2.0), 2.0);
    }
}

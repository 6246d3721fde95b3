//! Fixed 64-byte node records and the node array.
//!
//! Layout of an encoded record (all little-endian):
//!
//! | bytes  | field                    |
//! |--------|--------------------------|
//! | 0      | node type tag            |
//! | 1..4   | count (24 bits)          |
//! | 4..8   | start offset (32 bits)   |
//! | 8..64  | model parameters         |

use crate::error::{Error, Result};

pub const NODE_BYTES: usize = 64;
pub const PARAM_BYTES: usize = 56;
/// Largest value the 24-bit count field can hold.
pub const MAX_COUNT: u32 = (1 << 24) - 1;

pub type Params = [u8; PARAM_BYTES];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum NodeType {
    LrInner = 1,
    PlrInner = 2,
    HisInner = 3,
    BsInner = 4,
    ArrayLeaf = 5,
    GappedLeaf = 6,
    ExternalLeaf = 7,
}

impl NodeType {
    pub const ALL: [NodeType; 7] = [
        NodeType::LrInner,
        NodeType::PlrInner,
        NodeType::HisInner,
        NodeType::BsInner,
        NodeType::ArrayLeaf,
        NodeType::GappedLeaf,
        NodeType::ExternalLeaf,
    ];

    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        Ok(match tag {
            1 => NodeType::LrInner,
            2 => NodeType::PlrInner,
            3 => NodeType::HisInner,
            4 => NodeType::BsInner,
            5 => NodeType::ArrayLeaf,
            6 => NodeType::GappedLeaf,
            7 => NodeType::ExternalLeaf,
            other => return Err(Error::UnknownTag(other)),
        })
    }

    pub fn is_leaf(self) -> bool {
        matches!(self, NodeType::ArrayLeaf | NodeType::GappedLeaf | NodeType::ExternalLeaf)
    }

    pub fn name(self) -> &'static str {
        match self {
            NodeType::LrInner => "lr",
            NodeType::PlrInner => "plr",
            NodeType::HisInner => "his",
            NodeType::BsInner => "bs",
            NodeType::ArrayLeaf => "array",
            NodeType::GappedLeaf => "gapped",
            NodeType::ExternalLeaf => "external",
        }
    }
}

/// Decoded form of a node record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeRecord {
    pub node_type: NodeType,
    /// Children for inner nodes, data slots for leaves.
    pub count: u32,
    /// First child in the node array, or first slot in the data array.
    pub start: u32,
    pub params: Params,
}

impl NodeRecord {
    pub fn new(node_type: NodeType, count: u32, start: u32, params: Params) -> Self {
        NodeRecord {
            node_type,
            count,
            start,
            params,
        }
    }
}

/// One encoded record, aligned to a cache line.
#[derive(Clone, Copy, PartialEq, Eq)]
#[repr(C, align(64))]
pub struct NodeBlock(pub [u8; NODE_BYTES]);

impl std::fmt::Debug for NodeBlock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "NodeBlock(tag={}, count={}, start={})", self.0[0], self.count(), self.start())
    }
}

impl NodeBlock {
    #[inline]
    pub fn tag(&self) -> u8 {
        self.0[0]
    }

    #[inline]
    pub fn count(&self) -> u32 {
        u32::from_le_bytes([self.0[1], self.0[2], self.0[3], 0])
    }

    #[inline]
    pub fn start(&self) -> u32 {
        u32::from_le_bytes([self.0[4], self.0[5], self.0[6], self.0[7]])
    }

    #[inline]
    pub fn params(&self) -> &Params {
        self.0[8..].try_into().expect("params are 56 bytes")
    }

    pub fn as_bytes(&self) -> &[u8; NODE_BYTES] {
        &self.0
    }
}

pub fn encode_node(record: &NodeRecord) -> Result<NodeBlock> {
    if record.count > MAX_COUNT {
        return Err(Error::CountOverflow(record.count));
    }
    let mut out = [0u8; NODE_BYTES];
    out[0] = record.node_type.tag();
    out[1..4].copy_from_slice(&record.count.to_le_bytes()[..3]);
    out[4..8].copy_from_slice(&record.start.to_le_bytes());
    out[8..].copy_from_slice(&record.params);
    Ok(NodeBlock(out))
}

pub fn decode_node(block: &[u8]) -> Result<NodeRecord> {
    if block.len() != NODE_BYTES {
        return Err(Error::BadBlockLength(block.len()));
    }
    let node_type = NodeType::from_tag(block[0])?;
    let count = u32::from_le_bytes([block[1], block[2], block[3], 0]);
    let start = u32::from_le_bytes(block[4..8].try_into().unwrap());
    let params: Params = block[8..].try_into().unwrap();
    Ok(NodeRecord {
        node_type,
        count,
        start,
        params,
    })
}

/// Contiguous storage of encoded node records. The root lives outside.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeArray {
    blocks: Vec<NodeBlock>,
}

impl NodeArray {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Reserves `c` contiguous records (zeroed array-leaf placeholders) and returns the first index.
    pub fn allocate_children(&mut self, c: usize) -> Result<u32> {
        if c == 0 {
            return Err(Error::ZeroAllocation);
        }
        let start = self.blocks.len();
        let mut empty = [0u8; NODE_BYTES];
        empty[0] = NodeType::ArrayLeaf.tag();
        self.blocks.resize(start + c, NodeBlock(empty));
        Ok(start as u32)
    }

    #[inline]
    pub fn block(&self, idx: u32) -> &NodeBlock {
        &self.blocks[idx as usize]
    }

    pub fn get(&self, idx: u32) -> NodeRecord {
        decode_node(&self.blocks[idx as usize].0).expect("node array holds only valid records")
    }

    pub fn set(&mut self, idx: u32, record: &NodeRecord) -> Result<()> {
        self.blocks[idx as usize] = encode_node(record)?;
        Ok(())
    }

    pub fn blocks(&self) -> &[NodeBlock] {
        &self.blocks
    }

    pub fn from_blocks(blocks: Vec<NodeBlock>) -> Result<Self> {
        for b in &blocks {
            NodeType::from_tag(b.tag())?;
        }
        Ok(NodeArray { blocks })
    }
}

// Little-endian helpers for packing model parameters.

#[inline]
pub(crate) fn put_f32(p: &mut Params, off: usize, v: f32) {
    p[off..off + 4].copy_from_slice(&v.to_le_bytes());
}

#[inline]
pub(crate) fn get_f32(p: &Params, off: usize) -> f32 {
    f32::from_le_bytes(p[off..off + 4].try_into().unwrap())
}

#[inline]
pub(crate) fn put_f64(p: &mut Params, off: usize, v: f64) {
    p[off..off + 8].copy_from_slice(&v.to_le_bytes());
}

#[inline]
pub(crate) fn get_f64(p: &Params, off: usize) -> f64 {
    f64::from_le_bytes(p[off..off + 8].try_into().unwrap())
}

#[inline]
pub(crate) fn put_u16(p: &mut Params, off: usize, v: u16) {
    p[off..off + 2].copy_from_slice(&v.to_le_bytes());
}

#[inline]
pub(crate) fn get_u16(p: &Params, off: usize) -> u16 {
    u16::from_le_bytes([p[off], p[off + 1]])
}

#[inline]
pub(crate) fn put_u32(p: &mut Params, off: usize, v: u32) {
    p[off..off + 4].copy_from_slice(&v.to_le_bytes());
}

#[inline]
pub(crate) fn get_u32(p: &Params, off: usize) -> u32 {
    u32::from_le_bytes(p[off..off + 4].try_into().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_array_leaf_encodes_to_tag_only() {
        let rec = NodeRecord::new(NodeType::ArrayLeaf, 0, 0, [0; PARAM_BYTES]);
        let block = encode_node(&rec).unwrap();
        assert_eq!(block.0.len(), 64);
        assert_eq!(block.0[0], NodeType::ArrayLeaf.tag());
        assert!(block.0[1..].iter().all(|&b| b == 0));
    }

    #[test]
    fn field_layout_is_little_endian() {
        let mut params = [0u8; PARAM_BYTES];
        params[0] = 0xAB;
        params[55] = 0xCD;
        let rec = NodeRecord::new(NodeType::BsInner, 0x0A0B0C, 0x01020304, params);
        let b = encode_node(&rec).unwrap().0;
        assert_eq!(&b[..8], &[4, 0x0C, 0x0B, 0x0A, 0x04, 0x03, 0x02, 0x01]);
        assert_eq!(b[8], 0xAB);
        assert_eq!(b[63], 0xCD);
    }

    #[test]
    fn count_boundary() {
        let ok = NodeRecord::new(NodeType::GappedLeaf, MAX_COUNT, 7, [1; PARAM_BYTES]);
        assert_eq!(decode_node(&encode_node(&ok).unwrap().0).unwrap(), ok);
        let bad = NodeRecord::new(NodeType::GappedLeaf, 1 << 24, 7, [1; PARAM_BYTES]);
        assert_eq!(encode_node(&bad), Err(Error::CountOverflow(1 << 24)));
    }

    #[test]
    fn decode_rejects_bad_input() {
        let mut block = [0u8; 64];
        block[0] = 255;
        assert_eq!(decode_node(&block), Err(Error::UnknownTag(255)));
        block[0] = 0;
        assert_eq!(decode_node(&block), Err(Error::UnknownTag(0)));
        assert_eq!(decode_node(&[5u8; 63]), Err(Error::BadBlockLength(63)));
    }

    #[test]
    fn block_accessors_match_decode() {
        let rec = NodeRecord::new(NodeType::HisInner, 16, 99, [3; PARAM_BYTES]);
        let b = encode_node(&rec).unwrap();
        assert_eq!(b.tag(), 3);
        assert_eq!(b.count(), 16);
        assert_eq!(b.start(), 99);
        assert_eq!(b.params(), &[3; PARAM_BYTES]);
        assert_eq!(std::mem::size_of::<NodeBlock>(), 64);
        assert_eq!(std::mem::align_of::<NodeBlock>(), 64);
    }

    #[test]
    fn allocate_children_is_contiguous() {
        let mut a = NodeArray::new();
        assert_eq!(a.allocate_children(4).unwrap(), 0);
        assert_eq!(a.len(), 4);
        assert_eq!(a.allocate_children(2).unwrap(), 4);
        let mut b = NodeArray::new();
        b.allocate_children(10).unwrap();
        assert_eq!(b.allocate_children(1).unwrap(), 10);
        assert_eq!(b.allocate_children(0), Err(Error::ZeroAllocation));
    }

    fn any_type() -> impl Strategy<Value = NodeType> {
        (0usize..7).prop_map(|i| NodeType::ALL[i])
    }

    proptest! {
        #[test]
        fn round_trip(t in any_type(), count in 0u32..=MAX_COUNT, start: u32, params in proptest::collection::vec(any::<u8>(), PARAM_BYTES)) {
            let rec = NodeRecord::new(t, count, start, params.try_into().unwrap());
            let block = encode_node(&rec).unwrap();
            prop_assert_eq!(block.0.len(), NODE_BYTES);
            prop_assert_eq!(decode_node(&block.0).unwrap(), rec);
        }
    }
}

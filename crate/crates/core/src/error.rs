use thiserror::Error;

/// Errors raised by the index and its building blocks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("count {0} does not fit in a 24-bit field")]
    CountOverflow(u32),
    #[error("unknown node type tag {0}")]
    UnknownTag(u8),
    #[error("node block must be exactly 64 bytes, got {0}")]
    BadBlockLength(usize),
    #[error("allocation of zero slots")]
    ZeroAllocation,
    #[error("empty input")]
    EmptyInput,
    #[error("fanout {fanout} exceeds the limit {max} for this model")]
    FanoutTooLarge { fanout: usize, max: usize },
    #[error("{len} entries do not fit in capacity {capacity}")]
    CapacityExceeded { len: usize, capacity: usize },
    #[error("leaf is full")]
    LeafFull,
    #[error("leaf is already at maximum capacity")]
    AtMaxCapacity,
    #[error("key not found")]
    NotFound,
    #[error("key {0} is not greater than the current maximum")]
    OutOfOrderInsert(f64),
    #[error("gapped leaf cost needs a positive gap density")]
    DegenerateDensity,
    #[error("partition has zero entropy")]
    ZeroEntropy,
    #[error("no candidate inner node splits the range")]
    NoViableCandidate,
    #[error("{len} keys exceed the leaf capacity limit {max}")]
    TooLarge { len: usize, max: usize },
    #[error("key {0} is already present")]
    DuplicateKey(f64),
    #[error("input contains duplicate key {0}")]
    DuplicateKeys(f64),
    #[error("key {0} is not finite")]
    NonFiniteKey(f64),
    #[error("keys and values differ in length ({keys} vs {values})")]
    LengthMismatch { keys: usize, values: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("bad snapshot: {0}")]
    BadSnapshot(String),
}

pub type Result<T> = std::result::Result<T, Error>;

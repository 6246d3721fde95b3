pub mod construct;
pub mod cost;
pub mod data;
pub mod error;
pub mod index;
pub mod inner;
pub mod leaf;
pub mod node;

pub use construct::{default_training_workload, BuildConfig, Builder, BuiltPlan, TrainingWorkload};
pub use cost::{CostBreakdown, CostConstants, PartitionStats, TreeShape};
pub use data::{DataArray, DataSlot, Entry, Query, QueryKind};
pub use error::{Error, Result};
pub use index::{build_index, prepare_entries, Index, IndexStats};
pub use inner::{Branch, InnerKind, InnerModel, RootNode};
pub use leaf::{Leaf, LeafKind, LeafModel, LeafPlan, SearchTrace};
pub use node::{decode_node, encode_node, NodeArray, NodeBlock, NodeRecord, NodeType};

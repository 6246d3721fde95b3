use std::rc::Rc;

use super::{BuildConfig, TrainingWorkload};
use crate::cost::{CostBreakdown, TreeShape};
use crate::error::Result;
use crate::inner::{Branch, InnerModel, RootNode};
use crate::leaf::LeafPlan;

#[derive(Debug, Clone)]
pub enum Design {
    Leaf(LeafPlan),
    Inner { model: InnerModel, children: Vec<Rc<Subtree>> },
}

/// A planned subtree over sorted keys `lo..hi`.
#[derive(Debug, Clone)]
pub struct Subtree {
    pub lo: usize,
    pub hi: usize,
    pub design: Design,
    /// Query-weighted latency of every node in the subtree.
    pub time_ns: f64,
    pub space_bytes: f64,
    /// Contribution to the build objective.
    pub objective: f64,
}

impl Subtree {
    pub fn len(&self) -> usize {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi == self.lo
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.design, Design::Leaf(_))
    }

    /// Levels below and including this node.
    pub fn depth(&self) -> usize {
        match &self.design {
            Design::Leaf(_) => 1,
            Design::Inner { children, .. } => 1 + children.iter().map(|c| c.depth()).max().unwrap_or(0),
        }
    }

    pub fn shape(&self) -> TreeShape {
        match &self.design {
            Design::Leaf(p) => TreeShape::Leaf(p.size),
            Design::Inner { children, .. } => TreeShape::Inner(children.iter().map(|c| c.shape()).collect()),
        }
    }

    /// Visits leaves in key order.
    pub fn for_each_leaf(&self, f: &mut impl FnMut(&Subtree, &LeafPlan)) {
        match &self.design {
            Design::Leaf(p) => f(self, p),
            Design::Inner { children, .. } => children.iter().for_each(|c| c.for_each_leaf(f)),
        }
    }
}

/// Cost of the planned tree found by routing every training query from the
/// root and summing node latencies along its path.
pub fn tree_objective(
    root: &RootNode,
    children: &[Rc<Subtree>],
    keys: &[f64],
    workload: &TrainingWorkload,
    config: &BuildConfig,
) -> Result<CostBreakdown> {
    let costs = &config.costs;
    let m = workload.total() as f64;
    let root_ns = costs.tcost_root(root.kind(), root.fanout());
    let mut time = 0.0;
    for (i, &key) in keys.iter().enumerate() {
        let (r, w) = (workload.reads()[i] as f64, workload.inserts()[i] as f64);
        if r == 0.0 && w == 0.0 {
            continue;
        }
        let mut path = root_ns;
        let mut node = &children[root.predict(key)];
        loop {
            match &node.design {
                Design::Inner { model, children } => {
                    path += costs.tcost_inner(model.kind());
                    node = &children[model.predict(key)];
                }
                Design::Leaf(p) => {
                    let read = costs.tcost_leaf_read(p.kind, p.span(), p.capacity, p.model.epsilon, p.p_hit, p.density());
                    let insert = if w > 0.0 {
                        costs.tcost_leaf_insert(p.kind, p.size, p.density(), read)?
                    } else {
                        0.0
                    };
                    time += r * (path + read) + w * (path + insert);
                    break;
                }
            }
        }
    }
    let mut space = root.space_bytes() as f64;
    let mut stack: Vec<&Subtree> = children.iter().map(|c| c.as_ref()).collect();
    while let Some(s) = stack.pop() {
        match &s.design {
            Design::Leaf(p) => space += costs.scost_leaf(p.capacity),
            Design::Inner { children, .. } => {
                space += costs.node_bytes;
                stack.extend(children.iter().map(|c| c.as_ref()));
            }
        }
    }
    Ok(CostBreakdown::new(time, space, m, config.lambda))
}

use thiserror::Error;

use crate::model::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("plan routes {flow} units over the infinite-cost pair {from:?} -> {to:?}")]
    InfeasiblePlan { from: NodeId, to: NodeId, flow: f64 },
    #[error("weights do not balance (sum = {0:e})")]
    Unbalanced(f64),
    #[error("basis is not a spanning tree: {0}")]
    NotATree(String),
    #[error("edge {{{0}, {1}}} is not in the tree")]
    EdgeNotFound(usize, usize),
    #[error("vertices {0} and {1} are already connected")]
    WouldCreateCycle(usize, usize),
    #[error("element {0} is not present")]
    ElementNotFound(u32),
    #[error("key {0} is already present")]
    DuplicateNode(u32),
    #[error("pieces do not fit together: {0}")]
    ShapeMismatch(String),
    #[error("internal invariant violated: {0}")]
    InternalInvariantViolation(String),
    #[error("iteration cap of {0} pivots exceeded")]
    IterationCapExceeded(usize),
    #[error("node {0:?} is pooled")]
    NodePooled(NodeId),
    #[error("node {0:?} is not a live node")]
    UnknownNode(NodeId),
    #[error("weight update would flip the sign of node {0:?}")]
    WeightSignViolation(NodeId),
    #[error("node {0:?} still carries weight {1}")]
    WeightNotZero(NodeId, f64),
    #[error("instance too large for exhaustive enumeration ({0} x {1})")]
    TooLarge(usize, usize),
    #[error("no live node on the opposite side to attach to")]
    MissingSide,
}

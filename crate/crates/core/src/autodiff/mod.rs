//! Minimal reverse-mode differentiation and the straight-through refinement
//! operators built on it.

mod gradcheck;
mod ste;
mod suite;
mod tape;

use thiserror::Error;

use crate::refine::RefineError;

pub use gradcheck::{gradcheck, gradcheck_with_reference, relative_error, GradcheckReport};
pub use ste::{
    diff_refine_junction, diff_snap_line, hard_argmax, softmax, ste_select, GeometryGradient, StePolicy,
};
pub use suite::{run_gradient_suite, CaseKind, CaseResult, SuiteReport};
pub use tape::{backward, Gradients, NodeId, Op, Tape, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdError {
    #[error("output does not belong to this tape")]
    ForeignVar,
    #[error("non-finite value at node {node}")]
    NonFinite { node: NodeId },
    #[error("function evaluated to a non-finite value")]
    NonFiniteEvaluation,
    #[error("ambiguous selection: tied maximum logits")]
    AmbiguousSelection,
    #[error("selection needs at least 2 branches, got {0}")]
    TooFewBranches(usize),
    #[error("branch outputs must match logits in count and share one dimension")]
    BranchShape,
    #[error(transparent)]
    Refine(#[from] RefineError),
    #[error("{0}")]
    Other(String),
}

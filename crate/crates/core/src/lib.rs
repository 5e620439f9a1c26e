//! Collective algorithms as per-rank dependency graphs of send, receive and
//! compute nodes.
//!
//! The same [`trace::Trace`] format carries both workloads (with `COMM_COLL`
//! placeholders) and collective algorithms. Algorithms come from
//! [`generate`] or from MSCCL-IR XML via [`msccl`]; [`validate`] proves they
//! implement the collective they claim; [`expand`] splices them into
//! workloads; [`sim`] replays the result on an analytical network.

pub mod error;
pub mod expand;
pub mod generate;
pub mod msccl;
pub mod sim;
pub mod trace;
pub mod units;
pub mod validate;

pub use error::{Error, NodeRef, Result};
pub use generate::{generate, AlgoSpec, Algorithm};
pub use trace::{
    load_trace, save_trace, ClaimedCollective, CollectiveKind, CompOp, NodeAttrs, NodeKind, Trace,
    TraceClass, TraceNode,
};

use std::fmt;
use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// A node on a specific rank, used to point at offending nodes in errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeRef {
    pub rank: usize,
    pub id: u64,
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rank {} node {}", self.rank, self.id)
    }
}

fn join_nodes(nodes: &[NodeRef]) -> String {
    nodes
        .iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn join_ids(ids: &[u64]) -> String {
    ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" -> ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invariant violated on {node}: {message}")]
    Invariant { node: NodeRef, message: String },

    #[error("invariant violated: {0}")]
    TraceInvariant(String),

    #[error("dependency cycle on rank {rank}: {}", join_ids(.nodes))]
    Cycle { rank: usize, nodes: Vec<u64> },

    #[error("invalid algorithm spec: {0}")]
    Spec(String),

    #[error("xml error at line {line}, column {column}: {message}")]
    Xml {
        line: u32,
        column: u32,
        message: String,
    },

    #[error("msccl schema error at line {line}: {message}")]
    MscclSchema { line: u32, message: String },

    #[error("dangling dependency reference at line {line}: {message}")]
    Ref { line: u32, message: String },

    #[error("send/recv mismatch: {0}")]
    Match(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("execution stuck; pending frontier: {}", join_nodes(.frontier))]
    Stuck { frontier: Vec<NodeRef> },

    #[error("simulation deadlocked; pending frontier: {}", join_nodes(.frontier))]
    Deadlock { frontier: Vec<NodeRef> },

    #[error("trace contains an unexpanded COMM_COLL node ({node}); expand it first")]
    UnexpandedCollective { node: NodeRef },

    #[error("binding error: {0}")]
    Binding(String),

    #[error("tag namespace exhausted: {0}")]
    Overflow(String),

    #[error("no route from node {src} to node {dst}")]
    Unreachable { src: usize, dst: usize },

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sweep cell ({topology}, {size} bytes) failed: {source}")]
    SweepCell {
        topology: String,
        size: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invariant(rank: usize, id: u64, message: impl Into<String>) -> Self {
        Error::Invariant {
            node: NodeRef { rank, id },
            message: message.into(),
        }
    }

    /// True for every error class that load-time invariant checking can raise.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(
            self,
            Error::Invariant { .. } | Error::TraceInvariant(_) | Error::Cycle { .. }
        )
    }
}

//! The shared graph representation for workloads and collective algorithms.
//!
//! A [`Trace`] holds one node list per rank. Nodes on a rank form a DAG
//! through their `deps`; ordering across ranks is expressed only by matching
//! `COMM_SEND`/`COMM_RECV` pairs on `(src, dst, tag)`.

mod check;
mod json;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use check::toposort_nodes;
pub use json::{load_trace, parse_trace, save_trace, to_canonical_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    CommSend,
    CommRecv,
    Comp,
    CommColl,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::CommSend => "COMM_SEND",
            NodeKind::CommRecv => "COMM_RECV",
            NodeKind::Comp => "COMP",
            NodeKind::CommColl => "COMM_COLL",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "COMM_SEND" => Ok(NodeKind::CommSend),
            "COMM_RECV" => Ok(NodeKind::CommRecv),
            "COMP" => Ok(NodeKind::Comp),
            "COMM_COLL" => Ok(NodeKind::CommColl),
            other => Err(Error::Schema(format!("unknown node kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CollectiveKind {
    AllReduce,
    AllGather,
    ReduceScatter,
    Broadcast,
}

impl CollectiveKind {
    pub const ALL: [CollectiveKind; 4] = [
        CollectiveKind::AllReduce,
        CollectiveKind::AllGather,
        CollectiveKind::ReduceScatter,
        CollectiveKind::Broadcast,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CollectiveKind::AllReduce => "ALL_REDUCE",
            CollectiveKind::AllGather => "ALL_GATHER",
            CollectiveKind::ReduceScatter => "REDUCE_SCATTER",
            CollectiveKind::Broadcast => "BROADCAST",
        }
    }
}

impl fmt::Display for CollectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CollectiveKind {
    type Err = Error;

    /// Accepts the canonical upper-case names as well as the lower-case
    /// spellings used by MSCCL-IR and the command line (`allreduce`,
    /// `all_reduce`, `all-reduce`).
    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| *c != '_' && *c != '-')
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match norm.as_str() {
            "allreduce" => Ok(CollectiveKind::AllReduce),
            "allgather" => Ok(CollectiveKind::AllGather),
            "reducescatter" => Ok(CollectiveKind::ReduceScatter),
            "broadcast" => Ok(CollectiveKind::Broadcast),
            _ => Err(Error::Schema(format!("unknown collective kind {s:?}"))),
        }
    }
}

/// Operation performed by a `COMP` node. The vocabulary is open: anything
/// other than the three named operations is carried through as an opaque
/// string and treated as plain compute.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CompOp {
    Reduce,
    Copy,
    Nop,
    Other(String),
}

impl CompOp {
    pub fn as_str(&self) -> &str {
        match self {
            CompOp::Reduce => "REDUCE",
            CompOp::Copy => "COPY",
            CompOp::Nop => "NOP",
            CompOp::Other(s) => s,
        }
    }
}

impl From<&str> for CompOp {
    fn from(s: &str) -> Self {
        match s {
            "REDUCE" => CompOp::Reduce,
            "COPY" => CompOp::Copy,
            "NOP" => CompOp::Nop,
            other => CompOp::Other(other.to_string()),
        }
    }
}

/// Buffer namespace of a chunk slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Buffer {
    /// The collective's user buffer (input and output alias it).
    Data,
    Scratch,
    /// Landing area for a received chunk that is reduced immediately.
    Tmp,
}

impl Buffer {
    pub fn as_str(self) -> &'static str {
        match self {
            Buffer::Data => "data",
            Buffer::Scratch => "scratch",
            Buffer::Tmp => "tmp",
        }
    }
}

impl FromStr for Buffer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "data" => Ok(Buffer::Data),
            "scratch" => Ok(Buffer::Scratch),
            "tmp" => Ok(Buffer::Tmp),
            other => Err(Error::Schema(format!("unknown chunk buffer {other:?}"))),
        }
    }
}

/// One chunk-sized location in a rank's memory. Used only by the semantic
/// validator; the simulator ignores it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Slot {
    pub buf: Buffer,
    pub index: u32,
}

impl Slot {
    pub fn data(index: u32) -> Self {
        Slot {
            buf: Buffer::Data,
            index,
        }
    }

    pub fn scratch(index: u32) -> Self {
        Slot {
            buf: Buffer::Scratch,
            index,
        }
    }

    pub fn tmp(index: u32) -> Self {
        Slot {
            buf: Buffer::Tmp,
            index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeAttrs {
    Send {
        dst_rank: usize,
        comm_size: u64,
        tag: u64,
        /// Slots whose contents are transmitted, in order.
        chunks: Option<Vec<Slot>>,
    },
    Recv {
        src_rank: usize,
        comm_size: u64,
        tag: u64,
        /// Slots the received contents are written to, in order.
        chunks: Option<Vec<Slot>>,
    },
    Comp {
        comp_size: u64,
        op: CompOp,
        /// Destination slots.
        chunks: Option<Vec<Slot>>,
        /// Source slots. For `REDUCE` this is a whole number of groups of
        /// `chunks.len()` slots, and destination `i` becomes the union of
        /// source `i` of every group. For `COPY` it has the same length as
        /// `chunks`.
        src_chunks: Option<Vec<Slot>>,
    },
    Coll {
        coll_kind: CollectiveKind,
        comm_size: u64,
    },
}

impl NodeAttrs {
    pub fn kind(&self) -> NodeKind {
        match self {
            NodeAttrs::Send { .. } => NodeKind::CommSend,
            NodeAttrs::Recv { .. } => NodeKind::CommRecv,
            NodeAttrs::Comp { .. } => NodeKind::Comp,
            NodeAttrs::Coll { .. } => NodeKind::CommColl,
        }
    }

    pub fn send(dst_rank: usize, comm_size: u64, tag: u64) -> Self {
        NodeAttrs::Send {
            dst_rank,
            comm_size,
            tag,
            chunks: None,
        }
    }

    pub fn recv(src_rank: usize, comm_size: u64, tag: u64) -> Self {
        NodeAttrs::Recv {
            src_rank,
            comm_size,
            tag,
            chunks: None,
        }
    }

    pub fn comp(comp_size: u64, op: CompOp) -> Self {
        NodeAttrs::Comp {
            comp_size,
            op,
            chunks: None,
            src_chunks: None,
        }
    }

    pub fn coll(coll_kind: CollectiveKind, comm_size: u64) -> Self {
        NodeAttrs::Coll {
            coll_kind,
            comm_size,
        }
    }

    /// Peer rank for point-to-point nodes.
    pub fn peer(&self) -> Option<usize> {
        match self {
            NodeAttrs::Send { dst_rank, .. } => Some(*dst_rank),
            NodeAttrs::Recv { src_rank, .. } => Some(*src_rank),
            _ => None,
        }
    }

    pub fn tag(&self) -> Option<u64> {
        match self {
            NodeAttrs::Send { tag, .. } | NodeAttrs::Recv { tag, .. } => Some(*tag),
            _ => None,
        }
    }

    /// Bytes moved or processed by the node.
    pub fn size(&self) -> u64 {
        match self {
            NodeAttrs::Send { comm_size, .. }
            | NodeAttrs::Recv { comm_size, .. }
            | NodeAttrs::Coll { comm_size, .. } => *comm_size,
            NodeAttrs::Comp { comp_size, .. } => *comp_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceNode {
    pub id: u64,
    pub name: String,
    /// Ids of nodes on the same rank. Kept sorted and deduplicated by
    /// [`Trace`] construction.
    pub deps: Vec<u64>,
    pub attrs: NodeAttrs,
}

impl TraceNode {
    pub fn new(id: u64, name: impl Into<String>, deps: Vec<u64>, attrs: NodeAttrs) -> Self {
        TraceNode {
            id,
            name: name.into(),
            deps,
            attrs,
        }
    }

    pub fn kind(&self) -> NodeKind {
        self.attrs.kind()
    }
}

/// The collective a collective-class trace claims to implement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClaimedCollective {
    pub kind: CollectiveKind,
    /// Per-rank buffer size for ALL_REDUCE / REDUCE_SCATTER, per-rank input
    /// size for ALL_GATHER / BROADCAST.
    pub comm_size: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraceClass {
    Collective,
    Workload,
}

impl TraceClass {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceClass::Collective => "collective",
            TraceClass::Workload => "workload",
        }
    }
}

/// An immutable, invariant-checked trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    class: TraceClass,
    num_ranks: usize,
    claimed: Option<ClaimedCollective>,
    ranks: Vec<Vec<TraceNode>>,
}

impl Trace {
    /// Builds a collective-class trace and checks every invariant.
    pub fn collective(
        claimed: Option<ClaimedCollective>,
        ranks: Vec<Vec<TraceNode>>,
    ) -> Result<Self> {
        let trace = Trace::from_parts_unchecked(TraceClass::Collective, claimed, ranks);
        trace.check_invariants()?;
        Ok(trace)
    }

    /// Builds a workload-class trace and checks every invariant.
    pub fn workload(ranks: Vec<Vec<TraceNode>>) -> Result<Self> {
        let trace = Trace::from_parts_unchecked(TraceClass::Workload, None, ranks);
        trace.check_invariants()?;
        Ok(trace)
    }

    pub fn new(
        class: TraceClass,
        claimed: Option<ClaimedCollective>,
        ranks: Vec<Vec<TraceNode>>,
    ) -> Result<Self> {
        let trace = Trace::from_parts_unchecked(class, claimed, ranks);
        trace.check_invariants()?;
        Ok(trace)
    }

    /// Normalizes node order and dependency lists without checking any
    /// invariant. Consumers that rely on a valid trace should call
    /// [`Trace::check_invariants`] first; the validator and the mutation
    /// tests use this to look at deliberately broken graphs.
    pub fn from_parts_unchecked(
        class: TraceClass,
        claimed: Option<ClaimedCollective>,
        mut ranks: Vec<Vec<TraceNode>>,
    ) -> Self {
        for nodes in &mut ranks {
            nodes.sort_by_key(|n| n.id);
            for n in nodes.iter_mut() {
                n.deps.sort_unstable();
                n.deps.dedup();
            }
        }
        Trace {
            class,
            num_ranks: ranks.len(),
            claimed,
            ranks,
        }
    }

    pub fn into_parts(self) -> (TraceClass, Option<ClaimedCollective>, Vec<Vec<TraceNode>>) {
        (self.class, self.claimed, self.ranks)
    }

    pub fn class(&self) -> TraceClass {
        self.class
    }

    pub fn num_ranks(&self) -> usize {
        self.num_ranks
    }

    pub fn claimed_collective(&self) -> Option<ClaimedCollective> {
        self.claimed
    }

    /// Nodes of `rank`, in ascending id order.
    pub fn rank(&self, rank: usize) -> &[TraceNode] {
        &self.ranks[rank]
    }

    pub fn ranks(&self) -> &[Vec<TraceNode>] {
        &self.ranks
    }

    pub fn node(&self, rank: usize, id: u64) -> Option<&TraceNode> {
        let nodes = self.ranks.get(rank)?;
        nodes
            .binary_search_by_key(&id, |n| n.id)
            .ok()
            .map(|i| &nodes[i])
    }

    pub fn num_nodes(&self) -> usize {
        self.ranks.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.num_nodes() == 0
    }

    pub fn has_collective_nodes(&self) -> bool {
        self.ranks
            .iter()
            .flatten()
            .any(|n| n.kind() == NodeKind::CommColl)
    }

    /// Orders `rank`'s node ids so that every node follows its deps.
    /// Among ready nodes the smallest id goes first.
    pub fn toposort_rank(&self, rank: usize) -> Result<Vec<u64>> {
        if rank >= self.num_ranks {
            return Err(Error::TraceInvariant(format!(
                "rank {rank} out of range (num_ranks = {})",
                self.num_ranks
            )));
        }
        toposort_nodes(rank, &self.ranks[rank])
    }

    pub fn check_invariants(&self) -> Result<()> {
        check::check_trace(self)
    }
}

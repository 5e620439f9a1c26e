//! Collective algorithm generators.
//!
//! Every generated rank is built from two serialized streams: an outgoing
//! stream of sends to the next peer and an incoming stream of receives (and
//! the reductions they feed). A send additionally depends on the node that
//! produced the current value of the chunk it forwards. This is the graph an
//! MSCCL program with one send threadblock and one receive threadblock per
//! rank converts to, so generated and converted traces line up node for node.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::trace::{
    ClaimedCollective, CollectiveKind, CompOp, NodeAttrs, Slot, Trace, TraceNode,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    RingAllReduce,
    RingAllGather,
    RecursiveDoublingAllGather,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Algorithm::RingAllReduce,
        Algorithm::RingAllGather,
        Algorithm::RecursiveDoublingAllGather,
    ];

    pub fn collective(self) -> CollectiveKind {
        match self {
            Algorithm::RingAllReduce => CollectiveKind::AllReduce,
            Algorithm::RingAllGather | Algorithm::RecursiveDoublingAllGather => {
                CollectiveKind::AllGather
            }
        }
    }

    /// Command-line spelling.
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::RingAllReduce => "ring-allreduce",
            Algorithm::RingAllGather => "ring-allgather",
            Algorithm::RecursiveDoublingAllGather => "rd-allgather",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "ring-allreduce" | "ring-all-reduce" => Ok(Algorithm::RingAllReduce),
            "ring-allgather" | "ring-all-gather" => Ok(Algorithm::RingAllGather),
            "rd-allgather" | "recursive-doubling-allgather" => {
                Ok(Algorithm::RecursiveDoublingAllGather)
            }
            _ => Err(Error::Spec(format!(
                "unknown algorithm {s:?} (expected ring-allreduce, ring-allgather or rd-allgather)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AlgoSpec {
    pub algorithm: Algorithm,
    pub num_ranks: usize,
    /// Per-rank buffer size for all-reduce, per-rank input size for
    /// all-gather.
    pub comm_size: u64,
}

impl AlgoSpec {
    pub fn new(algorithm: Algorithm, num_ranks: usize, comm_size: u64) -> Self {
        AlgoSpec {
            algorithm,
            num_ranks,
            comm_size,
        }
    }

    pub fn check(&self) -> Result<()> {
        let n = self.num_ranks;
        if n == 0 {
            return Err(Error::Spec("num_ranks must be at least 1".into()));
        }
        if u32::try_from(n).is_err() {
            return Err(Error::Spec(format!("num_ranks {n} is too large")));
        }
        if self.comm_size == 0 {
            return Err(Error::Spec("comm_size must be positive".into()));
        }
        match self.algorithm {
            Algorithm::RingAllReduce if !self.comm_size.is_multiple_of(n as u64) => Err(Error::Spec(
                format!(
                    "ring all-reduce needs comm_size divisible by num_ranks ({} % {n} != 0)",
                    self.comm_size
                ),
            )),
            Algorithm::RecursiveDoublingAllGather if !n.is_power_of_two() => Err(Error::Spec(
                format!("recursive doubling needs a power-of-two rank count, got {n}"),
            )),
            Algorithm::RecursiveDoublingAllGather
                if self
                    .comm_size
                    .checked_mul(n as u64)
                    .is_none() =>
            {
                Err(Error::Spec("comm_size * num_ranks overflows".into()))
            }
            _ => Ok(()),
        }
    }
}

pub fn generate(spec: &AlgoSpec) -> Result<Trace> {
    spec.check()?;
    let n = spec.num_ranks;
    let ranks = (0..n)
        .map(|r| match spec.algorithm {
            Algorithm::RingAllReduce => ring_all_reduce_rank(r, n, spec.comm_size),
            Algorithm::RingAllGather => ring_all_gather_rank(r, n, spec.comm_size),
            Algorithm::RecursiveDoublingAllGather => rd_all_gather_rank(r, n, spec.comm_size),
        })
        .collect();
    let claim = ClaimedCollective {
        kind: spec.algorithm.collective(),
        comm_size: spec.comm_size,
    };
    Trace::collective(Some(claim), ranks)
}

/// Appends nodes with consecutive ids.
#[derive(Default)]
struct RankBuilder {
    nodes: Vec<TraceNode>,
}

impl RankBuilder {
    fn push(&mut self, name: String, deps: Vec<u64>, attrs: NodeAttrs) -> u64 {
        let id = self.nodes.len() as u64;
        self.nodes.push(TraceNode::new(id, name, deps, attrs));
        id
    }

    fn send(&mut self, name: String, deps: Vec<u64>, dst: usize, size: u64, tag: u64, chunks: Vec<Slot>) -> u64 {
        self.push(
            name,
            deps,
            NodeAttrs::Send {
                dst_rank: dst,
                comm_size: size,
                tag,
                chunks: Some(chunks),
            },
        )
    }

    fn recv(&mut self, name: String, deps: Vec<u64>, src: usize, size: u64, tag: u64, chunks: Vec<Slot>) -> u64 {
        self.push(
            name,
            deps,
            NodeAttrs::Recv {
                src_rank: src,
                comm_size: size,
                tag,
                chunks: Some(chunks),
            },
        )
    }
}

fn deps(ids: &[Option<u64>]) -> Vec<u64> {
    ids.iter().flatten().copied().collect()
}

fn ring_chunk(r: usize, back: usize, n: usize) -> u32 {
    ((r + n - back % n) % n) as u32
}

/// Reduce-scatter followed by all-gather over N chunks of S/N bytes.
fn ring_all_reduce_rank(r: usize, n: usize, size: u64) -> Vec<TraceNode> {
    let mut b = RankBuilder::default();
    if n == 1 {
        return b.nodes;
    }
    let c = size / n as u64;
    let (next, prev) = ((r + 1) % n, (r + n - 1) % n);
    let steps = n - 1;

    let mut last_send: Option<u64> = None;
    let mut last_in: Option<u64> = None;
    for k in 0..steps {
        let out_chunk = ring_chunk(r, k, n);
        // The chunk forwarded at step k was reduced at step k-1.
        let s = b.send(
            format!("rs_send_{k}_c{out_chunk}"),
            deps(&[last_send, last_in]),
            next,
            c,
            k as u64,
            vec![Slot::data(out_chunk)],
        );
        last_send = Some(s);

        let in_chunk = ring_chunk(r, k + 1, n);
        let rv = b.recv(
            format!("rs_recv_{k}_c{in_chunk}"),
            deps(&[last_in]),
            prev,
            c,
            k as u64,
            vec![Slot::scratch(in_chunk)],
        );
        let red = b.push(
            format!("rs_reduce_{k}_c{in_chunk}"),
            vec![rv],
            NodeAttrs::Comp {
                comp_size: c,
                op: CompOp::Reduce,
                chunks: Some(vec![Slot::data(in_chunk)]),
                src_chunks: Some(vec![Slot::data(in_chunk), Slot::scratch(in_chunk)]),
            },
        );
        last_in = Some(red);
    }

    // Rank r now owns the fully reduced chunk r+1.
    for k in 0..steps {
        let out_chunk = ring_chunk(r + 1, k, n);
        let s = b.send(
            format!("ag_send_{k}_c{out_chunk}"),
            deps(&[last_send, last_in]),
            next,
            c,
            (steps + k) as u64,
            vec![Slot::data(out_chunk)],
        );
        last_send = Some(s);

        let in_chunk = ring_chunk(r, k, n);
        let rv = b.recv(
            format!("ag_recv_{k}_c{in_chunk}"),
            deps(&[last_in]),
            prev,
            c,
            (steps + k) as u64,
            vec![Slot::data(in_chunk)],
        );
        last_in = Some(rv);
    }
    b.nodes
}

/// N-1 forwarding steps; each rank starts with its own chunk in slot r.
fn ring_all_gather_rank(r: usize, n: usize, size: u64) -> Vec<TraceNode> {
    let mut b = RankBuilder::default();
    let (next, prev) = ((r + 1) % n, (r + n - 1) % n);
    let mut last_send: Option<u64> = None;
    let mut last_in: Option<u64> = None;
    for k in 0..n.saturating_sub(1) {
        let out_chunk = ring_chunk(r, k, n);
        let s = b.send(
            format!("ag_send_{k}_c{out_chunk}"),
            deps(&[last_send, last_in]),
            next,
            size,
            k as u64,
            vec![Slot::data(out_chunk)],
        );
        last_send = Some(s);
        let in_chunk = ring_chunk(r, k + 1, n);
        let rv = b.recv(
            format!("ag_recv_{k}_c{in_chunk}"),
            deps(&[last_in]),
            prev,
            size,
            k as u64,
            vec![Slot::data(in_chunk)],
        );
        last_in = Some(rv);
    }
    b.nodes
}

/// Round j exchanges the aligned block of 2^j chunks with rank r XOR 2^j.
fn rd_all_gather_rank(r: usize, n: usize, size: u64) -> Vec<TraceNode> {
    let mut b = RankBuilder::default();
    let rounds = n.trailing_zeros() as usize;
    let mut last_send: Option<u64> = None;
    let mut last_in: Option<u64> = None;
    for j in 0..rounds {
        let width = 1usize << j;
        let peer = r ^ width;
        let block = |x: usize| -> Vec<Slot> {
            let base = (x >> j) << j;
            (base..base + width).map(|i| Slot::data(i as u32)).collect()
        };
        let bytes = size * width as u64;
        let s = b.send(
            format!("rd_send_{j}_to{peer}"),
            deps(&[last_send, last_in]),
            peer,
            bytes,
            j as u64,
            block(r),
        );
        last_send = Some(s);
        let rv = b.recv(
            format!("rd_recv_{j}_from{peer}"),
            deps(&[last_in]),
            peer,
            bytes,
            j as u64,
            block(peer),
        );
        last_in = Some(rv);
    }
    b.nodes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::NodeKind;

    const MIB: u64 = 1 << 20;

    fn kind_counts(nodes: &[TraceNode]) -> (usize, usize, usize) {
        let count = |k| nodes.iter().filter(|n| n.kind() == k).count();
        (
            count(NodeKind::CommSend),
            count(NodeKind::CommRecv),
            count(NodeKind::Comp),
        )
    }

    #[test]
    fn single_rank_all_reduce_is_empty() {
        let t = generate(&AlgoSpec::new(Algorithm::RingAllReduce, 1, 12345)).unwrap();
        assert_eq!(t.num_ranks(), 1);
        assert_eq!(t.num_nodes(), 0);
    }

    #[test]
    fn ring_all_reduce_four_ranks_node_counts() {
        let t = generate(&AlgoSpec::new(Algorithm::RingAllReduce, 4, 4 * MIB)).unwrap();
        for r in 0..4 {
            let nodes = t.rank(r);
            assert_eq!(nodes.len(), 15);
            assert_eq!(kind_counts(nodes), (6, 6, 3));
            for n in nodes {
                if n.kind() != NodeKind::Comp {
                    assert_eq!(n.attrs.size(), MIB);
                }
            }
        }
    }

    #[test]
    fn ring_all_gather_four_ranks_node_counts() {
        let t = generate(&AlgoSpec::new(Algorithm::RingAllGather, 4, MIB)).unwrap();
        for r in 0..4 {
            assert_eq!(kind_counts(t.rank(r)), (3, 3, 0));
            assert!(t.rank(r).iter().all(|n| n.attrs.size() == MIB));
        }
    }

    #[test]
    fn recursive_doubling_sizes_double() {
        let t = generate(&AlgoSpec::new(Algorithm::RecursiveDoublingAllGather, 8, MIB)).unwrap();
        for r in 0..8 {
            let mut sends: Vec<u64> = t
                .rank(r)
                .iter()
                .filter(|n| n.kind() == NodeKind::CommSend)
                .map(|n| n.attrs.size())
                .collect();
            sends.sort();
            assert_eq!(sends, vec![MIB, 2 * MIB, 4 * MIB]);
            assert_eq!(kind_counts(t.rank(r)), (3, 3, 0));
        }
    }

    #[test]
    fn spec_errors() {
        let bad = [
            AlgoSpec::new(Algorithm::RecursiveDoublingAllGather, 6, MIB),
            AlgoSpec::new(Algorithm::RingAllReduce, 3, 100),
            AlgoSpec::new(Algorithm::RingAllGather, 0, 100),
            AlgoSpec::new(Algorithm::RingAllGather, 4, 0),
        ];
        for spec in bad {
            assert!(matches!(generate(&spec), Err(Error::Spec(_))), "{spec:?}");
        }
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
        assert!("tree".parse::<Algorithm>().is_err());
    }
}

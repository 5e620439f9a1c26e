use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use super::{NodeAttrs, Trace, TraceClass, TraceNode};
use crate::error::{Error, Result};

/// Kahn's algorithm over one rank's nodes, smallest ready id first.
///
/// `nodes` must be sorted by id (as stored in [`Trace`]).
pub fn toposort_nodes(rank: usize, nodes: &[TraceNode]) -> Result<Vec<u64>> {
    let index = index_nodes(rank, nodes)?;
    let mut indegree = vec![0usize; nodes.len()];
    let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for (i, n) in nodes.iter().enumerate() {
        for dep in &n.deps {
            let Some(&d) = index.get(dep) else {
                return Err(Error::invariant(
                    rank,
                    n.id,
                    format!("depends on unknown node {dep} (deps must name nodes on the same rank)"),
                ));
            };
            indegree[i] += 1;
            dependents[d].push(i);
        }
    }

    let mut ready: BinaryHeap<Reverse<(u64, usize)>> = indegree
        .iter()
        .enumerate()
        .filter(|(_, d)| **d == 0)
        .map(|(i, _)| Reverse((nodes[i].id, i)))
        .collect();
    let mut order = Vec::with_capacity(nodes.len());
    while let Some(Reverse((id, i))) = ready.pop() {
        order.push(id);
        for &j in &dependents[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                ready.push(Reverse((nodes[j].id, j)));
            }
        }
    }

    if order.len() == nodes.len() {
        return Ok(order);
    }
    Err(Error::Cycle {
        rank,
        nodes: find_cycle(nodes, &index, &indegree),
    })
}

fn index_nodes(rank: usize, nodes: &[TraceNode]) -> Result<HashMap<u64, usize>> {
    let mut index = HashMap::with_capacity(nodes.len());
    for (i, n) in nodes.iter().enumerate() {
        if index.insert(n.id, i).is_some() {
            return Err(Error::invariant(rank, n.id, "duplicate node id"));
        }
    }
    Ok(index)
}

/// Every node left with a positive indegree after Kahn's pass has at least
/// one dep that is also left, so walking deps from any of them must revisit
/// a node.
fn find_cycle(nodes: &[TraceNode], index: &HashMap<u64, usize>, indegree: &[usize]) -> Vec<u64> {
    let stuck = |i: usize| indegree[i] > 0;
    let start = (0..nodes.len()).find(|&i| stuck(i)).expect("cycle exists");
    let mut pos_in_path: HashMap<usize, usize> = HashMap::new();
    let mut path: Vec<usize> = Vec::new();
    let mut cur = start;
    loop {
        if let Some(&p) = pos_in_path.get(&cur) {
            let mut cycle: Vec<u64> = path[p..].iter().map(|&i| nodes[i].id).collect();
            let min_pos = cycle
                .iter()
                .enumerate()
                .min_by_key(|(_, id)| **id)
                .map(|(k, _)| k)
                .unwrap_or(0);
            cycle.rotate_left(min_pos);
            return cycle;
        }
        pos_in_path.insert(cur, path.len());
        path.push(cur);
        cur = nodes[cur]
            .deps
            .iter()
            .map(|d| index[d])
            .find(|&j| stuck(j))
            .expect("stuck node has a stuck dep");
    }
}

pub(super) fn check_trace(trace: &Trace) -> Result<()> {
    let n = trace.num_ranks();
    if n == 0 {
        return Err(Error::TraceInvariant("num_ranks must be positive".into()));
    }
    if trace.class() == TraceClass::Workload && trace.claimed_collective().is_some() {
        return Err(Error::TraceInvariant(
            "workload traces carry no claimed_collective".into(),
        ));
    }

    for (rank, nodes) in trace.ranks().iter().enumerate() {
        for node in nodes {
            check_node(trace.class(), n, rank, node)?;
        }
        toposort_nodes(rank, nodes)?;
    }

    check_matching(trace)?;
    if trace.class() == TraceClass::Workload {
        check_spmd(trace)?;
    }
    Ok(())
}

fn check_node(class: TraceClass, num_ranks: usize, rank: usize, node: &TraceNode) -> Result<()> {
    let fail = |msg: String| Err(Error::invariant(rank, node.id, msg));
    match (&node.attrs, class) {
        (NodeAttrs::Coll { .. }, TraceClass::Collective) => {
            return fail("COMM_COLL nodes may only appear in workload traces".into())
        }
        (NodeAttrs::Send { .. } | NodeAttrs::Recv { .. }, TraceClass::Workload) => {
            return fail(format!(
                "{} nodes may not appear in workload traces",
                node.kind()
            ))
        }
        _ => {}
    }
    match &node.attrs {
        NodeAttrs::Send {
            dst_rank,
            comm_size,
            ..
        } => {
            if *dst_rank >= num_ranks {
                return fail(format!("dst_rank {dst_rank} out of range"));
            }
            if *dst_rank == rank {
                return fail("COMM_SEND to its own rank".into());
            }
            if *comm_size == 0 {
                return fail("COMM_SEND with comm_size 0".into());
            }
        }
        NodeAttrs::Recv {
            src_rank,
            comm_size,
            ..
        } => {
            if *src_rank >= num_ranks {
                return fail(format!("src_rank {src_rank} out of range"));
            }
            if *src_rank == rank {
                return fail("COMM_RECV from its own rank".into());
            }
            if *comm_size == 0 {
                return fail("COMM_RECV with comm_size 0".into());
            }
        }
        NodeAttrs::Comp { .. } | NodeAttrs::Coll { .. } => {}
    }
    Ok(())
}

type MsgKey = (usize, usize, u64);

fn check_matching(trace: &Trace) -> Result<()> {
    let mut sends: HashMap<MsgKey, (u64, u64)> = HashMap::new();
    let mut recvs: HashMap<MsgKey, (u64, u64)> = HashMap::new();
    for (rank, nodes) in trace.ranks().iter().enumerate() {
        for node in nodes {
            match node.attrs {
                NodeAttrs::Send {
                    dst_rank,
                    comm_size,
                    tag,
                    ..
                } => {
                    if sends
                        .insert((rank, dst_rank, tag), (node.id, comm_size))
                        .is_some()
                    {
                        return Err(Error::invariant(
                            rank,
                            node.id,
                            format!("duplicate tag {tag} for messages {rank}->{dst_rank}"),
                        ));
                    }
                }
                NodeAttrs::Recv {
                    src_rank,
                    comm_size,
                    tag,
                    ..
                }
                    if recvs
                        .insert((src_rank, rank, tag), (node.id, comm_size))
                        .is_some()
                    => {
                        return Err(Error::invariant(
                            rank,
                            node.id,
                            format!("duplicate tag {tag} for messages {src_rank}->{rank}"),
                        ));
                    }
                _ => {}
            }
        }
    }

    for (rank, nodes) in trace.ranks().iter().enumerate() {
        for node in nodes {
            match node.attrs {
                NodeAttrs::Send {
                    dst_rank,
                    comm_size,
                    tag,
                    ..
                } => match recvs.get(&(rank, dst_rank, tag)) {
                    None => {
                        return Err(Error::invariant(
                            rank,
                            node.id,
                            format!(
                                "unmatched send: no COMM_RECV(src_rank={rank}, tag={tag}) on rank {dst_rank}"
                            ),
                        ))
                    }
                    Some(&(rid, rsize)) if rsize != comm_size => {
                        return Err(Error::invariant(
                            rank,
                            node.id,
                            format!(
                                "size mismatch: send of {comm_size} bytes matched by rank {dst_rank} node {rid} expecting {rsize}"
                            ),
                        ))
                    }
                    Some(_) => {}
                },
                NodeAttrs::Recv { src_rank, tag, .. }
                    if !sends.contains_key(&(src_rank, rank, tag)) => {
                        return Err(Error::invariant(
                            rank,
                            node.id,
                            format!(
                                "unmatched recv: no COMM_SEND(dst_rank={rank}, tag={tag}) on rank {src_rank}"
                            ),
                        ));
                    }
                _ => {}
            }
        }
    }
    Ok(())
}

fn check_spmd(trace: &Trace) -> Result<()> {
    let mut reference: Option<Vec<(super::CollectiveKind, u64)>> = None;
    for (rank, nodes) in trace.ranks().iter().enumerate() {
        let order = toposort_nodes(rank, nodes)?;
        let seq: Vec<_> = order
            .iter()
            .filter_map(|id| match trace.node(rank, *id).map(|n| &n.attrs) {
                Some(NodeAttrs::Coll {
                    coll_kind,
                    comm_size,
                }) => Some((*coll_kind, *comm_size)),
                _ => None,
            })
            .collect();
        match &reference {
            None => reference = Some(seq),
            Some(r) if *r != seq => {
                return Err(Error::TraceInvariant(format!(
                    "rank {rank} issues a different COMM_COLL sequence than rank 0"
                )))
            }
            Some(_) => {}
        }
    }
    Ok(())
}

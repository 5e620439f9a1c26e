//! Structural equivalence of traces up to node relabeling.

use std::collections::{BTreeSet, HashMap};

use crate::error::Result;
use crate::trace::{
    toposort_nodes, ClaimedCollective, CollectiveKind, NodeAttrs, NodeKind, Trace, TraceClass,
    TraceNode,
};

/// A node with its id replaced by its position in canonical order. Names,
/// raw tag values and chunk annotations are not part of the comparison;
/// tags only contribute their rank among same-peer, same-kind messages.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalNode {
    pub kind: NodeKind,
    pub peer: Option<usize>,
    pub size: u64,
    pub tag_order: Option<usize>,
    pub op: Option<String>,
    pub coll: Option<CollectiveKind>,
    /// Canonical positions of the deps, ascending.
    pub deps: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalTrace {
    pub class: TraceClass,
    pub claimed: Option<ClaimedCollective>,
    pub ranks: Vec<Vec<CanonicalNode>>,
}

fn tag_orders(nodes: &[TraceNode]) -> HashMap<u64, usize> {
    let mut streams: HashMap<(NodeKind, usize), Vec<(u64, u64)>> = HashMap::new();
    for n in nodes {
        if let (Some(peer), Some(tag)) = (n.attrs.peer(), n.attrs.tag()) {
            streams.entry((n.kind(), peer)).or_default().push((tag, n.id));
        }
    }
    let mut out = HashMap::new();
    for mut msgs in streams.into_values() {
        msgs.sort_unstable();
        for (pos, (_, id)) in msgs.into_iter().enumerate() {
            out.insert(id, pos);
        }
    }
    out
}

fn canonical_rank(rank: usize, nodes: &[TraceNode]) -> Result<Vec<CanonicalNode>> {
    toposort_nodes(rank, nodes)?;

    let index: HashMap<u64, usize> = nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
    let tags = tag_orders(nodes);
    let mut pending: Vec<usize> = nodes.iter().map(|n| n.deps.len()).collect();
    let mut dependents = vec![Vec::new(); nodes.len()];
    for (i, n) in nodes.iter().enumerate() {
        for d in &n.deps {
            dependents[index[d]].push(i);
        }
    }

    let mut label: Vec<Option<usize>> = vec![None; nodes.len()];
    let describe = |i: usize, label: &[Option<usize>]| -> CanonicalNode {
        let n = &nodes[i];
        let mut deps: Vec<usize> = n
            .deps
            .iter()
            .map(|d| label[index[d]].expect("deps are labelled before dependents"))
            .collect();
        deps.sort_unstable();
        let (op, coll) = match &n.attrs {
            NodeAttrs::Comp { op, .. } => (Some(op.as_str().to_string()), None),
            NodeAttrs::Coll { coll_kind, .. } => (None, Some(*coll_kind)),
            _ => (None, None),
        };
        CanonicalNode {
            kind: n.kind(),
            peer: n.attrs.peer(),
            size: n.attrs.size(),
            tag_order: tags.get(&n.id).copied(),
            op,
            coll,
            deps,
        }
    };

    // Nodes with identical descriptions fall back to id order, which is
    // stable under any order-preserving relabeling.
    let mut ready: BTreeSet<(CanonicalNode, u64, usize)> = BTreeSet::new();
    for i in (0..nodes.len()).filter(|&i| pending[i] == 0) {
        ready.insert((describe(i, &label), nodes[i].id, i));
    }
    let mut out = Vec::with_capacity(nodes.len());
    while let Some((desc, _, i)) = ready.pop_first() {
        label[i] = Some(out.len());
        out.push(desc);
        for &j in &dependents[i] {
            pending[j] -= 1;
            if pending[j] == 0 {
                ready.insert((describe(j, &label), nodes[j].id, j));
            }
        }
    }
    Ok(out)
}

pub fn canonical_form(trace: &Trace) -> Result<CanonicalTrace> {
    let ranks = trace
        .ranks()
        .iter()
        .enumerate()
        .map(|(r, nodes)| canonical_rank(r, nodes))
        .collect::<Result<Vec<_>>>()?;
    Ok(CanonicalTrace {
        class: trace.class(),
        claimed: trace.claimed_collective(),
        ranks,
    })
}

/// True when both traces have the same canonical form.
pub fn isomorphic(a: &Trace, b: &Trace) -> Result<bool> {
    Ok(canonical_form(a)? == canonical_form(b)?)
}

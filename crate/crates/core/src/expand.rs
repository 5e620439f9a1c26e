//! Splicing collective algorithms into workloads at `COMM_COLL` nodes.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::generate::{generate, AlgoSpec, Algorithm};
use crate::trace::{CollectiveKind, CompOp, NodeAttrs, Trace, TraceClass, TraceNode};

/// Bits of tag space reserved for each collective instance.
pub const INSTANCE_TAG_BITS: u32 = 20;

/// How one collective kind is implemented.
#[derive(Debug, Clone)]
pub enum Binding {
    /// Generated on demand at each COLL node's size.
    Generated(Algorithm),
    /// A fixed trace; its claimed size must equal the COLL node's.
    Fixed(Trace),
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Binding::Generated(a) => write!(f, "{a}"),
            Binding::Fixed(t) => match t.claimed_collective() {
                Some(c) => write!(f, "fixed {} trace of {} bytes", c.kind, c.comm_size),
                None => f.write_str("fixed trace without a claimed collective"),
            },
        }
    }
}

pub type Bindings = BTreeMap<CollectiveKind, Binding>;

fn binding_err(msg: impl Into<String>) -> Error {
    Error::Binding(msg.into())
}

/// Resolves the subgraph trace for one (kind, size) instance.
fn instantiate(
    bindings: &Bindings,
    kind: CollectiveKind,
    size: u64,
    num_ranks: usize,
) -> Result<Trace> {
    let binding = bindings
        .get(&kind)
        .ok_or_else(|| binding_err(format!("no binding for {kind}")))?;
    let trace = match binding {
        Binding::Generated(algo) => {
            if algo.collective() != kind {
                return Err(binding_err(format!(
                    "{algo} implements {}, not {kind}",
                    algo.collective()
                )));
            }
            generate(&AlgoSpec::new(*algo, num_ranks, size))
                .map_err(|e| binding_err(format!("cannot generate {algo} for {kind} of {size} bytes: {e}")))?
        }
        Binding::Fixed(t) => {
            match t.claimed_collective() {
                Some(c) if c.kind == kind && c.comm_size == size => {}
                Some(c) => {
                    return Err(binding_err(format!(
                        "bound trace claims {} of {} bytes, node needs {kind} of {size} bytes",
                        c.kind, c.comm_size
                    )))
                }
                None => return Err(binding_err(format!("bound trace for {kind} claims no collective"))),
            }
            t.clone()
        }
    };
    if trace.num_ranks() != num_ranks {
        return Err(binding_err(format!(
            "binding for {kind} has {} ranks, workload has {num_ranks}",
            trace.num_ranks()
        )));
    }
    if trace.class() != TraceClass::Collective || trace.has_collective_nodes() {
        return Err(binding_err(format!("binding for {kind} is not a collective trace")));
    }
    Ok(trace)
}

/// Replaces every `COMM_COLL` node with its bound algorithm.
///
/// Each COLL node's dependencies move to every root of the spliced
/// subgraph, and dependents of the COLL node wait on every sink instead.
/// Instance `k` (counted in per-rank topological order, which is identical
/// on all ranks) has its tags shifted by `k << 20` and its nodes renumbered
/// after the largest workload id. An empty per-rank subgraph leaves a NOP
/// anchor with the COLL node's id. The result is a collective-class trace
/// with no claimed collective; a workload without COLL nodes comes back
/// unchanged.
pub fn expand(workload: &Trace, bindings: &Bindings) -> Result<Trace> {
    if !workload.has_collective_nodes() {
        return Ok(workload.clone());
    }
    let n = workload.num_ranks();

    // Instances in per-rank topological order; the SPMD invariant makes the
    // sequence identical across ranks.
    let order = workload.toposort_rank(0)?;
    let instances: Vec<(CollectiveKind, u64)> = order
        .iter()
        .filter_map(|&id| match workload.node(0, id).map(|x| &x.attrs) {
            Some(NodeAttrs::Coll {
                coll_kind,
                comm_size,
            }) => Some((*coll_kind, *comm_size)),
            _ => None,
        })
        .collect();
    let mut cache: HashMap<(CollectiveKind, u64), Trace> = HashMap::new();
    for &(kind, size) in &instances {
        if let std::collections::hash_map::Entry::Vacant(e) = cache.entry((kind, size)) {
            e.insert(instantiate(bindings, kind, size, n)?);
        }
    }

    let mut out = Vec::with_capacity(n);
    for rank in 0..n {
        let nodes = workload.rank(rank);
        let colls: Vec<u64> = workload
            .toposort_rank(rank)?
            .into_iter()
            .filter(|&id| matches!(workload.node(rank, id).map(|x| &x.attrs), Some(NodeAttrs::Coll { .. })))
            .collect();
        let mut next_id = nodes.last().map_or(0, |x| x.id + 1);

        let mut result: Vec<TraceNode> = Vec::new();
        // COLL id -> the ids its dependents should wait on instead.
        let mut exits: HashMap<u64, Vec<u64>> = HashMap::new();
        for (ordinal, &coll_id) in colls.iter().enumerate() {
            let coll = workload.node(rank, coll_id).expect("listed above");
            let (kind, size) = match coll.attrs {
                NodeAttrs::Coll {
                    coll_kind,
                    comm_size,
                } => (coll_kind, comm_size),
                _ => unreachable!(),
            };
            let sub = cache[&(kind, size)].rank(rank);
            if sub.is_empty() {
                result.push(TraceNode::new(
                    coll_id,
                    coll.name.clone(),
                    coll.deps.clone(),
                    NodeAttrs::comp(0, CompOp::Nop),
                ));
                exits.insert(coll_id, vec![coll_id]);
                continue;
            }
            let base = (ordinal as u64)
                .checked_mul(1 << INSTANCE_TAG_BITS)
                .ok_or_else(|| Error::Overflow(format!("collective instance {ordinal}")))?;

            let remap: HashMap<u64, u64> = sub
                .iter()
                .enumerate()
                .map(|(i, x)| (x.id, next_id + i as u64))
                .collect();
            next_id = next_id
                .checked_add(sub.len() as u64)
                .ok_or_else(|| Error::Overflow("node ids exhausted".into()))?;
            let depended: HashSet<u64> = sub.iter().flat_map(|x| x.deps.iter().copied()).collect();
            let mut sinks = Vec::new();
            for x in sub {
                let mut attrs = x.attrs.clone();
                if let NodeAttrs::Send { tag, .. } | NodeAttrs::Recv { tag, .. } = &mut attrs {
                    if *tag >= 1 << INSTANCE_TAG_BITS {
                        return Err(Error::Overflow(format!(
                            "{kind} binding uses tag {tag}, which does not fit in {INSTANCE_TAG_BITS} bits"
                        )));
                    }
                    *tag += base;
                }
                let deps = if x.deps.is_empty() {
                    coll.deps.clone()
                } else {
                    x.deps.iter().map(|d| remap[d]).collect()
                };
                if !depended.contains(&x.id) {
                    sinks.push(remap[&x.id]);
                }
                result.push(TraceNode::new(
                    remap[&x.id],
                    format!("{}/{}", coll.name, x.name),
                    deps,
                    attrs,
                ));
            }
            exits.insert(coll_id, sinks);
        }

        for x in nodes {
            if !exits.contains_key(&x.id) {
                result.push(x.clone());
            }
        }
        // Dependencies on a COLL node (from workload nodes or from roots
        // that inherited them) now point at its exits.
        for x in &mut result {
            if x.deps.iter().any(|d| exits.contains_key(d) && !exits[d].contains(d)) {
                x.deps = x
                    .deps
                    .iter()
                    .flat_map(|d| exits.get(d).cloned().unwrap_or_else(|| vec![*d]))
                    .collect();
            }
        }
        out.push(result);
    }

    Trace::new(TraceClass::Collective, None, out)
}

//! Semantic validation of collective traces.
//!
//! Each rank's buffers are modelled symbolically: a slot holds the set of
//! `(origin_rank, chunk)` contributions it carries. Sends snapshot their
//! slots, receives overwrite theirs with the delivered snapshot, `REDUCE`
//! takes unions and `COPY` moves sets. Execution is eager: a send fires as
//! soon as its deps are done, a receive once its deps are done and the
//! matching send has fired.

mod iso;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde_json::{json, Value};

use crate::error::{Error, NodeRef, Result};
use crate::trace::{Buffer, CollectiveKind, CompOp, NodeAttrs, Slot, Trace};

pub use iso::{canonical_form, isomorphic, CanonicalNode, CanonicalTrace};

/// One contribution: data that originated as `chunk` on `origin_rank`.
pub type Contribution = (u32, u32);
pub type ContributionSet = BTreeSet<Contribution>;

/// Symbolic buffer contents of every rank.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChunkState {
    ranks: Vec<BTreeMap<Slot, ContributionSet>>,
}

impl ChunkState {
    fn with_ranks(n: usize) -> Self {
        ChunkState {
            ranks: vec![BTreeMap::new(); n],
        }
    }

    pub fn get(&self, rank: usize, slot: Slot) -> Option<&ContributionSet> {
        self.ranks.get(rank)?.get(&slot)
    }

    fn set(&mut self, rank: usize, slot: Slot, value: ContributionSet) {
        self.ranks[rank].insert(slot, value);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rank: usize,
    pub node: Option<u64>,
    pub slot: Option<Slot>,
    pub expected: Option<ContributionSet>,
    pub actual: Option<ContributionSet>,
    pub message: String,
}

impl Violation {
    fn at_node(rank: usize, node: u64, message: String) -> Self {
        Violation {
            rank,
            node: Some(node),
            slot: None,
            expected: None,
            actual: None,
            message,
        }
    }

    pub fn to_json(&self) -> Value {
        let set = |s: &Option<ContributionSet>| {
            s.as_ref()
                .map(|s| Value::from(s.iter().map(|(r, c)| json!([r, c])).collect::<Vec<_>>()))
                .unwrap_or(Value::Null)
        };
        json!({
            "rank": self.rank,
            "node": self.node,
            "slot": self.slot.map(|s| format!("{}:{}", s.buf.as_str(), s.index)),
            "expected": set(&self.expected),
            "actual": set(&self.actual),
            "message": self.message,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Matching and deadlock checks passed but the trace carries no chunk
    /// annotations (or no claimed collective) to check semantics against.
    Skipped,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIPPED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub status: Status,
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Result of one symbolic run.
#[derive(Debug, Clone)]
pub struct Execution {
    pub state: ChunkState,
    pub violations: Vec<Violation>,
    /// Nodes in the order they fired.
    pub order: Vec<NodeRef>,
}

type MsgKey = (usize, usize, u64);
type Payload = Option<Vec<ContributionSet>>;

/// Number of slots in the data buffer and whether chunk annotations are
/// complete enough to evaluate semantics.
fn data_layout(trace: &Trace, kind: CollectiveKind) -> (bool, u32) {
    let mut annotated = true;
    let mut max_index: Option<u32> = None;
    let mut note = |slots: &Option<Vec<Slot>>, required: bool, annotated: &mut bool| match slots {
        Some(v) => {
            for s in v.iter().filter(|s| s.buf == Buffer::Data) {
                max_index = Some(max_index.map_or(s.index, |m| m.max(s.index)));
            }
        }
        None if required => *annotated = false,
        None => {}
    };
    for node in trace.ranks().iter().flatten() {
        match &node.attrs {
            NodeAttrs::Send { chunks, .. } | NodeAttrs::Recv { chunks, .. } => {
                note(chunks, true, &mut annotated)
            }
            NodeAttrs::Comp {
                op,
                chunks,
                src_chunks,
                ..
            } => {
                let required = matches!(op, CompOp::Reduce | CompOp::Copy);
                note(chunks, required, &mut annotated);
                note(src_chunks, required, &mut annotated);
            }
            NodeAttrs::Coll { .. } => annotated = false,
        }
    }
    let n = trace.num_ranks() as u32;
    let mut slots = max_index.map_or(0, |m| m + 1);
    match kind {
        CollectiveKind::AllReduce | CollectiveKind::Broadcast => slots = slots.max(1),
        CollectiveKind::AllGather | CollectiveKind::ReduceScatter => {
            slots = slots.max(n).div_ceil(n) * n;
        }
    }
    (annotated, slots)
}

fn initial_state(n: usize, kind: CollectiveKind, slots: u32) -> ChunkState {
    let mut state = ChunkState::with_ranks(n);
    let per_rank = slots / n as u32;
    for r in 0..n {
        let r32 = r as u32;
        let owned: Vec<u32> = match kind {
            CollectiveKind::AllReduce | CollectiveKind::ReduceScatter => (0..slots).collect(),
            CollectiveKind::AllGather => (r32 * per_rank..(r32 + 1) * per_rank).collect(),
            CollectiveKind::Broadcast if r == 0 => (0..slots).collect(),
            CollectiveKind::Broadcast => Vec::new(),
        };
        for k in owned {
            state.set(r, Slot::data(k), BTreeSet::from([(r32, k)]));
        }
    }
    state
}

/// Expected final contents of `(rank, data slot)`, or `None` when the
/// collective leaves that slot unconstrained.
fn expected_slot(n: usize, kind: CollectiveKind, slots: u32, rank: usize, k: u32) -> Option<ContributionSet> {
    let all = |k: u32| (0..n as u32).map(|r| (r, k)).collect::<ContributionSet>();
    let per_rank = slots / n as u32;
    match kind {
        CollectiveKind::AllReduce => Some(all(k)),
        CollectiveKind::AllGather => Some(BTreeSet::from([(k / per_rank, k)])),
        CollectiveKind::ReduceScatter => (k / per_rank == rank as u32).then(|| all(k)),
        CollectiveKind::Broadcast => Some(BTreeSet::from([(0, k)])),
    }
}

struct Graph {
    refs: Vec<NodeRef>,
    index: HashMap<NodeRef, usize>,
    dependents: Vec<Vec<usize>>,
    pending: Vec<usize>,
    /// Receive nodes keyed by the message they consume.
    recv_of: HashMap<MsgKey, Vec<usize>>,
}

fn build_graph(trace: &Trace) -> Graph {
    let mut refs = Vec::new();
    let mut index: HashMap<NodeRef, usize> = HashMap::new();
    for (rank, nodes) in trace.ranks().iter().enumerate() {
        for n in nodes {
            let r = NodeRef { rank, id: n.id };
            index.insert(r, refs.len());
            refs.push(r);
        }
    }
    let mut dependents = vec![Vec::new(); refs.len()];
    let mut pending = vec![0; refs.len()];
    let mut recv_of: HashMap<MsgKey, Vec<usize>> = HashMap::new();
    let mut g = 0;
    for (rank, nodes) in trace.ranks().iter().enumerate() {
        for n in nodes {
            for d in &n.deps {
                pending[g] += 1;
                // A dep on a missing node is never satisfied.
                if let Some(&di) = index.get(&NodeRef { rank, id: *d }) {
                    dependents[di].push(g);
                }
            }
            if let NodeAttrs::Recv { src_rank, tag, .. } = n.attrs {
                recv_of.entry((src_rank, rank, tag)).or_default().push(g);
            }
            g += 1;
        }
    }
    Graph {
        refs,
        index,
        dependents,
        pending,
        recv_of,
    }
}

/// Runs the trace to quiescence under eager-send semantics. `pick` chooses
/// which of the currently ready nodes fires next, given how many are ready;
/// ready nodes are offered in `(rank, id)` order. With `semantics` `None` no
/// buffer state is tracked.
///
/// Returns [`Error::Stuck`] with the blocked frontier when nodes remain that
/// can never fire.
pub fn execute_symbolic(
    trace: &Trace,
    semantics: Option<(CollectiveKind, u32)>,
    mut pick: impl FnMut(usize) -> usize,
) -> Result<Execution> {
    let nodes: Vec<(usize, &crate::trace::TraceNode)> = trace
        .ranks()
        .iter()
        .enumerate()
        .flat_map(|(r, ns)| ns.iter().map(move |n| (r, n)))
        .collect();
    let mut g = build_graph(trace);
    let mut state = match semantics {
        Some((kind, slots)) => initial_state(trace.num_ranks(), kind, slots),
        None => ChunkState::with_ranks(trace.num_ranks()),
    };
    let tracking = semantics.is_some();

    let mut violations = Vec::new();
    let mut mailbox: HashMap<MsgKey, VecDeque<(usize, Payload)>> = HashMap::new();
    let mut waiting: BTreeSet<usize> = BTreeSet::new();
    let mut ready: BTreeSet<usize> = BTreeSet::new();
    let mut done = vec![false; nodes.len()];
    let mut order = Vec::with_capacity(nodes.len());

    let msg_key = |i: usize| -> Option<MsgKey> {
        match nodes[i].1.attrs {
            NodeAttrs::Recv { src_rank, tag, .. } => Some((src_rank, nodes[i].0, tag)),
            _ => None,
        }
    };

    let make_available =
        |i: usize, ready: &mut BTreeSet<usize>, waiting: &mut BTreeSet<usize>, mailbox: &HashMap<MsgKey, VecDeque<(usize, Payload)>>| {
            match msg_key(i) {
                Some(key) if mailbox.get(&key).is_none_or(VecDeque::is_empty) => {
                    waiting.insert(i);
                }
                _ => {
                    ready.insert(i);
                }
            }
        };

    for i in 0..nodes.len() {
        if g.pending[i] == 0 {
            make_available(i, &mut ready, &mut waiting, &mailbox);
        }
    }

    while !ready.is_empty() {
        let pos = pick(ready.len()).min(ready.len() - 1);
        let i = *ready.iter().nth(pos).expect("position in range");
        ready.remove(&i);
        let (rank, node) = nodes[i];
        let read = |state: &ChunkState, slot: Slot, violations: &mut Vec<Violation>| {
            match state.get(rank, slot) {
                Some(v) => v.clone(),
                None => {
                    violations.push(Violation {
                        slot: Some(slot),
                        ..Violation::at_node(
                            rank,
                            node.id,
                            format!("reads unwritten slot {}:{}", slot.buf.as_str(), slot.index),
                        )
                    });
                    ContributionSet::new()
                }
            }
        };

        match &node.attrs {
            NodeAttrs::Send {
                dst_rank,
                tag,
                chunks,
                ..
            } => {
                let payload = match (tracking, chunks) {
                    (true, Some(slots)) => Some(
                        slots
                            .iter()
                            .map(|s| read(&state, *s, &mut violations))
                            .collect(),
                    ),
                    _ => None,
                };
                let key = (rank, *dst_rank, *tag);
                mailbox.entry(key).or_default().push_back((i, payload));
                if let Some(recvs) = g.recv_of.get(&key) {
                    if let Some(&w) = recvs.iter().find(|w| waiting.contains(w)) {
                        waiting.remove(&w);
                        ready.insert(w);
                    }
                }
            }
            NodeAttrs::Recv { src_rank, tag, chunks, .. } => {
                let key = (*src_rank, rank, *tag);
                let (_, payload) = mailbox
                    .get_mut(&key)
                    .and_then(VecDeque::pop_front)
                    .expect("ready receive has a message");
                if let (Some(payload), Some(slots)) = (payload, chunks) {
                    if payload.len() != slots.len() {
                        violations.push(Violation::at_node(
                            rank,
                            node.id,
                            format!(
                                "receives {} chunks into {} slots",
                                payload.len(),
                                slots.len()
                            ),
                        ));
                    }
                    for (slot, value) in slots.iter().zip(payload) {
                        state.set(rank, *slot, value);
                    }
                }
            }
            NodeAttrs::Comp {
                op,
                chunks: Some(dst),
                src_chunks: Some(src),
                ..
            } if tracking && matches!(op, CompOp::Reduce | CompOp::Copy) => {
                let groups_ok = match op {
                    CompOp::Reduce => !dst.is_empty() && !src.is_empty() && src.len() % dst.len() == 0,
                    _ => src.len() == dst.len(),
                };
                if !groups_ok {
                    violations.push(Violation::at_node(
                        rank,
                        node.id,
                        format!(
                            "{} with {} source slots for {} destination slots",
                            op.as_str(),
                            src.len(),
                            dst.len()
                        ),
                    ));
                } else {
                    let values: Vec<ContributionSet> =
                        src.iter().map(|s| read(&state, *s, &mut violations)).collect();
                    for (k, slot) in dst.iter().enumerate() {
                        let v: ContributionSet = values
                            .iter()
                            .skip(k)
                            .step_by(dst.len())
                            .flatten()
                            .copied()
                            .collect();
                        state.set(rank, *slot, v);
                    }
                }
            }
            NodeAttrs::Comp { .. } => {}
            NodeAttrs::Coll { .. } => {
                return Err(Error::UnexpandedCollective {
                    node: NodeRef { rank, id: node.id },
                })
            }
        }

        done[i] = true;
        order.push(g.refs[i]);
        for j in std::mem::take(&mut g.dependents[i]) {
            g.pending[j] -= 1;
            if g.pending[j] == 0 {
                make_available(j, &mut ready, &mut waiting, &mailbox);
            }
        }
    }

    if order.len() < nodes.len() {
        // Blocked only by messages that never come or by deps outside the
        // remaining graph.
        let remaining: BTreeSet<usize> = (0..nodes.len()).filter(|&i| !done[i]).collect();
        let frontier = remaining
            .iter()
            .filter(|&&i| {
                let (rank, node) = nodes[i];
                node.deps.iter().all(|d| {
                    g.index
                        .get(&NodeRef { rank, id: *d })
                        .is_none_or(|&di| done[di])
                })
            })
            .map(|&i| g.refs[i])
            .collect();
        return Err(Error::Stuck { frontier });
    }

    for (key, queue) in &mailbox {
        for (i, _) in queue {
            let r = g.refs[*i];
            violations.push(Violation::at_node(
                r.rank,
                r.id,
                format!("message {}->{} tag {} is never received", key.0, key.1, key.2),
            ));
        }
    }
    violations.sort_by_key(|v| (v.rank, v.node));

    Ok(Execution {
        state,
        violations,
        order,
    })
}

/// The semantic setup for `trace`, or `None` when semantics cannot be
/// checked (no claimed collective or incomplete chunk annotations).
pub fn semantic_setup(trace: &Trace) -> Option<(CollectiveKind, u32)> {
    let claim = trace.claimed_collective()?;
    let (annotated, slots) = data_layout(trace, claim.kind);
    annotated.then_some((claim.kind, slots))
}

/// Compares a final state with what the claimed collective requires.
pub fn final_state_violations(
    trace: &Trace,
    kind: CollectiveKind,
    slots: u32,
    state: &ChunkState,
) -> Vec<Violation> {
    let n = trace.num_ranks();
    let mut out = Vec::new();
    for rank in 0..n {
        for k in 0..slots {
            let Some(expected) = expected_slot(n, kind, slots, rank, k) else {
                continue;
            };
            let slot = Slot::data(k);
            let actual = state.get(rank, slot).cloned();
            if actual.as_ref() != Some(&expected) {
                out.push(Violation {
                    rank,
                    node: None,
                    slot: Some(slot),
                    message: format!("rank {rank} data chunk {k} does not hold the {kind} result"),
                    expected: Some(expected),
                    actual,
                });
            }
        }
    }
    out
}

/// Symbolically executes `trace` and decides whether it implements its
/// claimed collective.
///
/// Deadlock under eager semantics is an error ([`Error::Stuck`]); deadlock
/// only under rendezvous semantics is reported as a warning.
pub fn check_semantics(trace: &Trace) -> Result<Verdict> {
    let setup = semantic_setup(trace);
    let exec = execute_symbolic(trace, setup, |_| 0)?;
    let mut violations = exec.violations;
    if let Some((kind, slots)) = setup {
        violations.extend(final_state_violations(trace, kind, slots, &exec.state));
    }

    let mut warnings = Vec::new();
    if let Some(frontier) = rendezvous_frontier(trace) {
        let names: Vec<String> = frontier.iter().map(ToString::to_string).collect();
        warnings.push(format!(
            "deadlocks under rendezvous semantics; blocked: {}",
            names.join(", ")
        ));
    }

    let status = if !violations.is_empty() {
        Status::Fail
    } else if setup.is_some() {
        Status::Pass
    } else {
        Status::Skipped
    };
    Ok(Verdict {
        status,
        violations,
        warnings,
    })
}

/// Replays the trace with sends that complete only together with their
/// receive. Returns the blocked point-to-point nodes when that deadlocks.
pub fn rendezvous_frontier(trace: &Trace) -> Option<Vec<NodeRef>> {
    let nodes: Vec<(usize, &crate::trace::TraceNode)> = trace
        .ranks()
        .iter()
        .enumerate()
        .flat_map(|(r, ns)| ns.iter().map(move |n| (r, n)))
        .collect();
    let mut g = build_graph(trace);
    let mut posted_send: HashMap<MsgKey, usize> = HashMap::new();
    let mut posted_recv: HashMap<MsgKey, usize> = HashMap::new();
    let mut work: Vec<usize> = (0..nodes.len()).filter(|&i| g.pending[i] == 0).collect();
    let mut finished = 0;

    while let Some(i) = work.pop() {
        let (rank, node) = nodes[i];
        let fire: Vec<usize> = match node.attrs {
            NodeAttrs::Send { dst_rank, tag, .. } => {
                let key = (rank, dst_rank, tag);
                match posted_recv.remove(&key) {
                    Some(r) => vec![i, r],
                    None => {
                        posted_send.insert(key, i);
                        vec![]
                    }
                }
            }
            NodeAttrs::Recv { src_rank, tag, .. } => {
                let key = (src_rank, rank, tag);
                match posted_send.remove(&key) {
                    Some(s) => vec![s, i],
                    None => {
                        posted_recv.insert(key, i);
                        vec![]
                    }
                }
            }
            _ => vec![i],
        };
        for f in fire {
            finished += 1;
            for j in std::mem::take(&mut g.dependents[f]) {
                g.pending[j] -= 1;
                if g.pending[j] == 0 {
                    work.push(j);
                }
            }
        }
    }

    if finished == nodes.len() {
        return None;
    }
    let mut frontier: Vec<NodeRef> = posted_send
        .values()
        .chain(posted_recv.values())
        .map(|&i| g.refs[i])
        .collect();
    frontier.sort();
    Some(frontier)
}

/// Verdict document: `{verdict, violations[], stuck_nodes[], warnings[]}`.
pub fn verdict_json(outcome: &Result<Verdict>) -> Value {
    match outcome {
        Ok(v) => json!({
            "verdict": v.status.as_str(),
            "violations": v.violations.iter().map(Violation::to_json).collect::<Vec<_>>(),
            "stuck_nodes": [],
            "warnings": v.warnings,
        }),
        Err(Error::Stuck { frontier }) => json!({
            "verdict": "STUCK",
            "violations": [],
            "stuck_nodes": frontier.iter().map(|n| json!({"rank": n.rank, "id": n.id})).collect::<Vec<_>>(),
            "warnings": [],
        }),
        Err(e) => json!({
            "verdict": "ERROR",
            "violations": [{"rank": null, "node": null, "slot": null, "expected": null, "actual": null, "message": e.to_string()}],
            "stuck_nodes": [],
            "warnings": [],
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate, AlgoSpec, Algorithm};
    use crate::trace::{ClaimedCollective, TraceClass, TraceNode};

    #[test]
    fn empty_single_rank_collectives_pass() {
        for kind in [CollectiveKind::AllReduce, CollectiveKind::AllGather] {
            let claim = ClaimedCollective { kind, comm_size: 64 };
            let t = Trace::collective(Some(claim), vec![vec![]]).unwrap();
            assert!(check_semantics(&t).unwrap().is_pass(), "{kind}");
        }
    }

    #[test]
    fn empty_multi_rank_all_reduce_fails() {
        let claim = ClaimedCollective {
            kind: CollectiveKind::AllReduce,
            comm_size: 64,
        };
        let t = Trace::collective(Some(claim), vec![vec![], vec![]]).unwrap();
        let v = check_semantics(&t).unwrap();
        assert_eq!(v.status, Status::Fail);
        let first = &v.violations[0];
        assert_eq!((first.rank, first.slot), (0, Some(Slot::data(0))));
        assert_eq!(first.actual, Some(BTreeSet::from([(0, 0)])));
        assert_eq!(first.expected, Some(BTreeSet::from([(0, 0), (1, 0)])));
    }

    /// Chunk table of ring all-reduce on 3 ranks after the reduce-scatter
    /// phase, worked out by hand: rank r owns chunk r+1 fully reduced,
    /// chunk r-1 reduced over {r-1, r} and chunk r untouched.
    #[test]
    fn ring_all_reduce_three_ranks_matches_hand_table() {
        let t = generate(&AlgoSpec::new(Algorithm::RingAllReduce, 3, 3 * 64)).unwrap();
        let setup = semantic_setup(&t).unwrap();
        assert_eq!(setup, (CollectiveKind::AllReduce, 3));
        // Only fire reduce-scatter nodes: they are the first 6 per rank.
        let reduced: Vec<Vec<u64>> = (0..3).map(|_| (0..6).collect()).collect();
        let ranks: Vec<Vec<TraceNode>> = (0..3)
            .map(|r| {
                t.rank(r)
                    .iter()
                    .filter(|n| reduced[r].contains(&n.id))
                    .cloned()
                    .collect()
            })
            .collect();
        let phase1 = Trace::from_parts_unchecked(TraceClass::Collective, t.claimed_collective(), ranks);
        let exec = execute_symbolic(&phase1, Some(setup), |_| 0).unwrap();
        let set = |v: &[(u32, u32)]| v.iter().copied().collect::<ContributionSet>();
        let full = |k: u32| set(&[(0, k), (1, k), (2, k)]);
        let expect = [
            [set(&[(0, 0)]), full(1), set(&[(0, 2), (2, 2)])],
            [set(&[(0, 0), (1, 0)]), set(&[(1, 1)]), full(2)],
            [full(0), set(&[(1, 1), (2, 1)]), set(&[(2, 2)])],
        ];
        for r in 0..3 {
            for k in 0..3u32 {
                assert_eq!(
                    exec.state.get(r, Slot::data(k)).unwrap(),
                    &expect[r][k as usize],
                    "rank {r} chunk {k}"
                );
            }
        }
        assert!(check_semantics(&t).unwrap().is_pass());
    }

    #[test]
    fn circular_wait_is_stuck_with_both_receives() {
        let side = |peer: usize| {
            vec![
                TraceNode::new(0, "recv", vec![], NodeAttrs::recv(peer, 8, 0)),
                TraceNode::new(1, "send", vec![0], NodeAttrs::send(peer, 8, 0)),
            ]
        };
        let t = Trace::collective(None, vec![side(1), side(0)]).unwrap();
        match check_semantics(&t) {
            Err(Error::Stuck { frontier }) => assert_eq!(
                frontier,
                vec![NodeRef { rank: 0, id: 0 }, NodeRef { rank: 1, id: 0 }]
            ),
            other => panic!("expected stuck, got {other:?}"),
        }
    }

    #[test]
    fn head_to_head_sends_warn_under_rendezvous_only() {
        let side = |peer: usize| {
            vec![
                TraceNode::new(0, "send", vec![], NodeAttrs::send(peer, 8, 0)),
                TraceNode::new(1, "recv", vec![0], NodeAttrs::recv(peer, 8, 0)),
            ]
        };
        let t = Trace::collective(None, vec![side(1), side(0)]).unwrap();
        let v = check_semantics(&t).unwrap();
        assert_eq!(v.status, Status::Skipped);
        assert_eq!(v.warnings.len(), 1, "{:?}", v.warnings);
    }

    #[test]
    fn ring_all_reduce_has_no_rendezvous_deadlock() {
        let t = generate(&AlgoSpec::new(Algorithm::RingAllReduce, 4, 64)).unwrap();
        assert_eq!(rendezvous_frontier(&t), None);
    }

    #[test]
    fn reduce_into_wrong_slot_fails() {
        let t = generate(&AlgoSpec::new(Algorithm::RingAllReduce, 2, 64)).unwrap();
        let (class, claim, mut ranks) = t.into_parts();
        for n in ranks[1].iter_mut() {
            if let NodeAttrs::Comp { chunks, .. } = &mut n.attrs {
                *chunks = Some(vec![Slot::data(5)]);
            }
        }
        let t = Trace::from_parts_unchecked(class, claim, ranks);
        let v = check_semantics(&t).unwrap();
        assert_eq!(v.status, Status::Fail);
    }

    #[test]
    fn verdict_json_shapes() {
        let claim = ClaimedCollective {
            kind: CollectiveKind::AllReduce,
            comm_size: 64,
        };
        let t = Trace::collective(Some(claim), vec![vec![]]).unwrap();
        let v = verdict_json(&check_semantics(&t));
        assert_eq!(v["verdict"], "PASS");
        let stuck: Result<Verdict> = Err(Error::Stuck {
            frontier: vec![NodeRef { rank: 1, id: 4 }],
        });
        let v = verdict_json(&stuck);
        assert_eq!(v["verdict"], "STUCK");
        assert_eq!(v["stuck_nodes"][0]["id"], 4);
    }
}

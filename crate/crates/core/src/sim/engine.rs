//! Single-threaded discrete-event replay.
//!
//! Messages are store-and-forward: a message holds each directed link of its
//! route for `alpha + size / bandwidth`, then queues for the next one. A free
//! link is granted to the queued message with the earliest enqueue time,
//! ties broken by `(src, dst, tag)`. Grants happen only after every event at
//! the current timestamp has been processed, so arrival order within one
//! instant never matters.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use ordered_float::OrderedFloat;
use serde::Serialize;

use super::config::CostModel;
use super::topology::{Link, Topology};
use crate::error::{Error, NodeRef, Result};
use crate::trace::{NodeAttrs, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeTiming {
    pub id: u64,
    pub issue_s: f64,
    pub start_s: f64,
    pub finish_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkUsage {
    pub from: usize,
    pub to: usize,
    pub messages: u64,
    pub bytes: u64,
    pub busy_s: f64,
    /// `busy_s / total_duration_s`, 0 for an instantaneous run.
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub total_duration_s: f64,
    pub event_count: u64,
    /// Links that carried at least one message, sorted.
    pub links: Vec<LinkUsage>,
    /// Per rank, nodes in id order.
    pub ranks: Vec<Vec<NodeTiming>>,
}

impl SimReport {
    pub fn total_duration(&self) -> f64 {
        self.total_duration_s
    }

    pub fn node(&self, rank: usize, id: u64) -> Option<&NodeTiming> {
        let nodes = self.ranks.get(rank)?;
        nodes
            .binary_search_by_key(&id, |n| n.id)
            .ok()
            .map(|i| &nodes[i])
    }

    /// Pretty JSON with a trailing newline; byte-stable for equal reports.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    NodeDone(usize),
    HopDone { msg: usize, hop: usize },
}

struct Message {
    key: (usize, usize, u64),
    bytes: u64,
    route: Vec<usize>,
    send: usize,
    recv: usize,
    arrived: Option<f64>,
}

/// (enqueue time, (src, dst, tag), message, hop)
type Waiting = (OrderedFloat<f64>, (usize, usize, u64), usize, usize);

#[derive(Default)]
struct LinkState {
    busy: bool,
    queue: BTreeSet<Waiting>,
    messages: u64,
    bytes: u64,
    busy_s: f64,
}

struct Sim<'a> {
    cost: &'a CostModel,
    refs: Vec<NodeRef>,
    attrs: Vec<&'a NodeAttrs>,
    dependents: Vec<Vec<usize>>,
    pending: Vec<usize>,
    msg_of: Vec<Option<usize>>,
    messages: Vec<Message>,
    links: Vec<LinkState>,
    issue: Vec<f64>,
    start: Vec<f64>,
    finish: Vec<f64>,
    issued: Vec<bool>,
    done: Vec<bool>,
    events: BinaryHeap<Reverse<(OrderedFloat<f64>, u64, Event)>>,
    seq: u64,
    dirty: BTreeSet<usize>,
    processed: u64,
}

impl<'a> Sim<'a> {
    fn push(&mut self, t: f64, ev: Event) {
        self.seq += 1;
        self.events.push(Reverse((OrderedFloat(t), self.seq, ev)));
    }

    fn issue_node(&mut self, g: usize, t: f64) {
        self.issued[g] = true;
        self.issue[g] = t;
        match self.attrs[g] {
            NodeAttrs::Comp { comp_size, op, .. } => {
                self.start[g] = t;
                let d = self.cost.comp_time(op, *comp_size);
                self.push(t + d, Event::NodeDone(g));
            }
            NodeAttrs::Send { .. } => {
                let m = self.msg_of[g].expect("send has a message");
                self.enqueue(m, 0, t);
            }
            NodeAttrs::Recv { .. } => {
                self.start[g] = t;
                let m = self.msg_of[g].expect("recv has a message");
                // Completed through the queue rather than recursively, so
                // long chains of ready receives cannot grow the stack.
                if self.messages[m].arrived.is_some() {
                    self.push(t, Event::NodeDone(g));
                }
            }
            NodeAttrs::Coll { .. } => unreachable!("rejected before simulation"),
        }
    }

    fn enqueue(&mut self, m: usize, hop: usize, t: f64) {
        let link = self.messages[m].route[hop];
        let key = self.messages[m].key;
        self.links[link].queue.insert((OrderedFloat(t), key, m, hop));
        self.dirty.insert(link);
    }

    fn finish_node(&mut self, g: usize, t: f64) {
        self.done[g] = true;
        self.finish[g] = t;
        for i in 0..self.dependents[g].len() {
            let j = self.dependents[g][i];
            self.pending[j] -= 1;
            if self.pending[j] == 0 {
                self.issue_node(j, t);
            }
        }
    }

    fn handle(&mut self, t: f64, ev: Event) {
        self.processed += 1;
        match ev {
            Event::NodeDone(g) => self.finish_node(g, t),
            Event::HopDone { msg, hop } => {
                let link = self.messages[msg].route[hop];
                self.links[link].busy = false;
                self.dirty.insert(link);
                if hop == 0 {
                    self.finish_node(self.messages[msg].send, t);
                }
                if hop + 1 < self.messages[msg].route.len() {
                    self.enqueue(msg, hop + 1, t);
                } else {
                    self.messages[msg].arrived = Some(t);
                    let r = self.messages[msg].recv;
                    if self.issued[r] && !self.done[r] {
                        self.finish_node(r, t);
                    }
                }
            }
        }
    }

    fn grant(&mut self, t: f64) {
        let dirty = std::mem::take(&mut self.dirty);
        for link in dirty {
            let state = &mut self.links[link];
            if state.busy {
                continue;
            }
            let Some((_, _, m, hop)) = state.queue.pop_first() else {
                continue;
            };
            let bytes = self.messages[m].bytes;
            let d = self.cost.link_time(bytes);
            state.busy = true;
            state.messages += 1;
            state.bytes += bytes;
            state.busy_s += d;
            if hop == 0 {
                self.start[self.messages[m].send] = t;
            }
            self.push(t + d, Event::HopDone { msg: m, hop });
        }
    }
}

/// Replays `trace` on `topology`. The trace must be fully expanded and
/// every send must have exactly one matching receive.
pub fn simulate(trace: &Trace, topology: &Topology, cost: &CostModel) -> Result<SimReport> {
    cost.check()?;
    if trace.num_ranks() > topology.num_endpoints() {
        return Err(Error::Topology(format!(
            "{} ranks do not fit on {} ({} endpoints)",
            trace.num_ranks(),
            topology.kind(),
            topology.num_endpoints()
        )));
    }

    let mut refs = Vec::new();
    let mut attrs = Vec::new();
    let mut index = HashMap::new();
    for (rank, nodes) in trace.ranks().iter().enumerate() {
        for n in nodes {
            if let NodeAttrs::Coll { .. } = n.attrs {
                return Err(Error::UnexpandedCollective {
                    node: NodeRef { rank, id: n.id },
                });
            }
            index.insert((rank, n.id), refs.len());
            refs.push(NodeRef { rank, id: n.id });
            attrs.push(&n.attrs);
        }
    }
    let total = refs.len();

    let mut dependents = vec![Vec::new(); total];
    let mut pending = vec![0; total];
    for (rank, nodes) in trace.ranks().iter().enumerate() {
        for n in nodes {
            let g = index[&(rank, n.id)];
            for d in &n.deps {
                let &dg = index.get(&(rank, *d)).ok_or_else(|| {
                    Error::invariant(rank, n.id, format!("dependency {d} does not exist"))
                })?;
                dependents[dg].push(g);
                pending[g] += 1;
            }
        }
    }

    // Match messages and lay out routes.
    let mut recvs: HashMap<(usize, usize, u64), usize> = HashMap::new();
    for (g, a) in attrs.iter().enumerate() {
        if let NodeAttrs::Recv { src_rank, tag, .. } = a {
            let key = (*src_rank, refs[g].rank, *tag);
            if recvs.insert(key, g).is_some() {
                return Err(Error::Match(format!(
                    "{} duplicates receive ({}, {}, tag {})",
                    refs[g], key.0, key.1, key.2
                )));
            }
        }
    }
    let mut link_ids: HashMap<Link, usize> = HashMap::new();
    let mut link_list: Vec<Link> = Vec::new();
    let mut messages = Vec::new();
    let mut msg_of = vec![None; total];
    for (g, a) in attrs.iter().enumerate() {
        if let NodeAttrs::Send {
            dst_rank,
            comm_size,
            tag,
            ..
        } = a
        {
            let key = (refs[g].rank, *dst_rank, *tag);
            let recv = recvs.remove(&key).ok_or_else(|| {
                Error::Match(format!("{} has no matching receive on rank {}", refs[g], dst_rank))
            })?;
            if attrs[recv].size() != *comm_size {
                return Err(Error::Match(format!(
                    "{} sends {} bytes but {} expects {}",
                    refs[g],
                    comm_size,
                    refs[recv],
                    attrs[recv].size()
                )));
            }
            let path = topology.route(topology.node_of_rank(key.0), topology.node_of_rank(key.1))?;
            let route = path
                .into_iter()
                .map(|l| {
                    *link_ids.entry(l).or_insert_with(|| {
                        link_list.push(l);
                        link_list.len() - 1
                    })
                })
                .collect();
            msg_of[g] = Some(messages.len());
            msg_of[recv] = Some(messages.len());
            messages.push(Message {
                key,
                bytes: *comm_size,
                route,
                send: g,
                recv,
                arrived: None,
            });
        }
    }
    if let Some((_, &g)) = recvs.iter().min_by_key(|(_, &g)| refs[g]) {
        return Err(Error::Match(format!("{} has no matching send", refs[g])));
    }

    let mut sim = Sim {
        cost,
        links: (0..link_list.len()).map(|_| LinkState::default()).collect(),
        refs,
        attrs,
        dependents,
        pending,
        msg_of,
        messages,
        issue: vec![0.0; total],
        start: vec![0.0; total],
        finish: vec![0.0; total],
        issued: vec![false; total],
        done: vec![false; total],
        events: BinaryHeap::new(),
        seq: 0,
        dirty: BTreeSet::new(),
        processed: 0,
    };

    for g in 0..total {
        if sim.pending[g] == 0 && !sim.issued[g] {
            sim.issue_node(g, 0.0);
        }
    }
    sim.grant(0.0);
    while let Some(Reverse((OrderedFloat(t), _, _))) = sim.events.peek().copied() {
        while let Some(&Reverse((OrderedFloat(u), _, ev))) = sim.events.peek() {
            if u != t {
                break;
            }
            sim.events.pop();
            sim.handle(t, ev);
        }
        sim.grant(t);
    }

    if sim.done.iter().any(|d| !d) {
        let mut frontier: Vec<NodeRef> = (0..total)
            .filter(|&g| sim.issued[g] && !sim.done[g])
            .map(|g| sim.refs[g])
            .collect();
        frontier.sort();
        return Err(Error::Deadlock { frontier });
    }

    let total_duration_s = sim.finish.iter().copied().fold(0.0, f64::max);
    let mut links: Vec<LinkUsage> = link_list
        .iter()
        .zip(&sim.links)
        .filter(|(_, s)| s.messages > 0)
        .map(|(&(from, to), s)| LinkUsage {
            from,
            to,
            messages: s.messages,
            bytes: s.bytes,
            busy_s: s.busy_s,
            utilization: if total_duration_s > 0.0 {
                s.busy_s / total_duration_s
            } else {
                0.0
            },
        })
        .collect();
    links.sort_by_key(|l| (l.from, l.to));

    let mut ranks: Vec<Vec<NodeTiming>> = vec![Vec::new(); trace.num_ranks()];
    for g in 0..total {
        ranks[sim.refs[g].rank].push(NodeTiming {
            id: sim.refs[g].id,
            issue_s: sim.issue[g],
            start_s: sim.start[g],
            finish_s: sim.finish[g],
        });
    }

    Ok(SimReport {
        total_duration_s,
        event_count: sim.processed,
        links,
        ranks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate, AlgoSpec, Algorithm};
    use crate::sim::TopologyKind;
    use crate::trace::{CompOp, TraceNode};

    const MIB: u64 = 1 << 20;

    fn run(algo: Algorithm, n: usize, size: u64, kind: TopologyKind) -> SimReport {
        let t = generate(&AlgoSpec::new(algo, n, size)).unwrap();
        simulate(&t, &Topology::new(kind).unwrap(), &CostModel::new(1e-6, 1e9)).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        ((a - b) / b).abs() <= 1e-12
    }

    #[test]
    fn empty_trace() {
        let t = Trace::collective(None, vec![vec![]]).unwrap();
        let r = simulate(&t, &Topology::new(TopologyKind::Ring(1)).unwrap(), &CostModel::new(1e-6, 1e9)).unwrap();
        assert_eq!(r.total_duration_s, 0.0);
        assert_eq!(r.event_count, 0);
    }

    #[test]
    fn ring_allreduce_closed_form() {
        let r = run(Algorithm::RingAllReduce, 4, 4 * MIB, TopologyKind::Ring(4));
        assert!(close(r.total_duration_s, 6.297456e-3), "{}", r.total_duration_s);
    }

    #[test]
    fn fully_connected_matches_ring() {
        let a = run(Algorithm::RingAllReduce, 4, 4 * MIB, TopologyKind::Ring(4));
        let b = run(Algorithm::RingAllReduce, 4, 4 * MIB, TopologyKind::FullyConnected(4));
        assert_eq!(a.total_duration_s, b.total_duration_s);
    }

    #[test]
    fn switch_doubles_each_hop() {
        let r = run(Algorithm::RingAllReduce, 4, 4 * MIB, TopologyKind::Switch(4));
        let c = (MIB) as f64;
        assert!(close(r.total_duration_s, 6.0 * (2e-6 + 2.0 * c / 1e9)));
    }

    #[test]
    fn ring_allgather_closed_form() {
        let r = run(Algorithm::RingAllGather, 4, MIB, TopologyKind::Ring(4));
        assert!(close(r.total_duration_s, 3.148728e-3), "{}", r.total_duration_s);
    }

    #[test]
    fn timing_invariants_hold() {
        let r = run(Algorithm::RingAllReduce, 8, 8 * MIB, TopologyKind::Mesh2d { rows: 2, cols: 4 });
        for nodes in &r.ranks {
            for n in nodes {
                assert!(0.0 <= n.issue_s && n.issue_s <= n.start_s && n.start_s <= n.finish_s, "{n:?}");
            }
        }
    }

    #[test]
    fn contention_serializes_a_shared_link() {
        // On a 4-ring 0 -> 2 is a tie and goes 0->1->2, sharing 1->2 with
        // rank 1's direct message.
        let t = Trace::collective(
            None,
            vec![
                vec![TraceNode::new(0, "s", vec![], NodeAttrs::send(2, 1000, 0))],
                vec![TraceNode::new(0, "s", vec![], NodeAttrs::send(2, 1000, 0))],
                vec![
                    TraceNode::new(0, "r0", vec![], NodeAttrs::recv(0, 1000, 0)),
                    TraceNode::new(1, "r1", vec![], NodeAttrs::recv(1, 1000, 0)),
                ],
                vec![],
            ],
        )
        .unwrap();
        let cost = CostModel::new(0.0, 1000.0);
        let r = simulate(&t, &Topology::new(TopologyKind::Ring(4)).unwrap(), &cost).unwrap();
        // Rank 1's message holds 1->2 during [0, 1); rank 0's reaches node 1
        // at t=1 and takes the link next.
        assert_eq!(r.node(2, 1).unwrap().finish_s, 1.0);
        assert_eq!(r.node(2, 0).unwrap().finish_s, 2.0);
        assert_eq!(r.total_duration_s, 2.0);
        let l12 = r.links.iter().find(|l| (l.from, l.to) == (1, 2)).unwrap();
        assert_eq!(l12.messages, 2);
    }

    #[test]
    fn fifo_tie_break_by_key() {
        // Two messages queue for link 0->1 at t=0; (0,1,tag 3) beats (0,1,tag 7).
        let t = Trace::collective(
            None,
            vec![
                vec![
                    TraceNode::new(0, "a", vec![], NodeAttrs::send(1, 10, 7)),
                    TraceNode::new(1, "b", vec![], NodeAttrs::send(1, 10, 3)),
                ],
                vec![
                    TraceNode::new(0, "ra", vec![], NodeAttrs::recv(0, 10, 7)),
                    TraceNode::new(1, "rb", vec![], NodeAttrs::recv(0, 10, 3)),
                ],
            ],
        )
        .unwrap();
        let r = simulate(&t, &Topology::new(TopologyKind::Ring(2)).unwrap(), &CostModel::new(0.0, 10.0)).unwrap();
        assert_eq!(r.node(0, 1).unwrap().finish_s, 1.0);
        assert_eq!(r.node(0, 0).unwrap().finish_s, 2.0);
        assert_eq!(r.node(0, 0).unwrap().issue_s, 0.0);
        assert_eq!(r.node(0, 0).unwrap().start_s, 1.0);
    }

    #[test]
    fn late_recv_finishes_at_issue() {
        let t = Trace::collective(
            None,
            vec![
                vec![TraceNode::new(0, "s", vec![], NodeAttrs::send(1, 10, 0))],
                vec![
                    TraceNode::new(0, "c", vec![], NodeAttrs::comp(50, CompOp::Other("work".into()))),
                    TraceNode::new(1, "r", vec![0], NodeAttrs::recv(0, 10, 0)),
                ],
            ],
        )
        .unwrap();
        let mut cost = CostModel::new(0.0, 10.0);
        cost.compute_bandwidth = Some(10.0);
        let r = simulate(&t, &Topology::new(TopologyKind::Ring(2)).unwrap(), &cost).unwrap();
        assert_eq!(r.node(1, 1).unwrap().finish_s, 5.0);
        assert_eq!(r.total_duration_s, 5.0);
    }

    #[test]
    fn circular_wait_deadlocks() {
        let t = Trace::collective(
            None,
            vec![
                vec![
                    TraceNode::new(0, "r", vec![], NodeAttrs::recv(1, 8, 0)),
                    TraceNode::new(1, "s", vec![0], NodeAttrs::send(1, 8, 0)),
                ],
                vec![
                    TraceNode::new(0, "r", vec![], NodeAttrs::recv(0, 8, 0)),
                    TraceNode::new(1, "s", vec![0], NodeAttrs::send(0, 8, 0)),
                ],
            ],
        )
        .unwrap();
        let err = simulate(&t, &Topology::new(TopologyKind::Ring(2)).unwrap(), &CostModel::new(0.0, 1.0)).unwrap_err();
        match err {
            Error::Deadlock { frontier } => assert_eq!(
                frontier,
                vec![NodeRef { rank: 0, id: 0 }, NodeRef { rank: 1, id: 0 }]
            ),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn rejects_unexpanded_collective() {
        let t = Trace::workload(vec![vec![TraceNode::new(
            4,
            "ar",
            vec![],
            NodeAttrs::coll(crate::trace::CollectiveKind::AllReduce, 64),
        )]])
        .unwrap();
        let err = simulate(&t, &Topology::new(TopologyKind::Ring(1)).unwrap(), &CostModel::new(0.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::UnexpandedCollective { node } if node == NodeRef { rank: 0, id: 4 }));
    }

    #[test]
    fn too_many_ranks() {
        let t = generate(&AlgoSpec::new(Algorithm::RingAllGather, 4, 8)).unwrap();
        let err = simulate(&t, &Topology::new(TopologyKind::Ring(3)).unwrap(), &CostModel::new(0.0, 1.0));
        assert!(matches!(err, Err(Error::Topology(_))));
    }
}

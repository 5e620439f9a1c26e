mod common;

use collgraph::validate::check_semantics;
use collgraph::{generate, AlgoSpec, Algorithm, Error, NodeAttrs, NodeKind, Trace};
use proptest::prelude::*;

fn sizes_for(algo: Algorithm, n: usize) -> u64 {
    match algo {
        Algorithm::RingAllReduce => 1024 * n as u64,
        _ => 1024,
    }
}

fn rank_counts(algo: Algorithm) -> Vec<usize> {
    match algo {
        Algorithm::RecursiveDoublingAllGather => vec![1, 2, 4, 8, 16],
        _ => (1..=16).collect(),
    }
}

fn sent_bytes(t: &Trace, rank: usize) -> u64 {
    t.rank(rank)
        .iter()
        .filter_map(|x| match x.attrs {
            NodeAttrs::Send { comm_size, .. } => Some(comm_size),
            _ => None,
        })
        .sum()
}

#[test]
fn every_generated_trace_passes_validation() {
    for algo in Algorithm::ALL {
        for n in rank_counts(algo) {
            let t = generate(&AlgoSpec::new(algo, n, sizes_for(algo, n))).unwrap();
            let v = check_semantics(&t).unwrap();
            assert!(v.is_pass(), "{algo} N={n}: {:?}", v.violations);
            assert!(v.warnings.is_empty(), "{algo} N={n}: {:?}", v.warnings);
        }
    }
}

#[test]
fn node_counts_per_rank() {
    for n in 2..=16usize {
        let ar = generate(&AlgoSpec::new(Algorithm::RingAllReduce, n, 64 * n as u64)).unwrap();
        let ag = generate(&AlgoSpec::new(Algorithm::RingAllGather, n, 64)).unwrap();
        for r in 0..n {
            assert_eq!(ar.rank(r).len(), 5 * (n - 1));
            assert_eq!(ag.rank(r).len(), 2 * (n - 1));
        }
    }
    for (n, log) in [(2, 1), (4, 2), (8, 3), (16, 4)] {
        let rd = generate(&AlgoSpec::new(Algorithm::RecursiveDoublingAllGather, n, 64)).unwrap();
        assert!(rd.ranks().iter().all(|nodes| nodes.len() == 2 * log));
    }
}

#[test]
fn single_rank_is_empty() {
    for algo in Algorithm::ALL {
        let t = generate(&AlgoSpec::new(algo, 1, 1024)).unwrap();
        assert_eq!(t.num_ranks(), 1);
        assert!(t.is_empty());
    }
}

#[test]
fn ring_algorithms_only_talk_to_neighbours() {
    for algo in [Algorithm::RingAllReduce, Algorithm::RingAllGather] {
        for n in 2..=16usize {
            let t = generate(&AlgoSpec::new(algo, n, 16 * n as u64)).unwrap();
            for (r, nodes) in t.ranks().iter().enumerate() {
                for x in nodes {
                    match x.attrs {
                        NodeAttrs::Send { dst_rank, .. } => assert_eq!(dst_rank, (r + 1) % n),
                        NodeAttrs::Recv { src_rank, .. } => assert_eq!(src_rank, (r + n - 1) % n),
                        _ => {}
                    }
                }
            }
        }
    }
}

#[test]
fn bytes_on_the_wire() {
    for n in 2..=16usize {
        let s = 4096 * n as u64;
        let ar = generate(&AlgoSpec::new(Algorithm::RingAllReduce, n, s)).unwrap();
        let ag = generate(&AlgoSpec::new(Algorithm::RingAllGather, n, s)).unwrap();
        for r in 0..n {
            assert_eq!(sent_bytes(&ar, r), 2 * (n as u64 - 1) * s / n as u64);
            assert_eq!(sent_bytes(&ag, r), (n as u64 - 1) * s);
        }
    }
    for n in [2usize, 4, 8, 16] {
        let rd = generate(&AlgoSpec::new(Algorithm::RecursiveDoublingAllGather, n, 1000)).unwrap();
        for r in 0..n {
            assert_eq!(sent_bytes(&rd, r), (n as u64 - 1) * 1000);
        }
    }
}

#[test]
fn recursive_doubling_pairs_by_xor() {
    let t = generate(&AlgoSpec::new(Algorithm::RecursiveDoublingAllGather, 8, 1 << 20)).unwrap();
    for (r, nodes) in t.ranks().iter().enumerate() {
        let peers: Vec<usize> = nodes
            .iter()
            .filter(|x| x.kind() == NodeKind::CommSend)
            .filter_map(|x| x.attrs.peer())
            .collect();
        assert_eq!(peers, vec![r ^ 1, r ^ 2, r ^ 4]);
        let sizes: Vec<u64> = nodes
            .iter()
            .filter(|x| x.kind() == NodeKind::CommSend)
            .map(|x| x.attrs.size())
            .collect();
        assert_eq!(sizes, vec![1 << 20, 2 << 20, 4 << 20]);
    }
}

#[test]
fn spec_errors() {
    let bad = [
        AlgoSpec::new(Algorithm::RecursiveDoublingAllGather, 6, 1024),
        AlgoSpec::new(Algorithm::RingAllReduce, 0, 1024),
        AlgoSpec::new(Algorithm::RingAllReduce, 4, 0),
        AlgoSpec::new(Algorithm::RingAllReduce, 3, 1024),
    ];
    for spec in bad {
        assert!(matches!(generate(&spec), Err(Error::Spec(_))), "{spec:?}");
    }
    let msg = generate(&bad[0]).unwrap_err().to_string();
    assert!(msg.contains("power-of-two"), "{msg}");
}

#[test]
fn deterministic_output() {
    for algo in Algorithm::ALL {
        let spec = AlgoSpec::new(algo, 8, 8 << 10);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_allreduce_passes_for_any_divisible_size(n in 1usize..12, chunk in 1u64..100_000) {
        let t = generate(&AlgoSpec::new(Algorithm::RingAllReduce, n, chunk * n as u64)).unwrap();
        prop_assert!(check_semantics(&t).unwrap().is_pass());
    }

    #[test]
    fn allgathers_pass_for_any_size(log in 0u32..5, size in 1u64..1 << 30) {
        let n = 1usize << log;
        for algo in [Algorithm::RingAllGather, Algorithm::RecursiveDoublingAllGather] {
            let t = generate(&AlgoSpec::new(algo, n, size)).unwrap();
            prop_assert!(check_semantics(&t).unwrap().is_pass());
        }
    }
}

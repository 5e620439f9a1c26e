mod common;

use collgraph::msccl::{convert_to_trace, parse_msccl_str, parse_msccl_xml, StepType};
use collgraph::sim::{simulate, TopologyKind};
use collgraph::validate::{check_semantics, isomorphic, Status};
use collgraph::{generate, AlgoSpec, Algorithm, CollectiveKind, Error, NodeKind};

use common::*;

#[test]
fn ring_allreduce_fixture_shape() {
    let p = parse_msccl_xml(fixture("ring_allreduce_4.xml")).unwrap();
    assert_eq!(p.num_gpus, 4);
    assert_eq!(p.num_chunks, 4);
    assert_eq!(p.collective, CollectiveKind::AllReduce);
    assert_eq!(p.num_steps(), 4 * 12);
    for g in &p.gpus {
        assert_eq!(g.threadblocks.len(), 2);
        let rrc = g.threadblocks[1].steps.iter().filter(|s| s.kind == StepType::RecvReduceCopy).count();
        assert_eq!(rrc, 3);
    }
}

#[test]
fn converted_ring_matches_generator_at_many_sizes() {
    let p = parse_msccl_xml(fixture("ring_allreduce_4.xml")).unwrap();
    for size in [4u64, 4 * KIB, 4 * MIB, 64 * MIB] {
        let converted = convert_to_trace(&p, size).unwrap();
        let generated = generate(&AlgoSpec::new(Algorithm::RingAllReduce, 4, size)).unwrap();
        assert!(isomorphic(&converted, &generated).unwrap(), "size {size}");
        assert!(check_semantics(&converted).unwrap().is_pass());
        // Isomorphic traces replay identically.
        let a = simulate(&converted, &topo(TopologyKind::Ring(4)), &cost()).unwrap();
        let b = simulate(&generated, &topo(TopologyKind::Ring(4)), &cost()).unwrap();
        assert_eq!(a.total_duration_s, b.total_duration_s);
    }
}

#[test]
fn converted_ring_is_not_isomorphic_to_other_algorithms() {
    let p = parse_msccl_xml(fixture("ring_allreduce_4.xml")).unwrap();
    let converted = convert_to_trace(&p, 4 * MIB).unwrap();
    let ag = generate(&AlgoSpec::new(Algorithm::RingAllGather, 4, MIB)).unwrap();
    assert!(!isomorphic(&converted, &ag).unwrap());
}

#[test]
fn receive_copy_send_allgather() {
    let p = parse_msccl_xml(fixture("ring_allgather_rcs_3.xml")).unwrap();
    let t = convert_to_trace(&p, MIB).unwrap();
    // s, rcs (2 nodes), r
    assert!(t.ranks().iter().all(|nodes| nodes.len() == 4));
    let v = check_semantics(&t).unwrap();
    assert_eq!(v.status, Status::Pass);
    // Every rank sends before it receives, which only works eagerly.
    assert_eq!(v.warnings.len(), 1);
    let r = simulate(&t, &topo(TopologyKind::Ring(3)), &cost()).unwrap();
    assert!(rel_err(r.total_duration_s, ring_allgather_closed_form(3, MIB)) <= 1e-12);
}

#[test]
fn size_must_be_a_multiple_of_nchunks() {
    let p = parse_msccl_xml(fixture("ring_allreduce_4.xml")).unwrap();
    assert!(matches!(convert_to_trace(&p, 4 * MIB + 2), Err(Error::Size(_))));
    assert!(matches!(convert_to_trace(&p, 0), Err(Error::Size(_))));
}

#[test]
fn xml_errors_carry_line_numbers() {
    let text = "<algo name=\"x\" ngpus=\"1\" nchunks=\"1\" coll=\"allreduce\">\n  <gpu id=\"0\">\n    <tb id=\"0\" send=\"-1\" recv=\"-1\" chan=\"0\">\n      <step s=\"0\" type=\"teleport\"/>\n    </tb>\n  </gpu>\n</algo>\n";
    match parse_msccl_str(text).unwrap_err() {
        Error::MscclSchema { line, message } => {
            assert_eq!(line, 4);
            assert!(message.contains("teleport"), "{message}");
        }
        other => panic!("{other}"),
    }
    match parse_msccl_str("<algo name=\"x\"\n ngpus=\"1\">\n<gpu>\n</algo>").unwrap_err() {
        Error::Xml { line, .. } => assert!(line >= 3),
        other => panic!("{other}"),
    }
}

#[test]
fn converted_nodes_follow_step_types() {
    let p = parse_msccl_xml(fixture("ring_allreduce_4.xml")).unwrap();
    let t = convert_to_trace(&p, 4 * MIB).unwrap();
    for nodes in t.ranks() {
        let count = |k| nodes.iter().filter(|x| x.kind() == k).count();
        assert_eq!(count(NodeKind::CommSend), 6);
        assert_eq!(count(NodeKind::CommRecv), 6);
        assert_eq!(count(NodeKind::Comp), 3);
    }
}

#![allow(dead_code)]

use std::path::PathBuf;

use collgraph::sim::{CostModel, Topology, TopologyKind};

pub const KIB: u64 = 1 << 10;
pub const MIB: u64 = 1 << 20;
pub const ALPHA: f64 = 1e-6;
pub const BW: f64 = 1e9;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn cost() -> CostModel {
    CostModel::new(ALPHA, BW)
}

pub fn topo(kind: TopologyKind) -> Topology {
    Topology::new(kind).unwrap()
}

pub fn rel_err(actual: f64, expected: f64) -> f64 {
    if expected == 0.0 {
        actual.abs()
    } else {
        ((actual - expected) / expected).abs()
    }
}

/// 2(N-1)(alpha + (S/N)/B)
pub fn ring_allreduce_closed_form(n: usize, size: u64) -> f64 {
    2.0 * (n as f64 - 1.0) * (ALPHA + (size / n as u64) as f64 / BW)
}

/// (N-1)(alpha + S/B)
pub fn ring_allgather_closed_form(n: usize, size: u64) -> f64 {
    (n as f64 - 1.0) * (ALPHA + size as f64 / BW)
}

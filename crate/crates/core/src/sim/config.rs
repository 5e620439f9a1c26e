use std::path::Path;

use serde::{Deserialize, Serialize};

use super::topology::{Topology, TopologyKind};
use crate::error::{Error, Result};
use crate::trace::CompOp;

/// Link and compute cost parameters for one simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    /// Per-link latency, seconds.
    pub alpha: f64,
    /// Per-link bandwidth, bytes/second.
    pub bandwidth: f64,
    /// REDUCE/COPY throughput; `None` means free.
    pub reduce_bandwidth: Option<f64>,
    /// Throughput for any other compute op. `None` falls back to
    /// `reduce_bandwidth`.
    pub compute_bandwidth: Option<f64>,
    /// Added to every COMP except NOP.
    pub fixed_comp_overhead: f64,
}

impl CostModel {
    pub fn new(alpha: f64, bandwidth: f64) -> Self {
        CostModel {
            alpha,
            bandwidth,
            reduce_bandwidth: None,
            compute_bandwidth: None,
            fixed_comp_overhead: 0.0,
        }
    }

    pub fn check(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Error::Config(format!("{what} must be a non-negative number, got {v}"));
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(bad("alpha", self.alpha));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::Config(format!("bandwidth must be positive, got {}", self.bandwidth)));
        }
        for (what, v) in [
            ("reduce_bandwidth", self.reduce_bandwidth),
            ("compute_bandwidth", self.compute_bandwidth),
        ] {
            if let Some(v) = v {
                if v.is_nan() || v <= 0.0 {
                    return Err(Error::Config(format!("{what} must be positive, got {v}")));
                }
            }
        }
        if !(self.fixed_comp_overhead >= 0.0 && self.fixed_comp_overhead.is_finite()) {
            return Err(bad("fixed_comp_overhead", self.fixed_comp_overhead));
        }
        Ok(())
    }

    /// Time one message holds one link.
    pub fn link_time(&self, bytes: u64) -> f64 {
        self.alpha + bytes as f64 / self.bandwidth
    }

    pub fn comp_time(&self, op: &CompOp, bytes: u64) -> f64 {
        let bw = match op {
            CompOp::Nop => return 0.0,
            CompOp::Reduce | CompOp::Copy => self.reduce_bandwidth,
            CompOp::Other(_) => self.compute_bandwidth.or(self.reduce_bandwidth),
        };
        let work = match bw {
            Some(bw) => bytes as f64 / bw,
            None => 0.0,
        };
        self.fixed_comp_overhead + work
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyDoc {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cols: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct NetDoc {
    #[serde(default)]
    topology: Option<TopologyDoc>,
    alpha_s: f64,
    bandwidth_Bps: f64,
    #[serde(default)]
    reduce_bandwidth_Bps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    compute_bandwidth_Bps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fixed_comp_overhead_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    placement: Option<Vec<usize>>,
}

/// Contents of a network configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    /// Optional here because `sweep` supplies its own topologies.
    pub topology: Option<Topology>,
    pub cost: CostModel,
}

impl NetConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: NetDoc = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let cost = CostModel {
            alpha: doc.alpha_s,
            bandwidth: doc.bandwidth_Bps,
            reduce_bandwidth: doc.reduce_bandwidth_Bps,
            compute_bandwidth: doc.compute_bandwidth_Bps,
            fixed_comp_overhead: doc.fixed_comp_overhead_s.unwrap_or(0.0),
        };
        cost.check()?;
        let topology = match doc.topology {
            None => {
                if doc.placement.is_some() {
                    return Err(Error::Config("placement given without a topology".into()));
                }
                None
            }
            Some(t) => {
                let kind = topology_kind(&t)?;
                let topo = Topology::new(kind)?;
                Some(match doc.placement {
                    Some(p) => topo.with_placement(p)?,
                    None => topo,
                })
            }
        };
        Ok(NetConfig { topology, cost })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn topology_kind(t: &TopologyDoc) -> Result<TopologyKind> {
    let need = |v: Option<usize>, what: &str| {
        v.ok_or_else(|| Error::Config(format!("topology {:?} needs {what:?}", t.kind)))
    };
    let kind = match t.kind.as_str() {
        "ring" => TopologyKind::Ring(need(t.n, "n")?),
        "fully_connected" | "fc" => TopologyKind::FullyConnected(need(t.n, "n")?),
        "switch" => TopologyKind::Switch(need(t.n, "n")?),
        "mesh2d" | "torus2d" => {
            let (rows, cols) = (need(t.rows, "rows")?, need(t.cols, "cols")?);
            if let Some(n) = t.n {
                if n != rows * cols {
                    return Err(Error::Config(format!("n = {n} but rows * cols = {}", rows * cols)));
                }
            }
            if t.kind == "mesh2d" {
                TopologyKind::Mesh2d { rows, cols }
            } else {
                TopologyKind::Torus2d { rows, cols }
            }
        }
        other => return Err(Error::Config(format!("unknown topology kind {other:?}"))),
    };
    Ok(kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = NetConfig::from_json(
            r#"{"topology": {"kind": "ring", "n": 4}, "alpha_s": 1e-6, "bandwidth_Bps": 1e9, "reduce_bandwidth_Bps": null}"#,
        )
        .unwrap();
        assert_eq!(c.topology.unwrap().kind(), TopologyKind::Ring(4));
        assert_eq!(c.cost, CostModel::new(1e-6, 1e9));
    }

    #[test]
    fn grid_and_extensions() {
        let c = NetConfig::from_json(
            r#"{"topology": {"kind": "mesh2d", "rows": 2, "cols": 2}, "alpha_s": 0, "bandwidth_Bps": 1,
                "compute_bandwidth_Bps": 4, "fixed_comp_overhead_s": 0.5, "placement": [3, 2, 1, 0]}"#,
        )
        .unwrap();
        let t = c.topology.unwrap();
        assert_eq!(t.node_of_rank(0), 3);
        assert_eq!(c.cost.comp_time(&CompOp::Other("gemm".into()), 8), 2.5);
        assert_eq!(c.cost.comp_time(&CompOp::Reduce, 8), 0.5);
        assert_eq!(c.cost.comp_time(&CompOp::Nop, 8), 0.0);
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            r#"{"alpha_s": -1, "bandwidth_Bps": 1}"#,
            r#"{"alpha_s": 0, "bandwidth_Bps": 0}"#,
            r#"{"alpha_s": 0, "bandwidth_Bps": 1, "reduce_bandwidth_Bps": 0}"#,
            r#"{"alpha_s": 0, "bandwidth_Bps": 1, "bogus": 1}"#,
            r#"{"topology": {"kind": "mesh2d", "n": 4}, "alpha_s": 0, "bandwidth_Bps": 1}"#,
            r#"{"topology": {"kind": "hypercube", "n": 4}, "alpha_s": 0, "bandwidth_Bps": 1}"#,
        ] {
            assert!(matches!(NetConfig::from_json(text), Err(Error::Config(_) | Error::Topology(_))), "{text}");
        }
    }
}

//! Analytical network simulation of expanded traces.

mod config;
mod engine;
mod sweep;
mod topology;

pub use config::{CostModel, NetConfig};
pub use engine::{simulate, LinkUsage, NodeTiming, SimReport};
pub use sweep::{sweep, sweep_csv, SweepRow, TraceFamily};
pub use topology::{Link, Topology, TopologyKind};

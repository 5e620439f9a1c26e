use std::fmt::Write as _;

use rayon::prelude::*;

use super::config::CostModel;
use super::engine::simulate;
use super::topology::Topology;
use crate::error::{Error, Result};
use crate::generate::{generate, AlgoSpec, Algorithm};
use crate::msccl::{convert_to_trace, MscclProgram};
use crate::trace::Trace;

/// Something that yields one trace per collective size.
#[derive(Debug, Clone)]
pub enum TraceFamily {
    Generated { algorithm: Algorithm, num_ranks: usize },
    Msccl(MscclProgram),
}

impl TraceFamily {
    pub fn num_ranks(&self) -> usize {
        match self {
            TraceFamily::Generated { num_ranks, .. } => *num_ranks,
            TraceFamily::Msccl(p) => p.num_gpus,
        }
    }

    pub fn trace_for(&self, size: u64) -> Result<Trace> {
        match self {
            TraceFamily::Generated {
                algorithm,
                num_ranks,
            } => generate(&AlgoSpec::new(*algorithm, *num_ranks, size)),
            TraceFamily::Msccl(p) => convert_to_trace(p, size),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub topology: String,
    pub size: u64,
    pub duration: f64,
    pub slowdown: f64,
}

/// Simulates every (topology, size) cell and reports durations relative to
/// `baseline`. Rows follow `topologies` order, sizes ascending within each.
/// `jobs` bounds the worker threads; results do not depend on it.
pub fn sweep(
    family: &TraceFamily,
    topologies: &[Topology],
    baseline: &Topology,
    sizes: &[u64],
    cost: &CostModel,
    jobs: usize,
) -> Result<Vec<SweepRow>> {
    let mut sizes = sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;

    let cell_err = |topo: &Topology, size: u64| {
        let label = topo.kind().to_string();
        move |e: Error| Error::SweepCell {
            topology: label,
            size,
            source: Box::new(e),
        }
    };

    pool.install(|| {
        let traces: Vec<Trace> = sizes
            .par_iter()
            .map(|&s| family.trace_for(s).map_err(cell_err(baseline, s)))
            .collect::<Result<_>>()?;

        // Cell 0.. are the baseline, one per size, then the requested grid.
        let cells: Vec<(&Topology, usize)> = std::iter::repeat(baseline)
            .zip(0..sizes.len())
            .chain(
                topologies
                    .iter()
                    .flat_map(|t| (0..sizes.len()).map(move |i| (t, i))),
            )
            .collect();
        let durations: Vec<f64> = cells
            .par_iter()
            .map(|&(topo, i)| {
                simulate(&traces[i], topo, cost)
                    .map(|r| r.total_duration_s)
                    .map_err(cell_err(topo, sizes[i]))
            })
            .collect::<Result<_>>()?;

        let (base, grid) = durations.split_at(sizes.len());
        Ok(cells[sizes.len()..]
            .iter()
            .zip(grid)
            .map(|(&(topo, i), &duration)| SweepRow {
                topology: topo.kind().to_string(),
                size: sizes[i],
                duration,
                slowdown: if base[i] > 0.0 { duration / base[i] } else { 1.0 },
            })
            .collect())
    })
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("topology,size_bytes,duration_s,slowdown\n");
    for r in rows {
        writeln!(out, "{},{},{:e},{}", r.topology, r.size, r.duration, r.slowdown).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::TopologyKind;

    fn topo(kind: TopologyKind) -> Topology {
        Topology::new(kind).unwrap()
    }

    #[test]
    fn job_count_does_not_change_output() {
        let family = TraceFamily::Generated {
            algorithm: Algorithm::RingAllReduce,
            num_ranks: 8,
        };
        let topos = [
            topo(TopologyKind::Ring(8)),
            topo(TopologyKind::Switch(8)),
            topo(TopologyKind::Mesh2d { rows: 2, cols: 4 }),
        ];
        let sizes = [1 << 20, 1 << 12, 1 << 16];
        let cost = CostModel::new(1e-6, 1e9);
        let a = sweep(&family, &topos, &topos[0], &sizes, &cost, 1).unwrap();
        let b = sweep(&family, &topos, &topos[0], &sizes, &cost, 4).unwrap();
        assert_eq!(sweep_csv(&a), sweep_csv(&b));
        assert_eq!(a.len(), 9);
        assert_eq!(a[0].size, 1 << 12);
        assert!(a[..3].iter().all(|r| r.slowdown == 1.0));
        assert_eq!(a[3].topology, "switch");
    }

    #[test]
    fn failing_cell_is_named() {
        let family = TraceFamily::Generated {
            algorithm: Algorithm::RingAllReduce,
            num_ranks: 4,
        };
        let ring = topo(TopologyKind::Ring(4));
        let err = sweep(&family, std::slice::from_ref(&ring), &ring, &[6], &CostModel::new(0.0, 1.0), 2).unwrap_err();
        assert!(matches!(err, Error::SweepCell { size: 6, .. }), "{err}");
    }

    #[test]
    fn csv_shape() {
        let rows = [SweepRow {
            topology: "ring".into(),
            size: 1024,
            duration: 6.297456e-3,
            slowdown: 1.0,
        }];
        assert_eq!(sweep_csv(&rows), "topology,size_bytes,duration_s,slowdown\nring,1024,6.297456e-3,1\n");
    }
}

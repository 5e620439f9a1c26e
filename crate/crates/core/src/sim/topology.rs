use std::fmt;

use crate::error::{Error, Result};

/// A directed physical link `(from, to)` between topology nodes.
pub type Link = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TopologyKind {
    Ring(usize),
    FullyConnected(usize),
    Mesh2d { rows: usize, cols: usize },
    Torus2d { rows: usize, cols: usize },
    /// `n` endpoints attached to one switch node with id `n`.
    Switch(usize),
}

impl TopologyKind {
    pub fn num_endpoints(self) -> usize {
        match self {
            TopologyKind::Ring(n) | TopologyKind::FullyConnected(n) | TopologyKind::Switch(n) => n,
            TopologyKind::Mesh2d { rows, cols } | TopologyKind::Torus2d { rows, cols } => rows * cols,
        }
    }

    /// Parses a topology token for `n` ranks: `ring`, `fc` /
    /// `fully_connected`, `switch`, `mesh2d:RxC`, `torus2d:RxC`. A bare
    /// `mesh2d` or `torus2d` picks the squarest factorization of `n`.
    pub fn parse(token: &str, n: usize) -> Result<Self> {
        let (name, dims) = match token.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (token, None),
        };
        let grid = |dims: Option<&str>| -> Result<(usize, usize)> {
            match dims {
                Some(d) => {
                    let (r, c) = d
                        .split_once(['x', 'X'])
                        .ok_or_else(|| Error::Topology(format!("bad grid {d:?}, expected RxC")))?;
                    let parse = |s: &str| {
                        s.trim()
                            .parse::<usize>()
                            .map_err(|_| Error::Topology(format!("bad grid {d:?}")))
                    };
                    Ok((parse(r)?, parse(c)?))
                }
                None => {
                    let mut rows = (n as f64).sqrt() as usize;
                    while rows > 1 && !n.is_multiple_of(rows) {
                        rows -= 1;
                    }
                    Ok((rows.max(1), n / rows.max(1)))
                }
            }
        };
        let no_dims = |kind: TopologyKind| match dims {
            None => Ok(kind),
            Some(_) => Err(Error::Topology(format!("{name} takes no dimensions"))),
        };
        let kind = match name.to_ascii_lowercase().as_str() {
            "ring" => no_dims(TopologyKind::Ring(n))?,
            "fc" | "fully_connected" | "fully-connected" => no_dims(TopologyKind::FullyConnected(n))?,
            "switch" => no_dims(TopologyKind::Switch(n))?,
            "mesh2d" | "mesh" => {
                let (rows, cols) = grid(dims)?;
                TopologyKind::Mesh2d { rows, cols }
            }
            "torus2d" | "torus" => {
                let (rows, cols) = grid(dims)?;
                TopologyKind::Torus2d { rows, cols }
            }
            other => return Err(Error::Topology(format!("unknown topology {other:?}"))),
        };
        Ok(kind)
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyKind::Ring(_) => f.write_str("ring"),
            TopologyKind::FullyConnected(_) => f.write_str("fully_connected"),
            TopologyKind::Switch(_) => f.write_str("switch"),
            TopologyKind::Mesh2d { rows, cols } => write!(f, "mesh2d:{rows}x{cols}"),
            TopologyKind::Torus2d { rows, cols } => write!(f, "torus2d:{rows}x{cols}"),
        }
    }
}

/// A physical network plus the placement of ranks onto its endpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    kind: TopologyKind,
    placement: Vec<usize>,
}

impl Topology {
    /// Identity placement; grid kinds place ranks row-major.
    pub fn new(kind: TopologyKind) -> Result<Self> {
        let n = kind.num_endpoints();
        if n == 0 {
            return Err(Error::Topology(format!("{kind} needs at least one endpoint")));
        }
        Ok(Topology {
            kind,
            placement: (0..n).collect(),
        })
    }

    /// `placement[rank]` is the endpoint rank runs on; must be a
    /// permutation of the endpoints.
    pub fn with_placement(mut self, placement: Vec<usize>) -> Result<Self> {
        let n = self.kind.num_endpoints();
        let mut seen = vec![false; n];
        if placement.len() != n {
            return Err(Error::Topology(format!(
                "placement has {} entries for {n} endpoints",
                placement.len()
            )));
        }
        for &p in &placement {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::Topology("placement is not a permutation".into()));
            }
        }
        self.placement = placement;
        Ok(self)
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn num_endpoints(&self) -> usize {
        self.kind.num_endpoints()
    }

    pub fn node_of_rank(&self, rank: usize) -> usize {
        self.placement[rank]
    }

    fn contains(&self, node: usize) -> bool {
        match self.kind {
            TopologyKind::Switch(n) => node <= n,
            k => node < k.num_endpoints(),
        }
    }

    /// Deterministic path from `src` to `dst`.
    ///
    /// Rings take the shorter arc (ties go clockwise), grids use
    /// dimension-order routing (columns first, then rows; tori wrap the
    /// shorter way with ties going up), switches go through the switch.
    pub fn route(&self, src: usize, dst: usize) -> Result<Vec<Link>> {
        if src == dst || !self.contains(src) || !self.contains(dst) {
            return Err(Error::Unreachable { src, dst });
        }
        let path = match self.kind {
            TopologyKind::FullyConnected(_) => vec![(src, dst)],
            TopologyKind::Switch(n) => {
                if src == n || dst == n {
                    vec![(src, dst)]
                } else {
                    vec![(src, n), (n, dst)]
                }
            }
            TopologyKind::Ring(n) => {
                let cw = (dst + n - src) % n;
                let step: isize = if cw <= n - cw { 1 } else { -1 };
                walk_1d(src, dst, n, step, true)
                    .into_iter()
                    .collect()
            }
            TopologyKind::Mesh2d { rows: _, cols } => grid_route(src, dst, cols, None),
            TopologyKind::Torus2d { rows, cols } => grid_route(src, dst, cols, Some(rows)),
        };
        Ok(path)
    }
}

/// Hops along one dimension of size `n` from `from` to `to`.
fn walk_1d(from: usize, to: usize, n: usize, step: isize, wrap: bool) -> Vec<Link> {
    let mut out = Vec::new();
    let mut cur = from;
    while cur != to {
        let next = if wrap {
            (cur as isize + step).rem_euclid(n as isize) as usize
        } else {
            (cur as isize + step) as usize
        };
        out.push((cur, next));
        cur = next;
    }
    out
}

fn direction(from: usize, to: usize, n: usize, wrap: bool) -> isize {
    if !wrap {
        return if to > from { 1 } else { -1 };
    }
    let up = (to + n - from) % n;
    if up <= n - up {
        1
    } else {
        -1
    }
}

fn grid_route(src: usize, dst: usize, cols: usize, torus_rows: Option<usize>) -> Vec<Link> {
    let wrap = torus_rows.is_some();
    let (sr, sc) = (src / cols, src % cols);
    let (dr, dc) = (dst / cols, dst % cols);
    let mut path = Vec::new();
    if sc != dc {
        let step = direction(sc, dc, cols, wrap);
        path.extend(
            walk_1d(sc, dc, cols, step, wrap)
                .into_iter()
                .map(|(a, b)| (sr * cols + a, sr * cols + b)),
        );
    }
    if sr != dr {
        let rows = torus_rows.unwrap_or(usize::MAX);
        let step = direction(sr, dr, rows, wrap);
        path.extend(
            walk_1d(sr, dr, rows, step, wrap)
                .into_iter()
                .map(|(a, b)| (a * cols + dc, b * cols + dc)),
        );
    }
    path
}

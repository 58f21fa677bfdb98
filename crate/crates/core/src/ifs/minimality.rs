use super::IfsWithProbabilities;
use crate::homeo::{CircleMap, Homeomorphism, Orientation};
use serde::{Deserialize, Serialize};

pub const DEFAULT_CERTIFICATE_GRID: usize = 1024;

/// Image arcs are trimmed by this fraction of a cell at each end, so images
/// landing exactly on a cell boundary do not create spurious edges.
const EDGE_TRIM: f64 = 1e-9;

/// Strong connectivity of the cell reachability graph, for the maps and for
/// their inverses. Finite resolution can certify systems that are only
/// minimal above `1 / grid_size`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinimalityCertificate {
    pub forward: bool,
    pub backward: bool,
    pub grid_size: usize,
}

impl MinimalityCertificate {
    pub fn passes(&self) -> bool {
        self.forward && self.backward
    }
}

pub fn minimality_certificate(ifs: &IfsWithProbabilities, grid_size: usize) -> MinimalityCertificate {
    let grid_size = grid_size.max(16);
    let inverses: Vec<Homeomorphism> = (0..ifs.len()).map(|j| ifs.inverse_map(j).clone()).collect();
    MinimalityCertificate {
        forward: strongly_connected(&cell_graph(ifs.maps(), grid_size)),
        backward: strongly_connected(&cell_graph(&inverses, grid_size)),
        grid_size,
    }
}

fn cell_graph(maps: &[Homeomorphism], g: usize) -> Vec<Vec<usize>> {
    let gf = g as f64;
    let mut adj = vec![Vec::new(); g];
    for (i, targets) in adj.iter_mut().enumerate() {
        for f in maps {
            let a = f.evaluate((i as f64 / gf).into());
            let b = f.evaluate(((i + 1) as f64 / gf).into());
            let (start, end) = match f.orientation() {
                Orientation::Preserving => (a, b),
                Orientation::Reversing => (b, a),
            };
            let len = start.ccw_to(end);
            let trim = (EDGE_TRIM / gf).min(len / 4.0);
            let lo = (start.value() + trim) * gf;
            let hi = (start.value() + len - trim) * gf;
            let first = lo.floor() as i64;
            let last = (hi.floor() as i64).max(first);
            for c in first..=last {
                targets.push(c.rem_euclid(g as i64) as usize);
            }
        }
        targets.sort_unstable();
        targets.dedup();
    }
    adj
}

fn reaches_all(adj: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == adj.len()
}

fn strongly_connected(adj: &[Vec<usize>]) -> bool {
    let mut reversed = vec![Vec::new(); adj.len()];
    for (v, targets) in adj.iter().enumerate() {
        for &w in targets {
            reversed[w].push(v);
        }
    }
    reaches_all(adj) && reaches_all(&reversed)
}

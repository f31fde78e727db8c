//! Protocol (guard-zone) interference model.
//!
//! A reception at `X2` from `X1` succeeds iff every other transmitter `X3`
//! active on the same channel satisfies
//! `dist(X3, X2) >= (1 + Δ) · dist(X1, X2)`.

use std::collections::HashMap;

use thiserror::Error;

use crate::topology::{CellGrid, Point, Topology};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterferenceError {
    #[error("guard zone delta = {0} must be positive")]
    NonPositiveDelta(f64),
}

/// Pairwise check of one concurrent `(transmitter, receiver)` set on one channel.
pub fn is_concurrent_set_feasible(transmissions: &[(Point, Point)], delta: f64) -> bool {
    for (i, (tx, rx)) in transmissions.iter().enumerate() {
        let guard = (1.0 + delta) * tx.dist(rx);
        for (j, (other, _)) in transmissions.iter().enumerate() {
            if i != j && other.dist(rx) < guard {
                return false;
            }
        }
    }
    true
}

/// Spatially bucketed version of [`is_concurrent_set_feasible`] for large sets.
///
/// Returns `(victim, interferer)`: the transmission whose receiver is hit and
/// the transmission whose transmitter is too close.
pub fn find_violation(transmissions: &[(Point, Point)], delta: f64) -> Option<(usize, usize)> {
    let reach = transmissions.iter().map(|(tx, rx)| (1.0 + delta) * tx.dist(rx)).fold(0.0f64, f64::max);
    if transmissions.len() < 2 {
        return None;
    }
    if !(reach > 0.0) {
        return None;
    }
    let bucket = |p: &Point| ((p.x / reach).floor() as i64, (p.y / reach).floor() as i64);
    let mut buckets: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
    for (j, (tx, _)) in transmissions.iter().enumerate() {
        buckets.entry(bucket(tx)).or_default().push(j as u32);
    }
    for (i, (tx, rx)) in transmissions.iter().enumerate() {
        let guard = (1.0 + delta) * tx.dist(rx);
        let (bx, by) = bucket(rx);
        for gx in bx - 1..=bx + 1 {
            for gy in by - 1..=by + 1 {
                let Some(list) = buckets.get(&(gx, gy)) else { continue };
                for &j in list {
                    let j = j as usize;
                    if j != i && transmissions[j].0.dist(rx) < guard {
                        return Some((i, j));
                    }
                }
            }
        }
    }
    None
}

/// `4(1+Δ)²` rounded up to a whole number of cells.
pub fn interfering_cell_bound(delta: f64) -> Result<u32, InterferenceError> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(InterferenceError::NonPositiveDelta(delta));
    }
    Ok((4.0 * (1.0 + delta).powi(2)).ceil() as u32)
}

/// Cells around `cell` that lie entirely inside the disk of radius
/// `(1+Δ)·sqrt(2a)` centered on it, `a` being the cell area.
///
/// The radius is the guard distance for a hop no longer than the cell
/// diagonal. The cell itself is not counted.
pub fn interfering_cells(cell: usize, grid: &CellGrid, delta: f64) -> Result<Vec<usize>, InterferenceError> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(InterferenceError::NonPositiveDelta(delta));
    }
    // squared radius in cell-width units: ((1+Δ)·√2)²
    let radius2 = 2.0 * (1.0 + delta) * (1.0 + delta);
    let reach = radius2.sqrt().ceil() as i64;
    let (c0, r0) = grid.col_row_of_index(cell);
    let g = grid.side as i64;
    let mut cells = Vec::new();
    for dr in -reach..=reach {
        for dc in -reach..=reach {
            if dr == 0 && dc == 0 {
                continue;
            }
            let (c, r) = (c0 as i64 + dc, r0 as i64 + dr);
            if c < 0 || r < 0 || c >= g || r >= g {
                continue;
            }
            let far_x = dc.abs() as f64 + 0.5;
            let far_y = dr.abs() as f64 + 0.5;
            if far_x * far_x + far_y * far_y <= radius2 {
                cells.push(grid.index(c as u32, r as u32));
            }
        }
    }
    Ok(cells)
}

/// Neighbor access shared by explicit and implicit graphs.
pub trait Adjacency {
    fn vertex_count(&self) -> usize;
    /// Replaces `out` with the neighbors of `v`.
    fn neighbors(&self, v: usize, out: &mut Vec<usize>);
}

/// Explicit undirected conflict graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterferenceGraph {
    adj: Vec<Vec<u32>>,
}

impl InterferenceGraph {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> InterferenceGraph {
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u != v && !adj[u].contains(&(v as u32)) {
                adj[u].push(v as u32);
                adj[v].push(u as u32);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        InterferenceGraph { adj }
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&(v as u32)).is_ok()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| (v as usize) > u).map(move |&v| (u, v as usize)))
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edge list as `u,v` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("u,v\n");
        for (u, v) in self.edges() {
            out.push_str(&format!("{u},{v}\n"));
        }
        out
    }
}

impl Adjacency for InterferenceGraph {
    fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    fn neighbors(&self, v: usize, out: &mut Vec<usize>) {
        out.clear();
        out.extend(self.adj[v].iter().map(|&u| u as usize));
    }
}

/// Implicit conflict graph over points: `u ~ v` iff
/// `dist(u, v) < (2+Δ) · max(reach_u, reach_v)`.
///
/// With every reach equal to the range `r` this is the conservative graph:
/// two transmitters this far apart can never violate each other's guard zone
/// whatever in-range receivers they pick. With per-vertex reach set to the
/// longest hop a vertex actually transmits, it is sound for those hops only.
pub struct GeometricConflicts {
    points: Vec<Point>,
    reach: Vec<f64>,
    factor: f64,
    bucket: f64,
    buckets: HashMap<(i64, i64), Vec<u32>>,
}

impl GeometricConflicts {
    pub fn new(points: Vec<Point>, reach: Vec<f64>, delta: f64) -> GeometricConflicts {
        assert_eq!(points.len(), reach.len());
        let factor = 2.0 + delta;
        let max_reach = reach.iter().copied().fold(0.0f64, f64::max);
        let bucket = (factor * max_reach).max(1e-9);
        let mut buckets: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(Self::key(p, bucket)).or_default().push(i as u32);
        }
        GeometricConflicts { points, reach, factor, bucket, buckets }
    }

    pub fn uniform(points: Vec<Point>, r: f64, delta: f64) -> GeometricConflicts {
        let reach = vec![r; points.len()];
        GeometricConflicts::new(points, reach, delta)
    }

    fn key(p: &Point, bucket: f64) -> (i64, i64) {
        ((p.x / bucket).floor() as i64, (p.y / bucket).floor() as i64)
    }

    pub fn conflicts(&self, u: usize, v: usize) -> bool {
        u != v && self.points[u].dist(&self.points[v]) < self.factor * self.reach[u].max(self.reach[v])
    }

    pub fn materialize(&self) -> InterferenceGraph {
        let mut adj = vec![Vec::new(); self.points.len()];
        let mut buf = Vec::new();
        for (u, list) in adj.iter_mut().enumerate() {
            self.neighbors(u, &mut buf);
            list.extend(buf.iter().map(|&v| v as u32));
            list.sort_unstable();
        }
        InterferenceGraph { adj }
    }
}

impl Adjacency for GeometricConflicts {
    fn vertex_count(&self) -> usize {
        self.points.len()
    }

    fn neighbors(&self, u: usize, out: &mut Vec<usize>) {
        out.clear();
        let (bx, by) = Self::key(&self.points[u], self.bucket);
        for gx in bx - 1..=bx + 1 {
            for gy in by - 1..=by + 1 {
                if let Some(list) = self.buckets.get(&(gx, gy)) {
                    out.extend(list.iter().map(|&v| v as usize).filter(|&v| self.conflicts(u, v)));
                }
            }
        }
    }
}

/// Conservative node-level conflict graph over every node of `topo`.
pub fn build_interference_graph(topo: &Topology, r: f64, delta: f64) -> InterferenceGraph {
    GeometricConflicts::uniform(topo.nodes.clone(), r, delta).materialize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::place_nodes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn predicate_examples() {
        let a = (Point::new(0.0, 0.0), Point::new(0.0, 0.1));
        assert!(is_concurrent_set_feasible(&[a], 1.0));
        let far = (Point::new(1.0, 0.0), Point::new(1.0, 0.05));
        assert!(is_concurrent_set_feasible(&[a, far], 1.0));
        let near = (Point::new(0.0, 0.15), Point::new(0.0, 0.2));
        assert!(!is_concurrent_set_feasible(&[a, near], 1.0));
        assert_eq!(find_violation(&[a, near], 1.0), Some((0, 1)));
        assert_eq!(find_violation(&[a, far], 1.0), None);
    }

    #[test]
    fn cell_bound_values() {
        assert_eq!(interfering_cell_bound(1.0), Ok(16));
        assert_eq!(interfering_cell_bound(0.5), Ok(9));
        assert_eq!(interfering_cell_bound(2.0), Ok(36));
        assert!(interfering_cell_bound(0.0).is_err());
    }

    #[test]
    fn interior_and_corner_cells() {
        let g = CellGrid::new(20);
        for delta in [0.5, 1.0, 2.0] {
            let bound = interfering_cell_bound(delta).unwrap() as usize;
            let interior = interfering_cells(g.index(10, 10), &g, delta).unwrap();
            let corner = interfering_cells(0, &g, delta).unwrap();
            assert!(interior.len() <= bound, "{delta}: {}", interior.len());
            assert!(corner.len() <= interior.len());
            assert!(!interior.contains(&g.index(10, 10)));
        }
        assert_eq!(interfering_cells(g.index(10, 10), &g, 1.0).unwrap().len(), 12);
    }

    #[test]
    fn distant_nodes_have_no_edge() {
        let nodes = vec![Point::new(0.1, 0.1), Point::new(0.5, 0.1), Point::new(0.15, 0.1)];
        let topo = Topology::from_nodes(nodes, 1, 0.25).unwrap();
        let g = build_interference_graph(&topo, 0.1, 1.0);
        assert!(!g.has_edge(0, 1));
        assert!(g.has_edge(0, 2) && g.has_edge(2, 0));
    }

    #[test]
    fn graph_is_symmetric_without_loops() {
        let topo = Topology::from_nodes(place_nodes(400, 8), 1, 0.01).unwrap();
        let g = build_interference_graph(&topo, 0.05, 1.0);
        for u in 0..400 {
            assert!(!g.has_edge(u, u));
        }
        for (u, v) in g.edges() {
            assert!(g.has_edge(v, u));
        }
    }

    #[test]
    fn soundness_audit() {
        // non-adjacent transmitters with arbitrary in-range receivers never collide
        let r = 0.05;
        let delta = 1.0;
        let topo = Topology::from_nodes(place_nodes(600, 21), 1, 0.01).unwrap();
        let g = build_interference_graph(&topo, r, delta);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut checked = 0;
        while checked < 10_000 {
            let u = rng.random_range(0..600);
            let v = rng.random_range(0..600);
            if u == v || g.has_edge(u, v) {
                continue;
            }
            let mut receiver = |p: Point| {
                let ang = rng.random::<f64>() * std::f64::consts::TAU;
                let len = r * rng.random::<f64>();
                Point::new(p.x + len * ang.cos(), p.y + len * ang.sin())
            };
            let a = (topo.nodes[u], receiver(topo.nodes[u]));
            let b = (topo.nodes[v], receiver(topo.nodes[v]));
            assert!(is_concurrent_set_feasible(&[a, b], delta));
            checked += 1;
        }
    }

    #[test]
    fn per_vertex_reach_uses_the_larger_one() {
        let pts = vec![Point::new(0.0, 0.0), Point::new(0.25, 0.0)];
        let g = GeometricConflicts::new(pts, vec![0.01, 0.1], 1.0);
        assert!(g.conflicts(0, 1) && g.conflicts(1, 0));
        let g = GeometricConflicts::new(vec![Point::new(0.0, 0.0), Point::new(0.35, 0.0)], vec![0.01, 0.1], 1.0);
        assert!(!g.conflicts(0, 1));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn transmission() -> impl Strategy<Value = (Point, Point)> {
            (0.0f64..1.0, 0.0f64..1.0, 0.0f64..std::f64::consts::TAU, 0.0f64..0.08)
                .prop_map(|(x, y, a, l)| (Point::new(x, y), Point::new(x + l * a.cos(), y + l * a.sin())))
        }

        proptest! {
            #[test]
            fn bucketed_check_agrees_with_pairwise(
                set in proptest::collection::vec(transmission(), 0..40), delta in 0.1f64..2.0,
            ) {
                prop_assert_eq!(find_violation(&set, delta).is_none(), is_concurrent_set_feasible(&set, delta));
            }

            #[test]
            fn implicit_and_explicit_graphs_agree(seed in 0u64..500, r in 0.01f64..0.2) {
                let pts = place_nodes(120, seed);
                let implicit = GeometricConflicts::uniform(pts.clone(), r, 1.0);
                let explicit = implicit.materialize();
                for u in 0..120 {
                    for v in 0..120 {
                        let expect = u != v && pts[u].dist(&pts[v]) < 3.0 * r;
                        prop_assert_eq!(explicit.has_edge(u, v), expect);
                    }
                }
            }
        }
    }
}

//! H-max-hop routing: mode selection, straight-line cell routes and flow assignment.
//!
//! A flow whose destination lies within `H·r` of its source is routed ad hoc
//! along the cells crossed by the S-D segment, one relay per intermediate
//! cell. Every other flow goes up to the base station of the source's
//! BS-cell, across the wired backbone and down from the destination's.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::topology::{CellGrid, Point, Topology};

/// RNG stream used for destination sampling, disjoint from node placement.
const DESTINATION_STREAM: u64 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoutingError {
    #[error("flow from node {0} to itself")]
    DegenerateFlow(usize),
    #[error("hop limit H must be at least 1")]
    ZeroHops,
    #[error("flow {flow}: no relay within range {range} after node {at}")]
    Unroutable { flow: usize, at: usize, range: f64 },
    #[error("at least two nodes are needed to assign flows")]
    TooFewNodes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Mode {
    AdHoc,
    Infrastructure,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::AdHoc => "adhoc",
            Mode::Infrastructure => "infra",
        })
    }
}

/// Ad hoc iff the destination lies in the closed disk of radius `H·r`.
pub fn mode_for_distance(dist: f64, h: u32, r: f64) -> Mode {
    if dist <= h as f64 * r {
        Mode::AdHoc
    } else {
        Mode::Infrastructure
    }
}

pub fn select_mode(topo: &Topology, src: usize, dst: usize, h: u32, r: f64) -> Result<Mode, RoutingError> {
    if src == dst {
        return Err(RoutingError::DegenerateFlow(src));
    }
    Ok(mode_for_distance(topo.nodes[src].dist(&topo.nodes[dst]), h, r))
}

/// Mean hop count when the destination is uniform in the radius-`H·r` disk.
pub fn expected_hops(h: u32) -> Result<f64, RoutingError> {
    if h < 1 {
        return Err(RoutingError::ZeroHops);
    }
    let h = h as f64;
    Ok((4.0 * h * h * h + 3.0 * h * h - h) / (6.0 * h * h))
}

/// `πH²r²`, clamped to 1.
pub fn prob_adhoc(h: u32, r: f64) -> f64 {
    let h = h as f64;
    (std::f64::consts::PI * h * h * r * r).min(1.0)
}

/// Hops needed to cover `dist` with range `r`; always at least one.
pub fn hops_for_distance(dist: f64, r: f64) -> u32 {
    ((dist / r).ceil() as u32).max(1)
}

/// Cells crossed by the segment `a → b`, in traversal order.
///
/// When the segment passes exactly through a grid corner the walk moves
/// diagonally; the two cells touching only that corner are not included.
pub fn segment_cells(grid: &CellGrid, a: &Point, b: &Point) -> Vec<usize> {
    let (mut col, mut row) = grid.col_row(a);
    let (end_col, end_row) = grid.col_row(b);
    let w = grid.width();
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let step_x: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dy > 0.0 { 1 } else { -1 };
    let mut t_max_x = if dx > 0.0 {
        ((col + 1) as f64 * w - a.x) / dx
    } else if dx < 0.0 {
        (col as f64 * w - a.x) / dx
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dy > 0.0 {
        ((row + 1) as f64 * w - a.y) / dy
    } else if dy < 0.0 {
        (row as f64 * w - a.y) / dy
    } else {
        f64::INFINITY
    };
    let t_delta_x = if dx != 0.0 { w / dx.abs() } else { f64::INFINITY };
    let t_delta_y = if dy != 0.0 { w / dy.abs() } else { f64::INFINITY };

    let mut cells = Vec::with_capacity((end_col.abs_diff(col) + end_row.abs_diff(row) + 1) as usize);
    cells.push(grid.index(col, row));
    while (col, row) != (end_col, end_row) {
        let x_left = col != end_col;
        let y_left = row != end_row;
        let tie = (t_max_x - t_max_y).abs() <= 1e-12 * t_max_x.abs().max(1.0);
        let (move_x, move_y) = match (x_left, y_left) {
            (true, false) => (true, false),
            (false, true) => (false, true),
            _ if tie => (true, true),
            _ => (t_max_x < t_max_y, t_max_x > t_max_y),
        };
        if move_x {
            col = (col as i64 + step_x) as u32;
            t_max_x += t_delta_x;
        }
        if move_y {
            row = (row as i64 + step_y) as u32;
            t_max_y += t_delta_y;
        }
        cells.push(grid.index(col, row));
    }
    cells
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Route {
    /// Full node path, source first and destination last.
    AdHoc {
        path: Vec<u32>,
    },
    Infrastructure {
        uplink: u32,
        downlink: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Flow {
    pub id: usize,
    pub src: usize,
    pub dst: usize,
    pub route: Route,
    /// Euclidean S-D distance.
    pub length: f64,
}

impl Flow {
    pub fn mode(&self) -> Mode {
        match self.route {
            Route::AdHoc { .. } => Mode::AdHoc,
            Route::Infrastructure { .. } => Mode::Infrastructure,
        }
    }

    /// Wireless hops: path edges for ad hoc, uplink plus downlink otherwise.
    pub fn hop_count(&self) -> usize {
        match &self.route {
            Route::AdHoc { path } => path.len() - 1,
            Route::Infrastructure { .. } => 2,
        }
    }
}

/// Chooses the relay inside a cell.
pub trait RelayPicker {
    fn pick(&mut self, cell: usize) -> Option<u32>;
}

/// Per-cell candidate lists ordered by distance to the cell center (ties by index).
fn members_by_center(topo: &Topology) -> Vec<Vec<u32>> {
    let grid = topo.cell_grid;
    let mut members = topo.cell_members();
    for (cell, list) in members.iter_mut().enumerate() {
        let c = grid.center(cell);
        list.sort_by(|&a, &b| {
            let da = topo.nodes[a as usize].dist2(&c);
            let db = topo.nodes[b as usize].dist2(&c);
            da.total_cmp(&db).then(a.cmp(&b))
        });
    }
    members
}

/// Always the node nearest the cell center.
pub struct NearestCenter {
    members: Vec<Vec<u32>>,
}

impl NearestCenter {
    pub fn new(topo: &Topology) -> NearestCenter {
        NearestCenter { members: members_by_center(topo) }
    }
}

impl RelayPicker for NearestCenter {
    fn pick(&mut self, cell: usize) -> Option<u32> {
        self.members[cell].first().copied()
    }
}

/// Rotates through each cell's nodes, starting at the one nearest the center.
pub struct RoundRobin {
    members: Vec<Vec<u32>>,
    cursor: Vec<u32>,
}

impl RoundRobin {
    pub fn new(topo: &Topology) -> RoundRobin {
        let members = members_by_center(topo);
        let cursor = vec![0; members.len()];
        RoundRobin { members, cursor }
    }
}

impl RelayPicker for RoundRobin {
    fn pick(&mut self, cell: usize) -> Option<u32> {
        let list = &self.members[cell];
        if list.is_empty() {
            return None;
        }
        let at = self.cursor[cell] as usize % list.len();
        self.cursor[cell] = (at + 1) as u32;
        Some(list[at])
    }
}

/// Node path from `src` to `dst` with one relay per intermediate cell.
///
/// Empty intermediate cells are skipped; the route fails if that leaves a hop
/// longer than `range`.
pub fn route_adhoc_with(
    topo: &Topology,
    src: usize,
    dst: usize,
    range: f64,
    picker: &mut dyn RelayPicker,
    flow_id: usize,
) -> Result<Vec<u32>, RoutingError> {
    if src == dst {
        return Err(RoutingError::DegenerateFlow(src));
    }
    let cells = segment_cells(&topo.cell_grid, &topo.nodes[src], &topo.nodes[dst]);
    let mut path = Vec::with_capacity(cells.len());
    path.push(src as u32);
    let inner = if cells.len() > 2 { &cells[1..cells.len() - 1] } else { &[][..] };
    for &cell in inner {
        if let Some(relay) = picker.pick(cell) {
            path.push(relay);
        }
    }
    path.push(dst as u32);
    for pair in path.windows(2) {
        let (u, v) = (pair[0] as usize, pair[1] as usize);
        if topo.nodes[u].dist(&topo.nodes[v]) > range {
            return Err(RoutingError::Unroutable { flow: flow_id, at: u, range });
        }
    }
    Ok(path)
}

/// Single-flow route using the node nearest each cell center as relay.
pub fn build_route_adhoc(topo: &Topology, src: usize, dst: usize, range: f64) -> Result<Vec<u32>, RoutingError> {
    let mut picker = NearestCenter::new(topo);
    route_adhoc_with(topo, src, dst, range, &mut picker, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Hop {
    pub flow: u32,
    pub tx: u32,
    pub rx: u32,
}

/// Multigraph with one edge per ad-hoc hop.
#[derive(Debug, Clone)]
pub struct RoutingGraph {
    pub n: usize,
    pub hops: Vec<Hop>,
    /// Flows touching each node as source, relay or destination.
    pub load: Vec<u32>,
    /// Relay assignments per node.
    pub relay_load: Vec<u32>,
}

impl RoutingGraph {
    pub fn from_flows(n: usize, flows: &[Flow]) -> RoutingGraph {
        let mut hops = Vec::new();
        let mut load = vec![0u32; n];
        let mut relay_load = vec![0u32; n];
        for flow in flows {
            load[flow.src] += 1;
            load[flow.dst] += 1;
            if let Route::AdHoc { path } = &flow.route {
                for &relay in &path[1..path.len() - 1] {
                    load[relay as usize] += 1;
                    relay_load[relay as usize] += 1;
                }
                for pair in path.windows(2) {
                    hops.push(Hop { flow: flow.id as u32, tx: pair[0], rx: pair[1] });
                }
            }
        }
        RoutingGraph { n, hops, load, relay_load }
    }

    pub fn degrees(&self) -> Vec<u32> {
        let mut deg = vec![0u32; self.n];
        for hop in &self.hops {
            deg[hop.tx as usize] += 1;
            deg[hop.rx as usize] += 1;
        }
        deg
    }

    pub fn max_degree(&self) -> u32 {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    /// `f`: the largest per-node flow load.
    pub fn max_load(&self) -> u32 {
        self.load.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone)]
pub struct FlowSet {
    pub flows: Vec<Flow>,
    pub graph: RoutingGraph,
}

impl FlowSet {
    pub fn adhoc_sources(&self) -> usize {
        self.flows.iter().filter(|f| f.mode() == Mode::AdHoc).count()
    }

    /// Largest number of flows sharing one destination.
    pub fn max_flows_per_destination(&self) -> u32 {
        let mut per_dst = vec![0u32; self.graph.n];
        for f in &self.flows {
            per_dst[f.dst] += 1;
        }
        per_dst.into_iter().max().unwrap_or(0)
    }
}

/// Uniform destination for every source, never the source itself.
pub fn sample_destinations(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(DESTINATION_STREAM);
    (0..n)
        .map(|src| {
            let d = rng.random_range(0..n - 1);
            if d >= src {
                d + 1
            } else {
                d
            }
        })
        .collect()
}

/// One flow per node with a uniform destination, routed under H-max-hop.
///
/// Ad-hoc relays rotate round-robin through each cell's nodes in flow order.
pub fn assign_flows(topo: &Topology, h: u32, range: f64, seed: u64) -> Result<FlowSet, RoutingError> {
    let n = topo.n();
    if n < 2 {
        return Err(RoutingError::TooFewNodes);
    }
    let dests = sample_destinations(n, seed);
    let mut picker = RoundRobin::new(topo);
    let mut flows = Vec::with_capacity(n);
    for (src, &dst) in dests.iter().enumerate() {
        let length = topo.nodes[src].dist(&topo.nodes[dst]);
        let route = match mode_for_distance(length, h, range) {
            Mode::AdHoc => Route::AdHoc { path: route_adhoc_with(topo, src, dst, range, &mut picker, src)? },
            Mode::Infrastructure => Route::Infrastructure {
                uplink: topo.bs_cell_of_node(src) as u32,
                downlink: topo.bs_cell_of_node(dst) as u32,
            },
        };
        flows.push(Flow { id: src, src, dst, route, length });
    }
    let graph = RoutingGraph::from_flows(n, &flows);
    Ok(FlowSet { flows, graph })
}

/// Number of ad-hoc S-D segments crossing each cell.
pub fn count_lines_per_cell(flows: &[Flow], topo: &Topology) -> Vec<u32> {
    let mut counts = vec![0u32; topo.cell_grid.len()];
    for f in flows.iter().filter(|f| f.mode() == Mode::AdHoc) {
        for cell in segment_cells(&topo.cell_grid, &topo.nodes[f.src], &topo.nodes[f.dst]) {
            counts[cell] += 1;
        }
    }
    counts
}

/// The two candidate growth laws for the per-cell line count:
/// `(n H³ a², H³ a²)`. Neither is asserted as exact.
pub fn line_count_trends(n: f64, h: f64, a: f64) -> (f64, f64) {
    let base = h.powi(3) * a * a;
    (n * base, base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{place_nodes, Topology};

    #[test]
    fn mode_examples() {
        assert_eq!(mode_for_distance(0.05, 2, 0.1), Mode::AdHoc);
        assert_eq!(mode_for_distance(0.5, 2, 0.1), Mode::Infrastructure);
        assert_eq!(mode_for_distance(0.25, 1, 0.25), Mode::AdHoc);
    }

    #[test]
    fn degenerate_flow_rejected() {
        let topo = Topology::from_nodes(place_nodes(4, 1), 1, 0.25).unwrap();
        assert_eq!(select_mode(&topo, 2, 2, 1, 0.1), Err(RoutingError::DegenerateFlow(2)));
    }

    fn hops_oracle(h: u32) -> f64 {
        let hh = (h * h) as f64;
        (1..=h).map(|i| i as f64 * ((i * i) as f64 - ((i - 1) * (i - 1)) as f64) / hh).sum()
    }

    #[test]
    fn expected_hops_matches_enumeration() {
        assert_eq!(expected_hops(1).unwrap(), 1.0);
        assert_eq!(hops_oracle(2), 1.75);
        assert!((hops_oracle(10) - 7.15).abs() < 1e-12);
        for h in 1..=60 {
            assert!((expected_hops(h).unwrap() - hops_oracle(h)).abs() < 1e-12);
        }
        assert_eq!(expected_hops(0), Err(RoutingError::ZeroHops));
    }

    #[test]
    fn prob_adhoc_clamps() {
        let r = 1.0 / std::f64::consts::PI.sqrt();
        assert!((prob_adhoc(1, r) - 1.0).abs() < 1e-12);
        assert!((prob_adhoc(2, 0.1) - 0.125664).abs() < 1e-6);
        assert_eq!(prob_adhoc(5, 0.2), 1.0);
    }

    #[test]
    fn segment_within_one_cell() {
        let g = CellGrid::new(4);
        let cells = segment_cells(&g, &Point::new(0.3, 0.3), &Point::new(0.45, 0.26));
        assert_eq!(cells, vec![g.index(1, 1)]);
    }

    #[test]
    fn segment_through_corner_steps_diagonally() {
        let g = CellGrid::new(4);
        let cells = segment_cells(&g, &Point::new(0.125, 0.125), &Point::new(0.625, 0.625));
        assert_eq!(cells, vec![0, 5, 10]);
    }

    #[test]
    fn segment_reaching_closed_edge() {
        let g = CellGrid::new(4);
        let cells = segment_cells(&g, &Point::new(1.0, 0.1), &Point::new(0.1, 0.1));
        assert_eq!(cells, vec![3, 2, 1, 0]);
    }

    #[test]
    fn same_cell_route_is_direct() {
        let nodes = vec![Point::new(0.1, 0.1), Point::new(0.15, 0.12), Point::new(0.9, 0.9)];
        let topo = Topology::from_nodes(nodes, 1, 0.0625).unwrap();
        assert_eq!(build_route_adhoc(&topo, 0, 1, 0.5).unwrap(), vec![0, 1]);
    }

    #[test]
    fn adjacent_cell_route_has_at_most_two_hops() {
        let nodes = vec![Point::new(0.1, 0.1), Point::new(0.4, 0.1), Point::new(0.37, 0.13)];
        let topo = Topology::from_nodes(nodes, 1, 0.0625).unwrap();
        let path = build_route_adhoc(&topo, 0, 1, (8.0f64 * 0.0625).sqrt()).unwrap();
        assert!(path.len() <= 3);
        assert_eq!((path[0], *path.last().unwrap()), (0, 1));
    }

    #[test]
    fn relays_pick_nearest_center() {
        // three cells in a row; the middle one holds two candidates
        let nodes = vec![Point::new(0.1, 0.5), Point::new(0.9, 0.5), Point::new(0.45, 0.45), Point::new(0.5, 0.5)];
        let topo = Topology::from_nodes(nodes, 1, 1.0 / 9.0).unwrap();
        assert_eq!(build_route_adhoc(&topo, 0, 1, 1.0).unwrap(), vec![0, 3, 1]);
    }

    #[test]
    fn empty_cell_without_reachable_relay_fails() {
        let nodes = vec![Point::new(0.05, 0.5), Point::new(0.95, 0.5)];
        let topo = Topology::from_nodes(nodes, 1, 0.01).unwrap();
        assert!(matches!(build_route_adhoc(&topo, 0, 1, 0.2), Err(RoutingError::Unroutable { .. })));
    }

    #[test]
    fn two_nodes_give_two_flows() {
        let topo = Topology::from_nodes(place_nodes(2, 5), 1, 1.0).unwrap();
        let set = assign_flows(&topo, 2, 1.0, 5).unwrap();
        assert_eq!(set.flows.len(), 2);
        assert_eq!((set.flows[0].src, set.flows[0].dst), (0, 1));
        assert_eq!((set.flows[1].src, set.flows[1].dst), (1, 0));
    }

    #[test]
    fn destinations_exclude_source() {
        let d = sample_destinations(50, 3);
        assert!(d.iter().enumerate().all(|(i, &j)| i != j && j < 50));
    }

    #[test]
    fn hop_audit_on_random_instance() {
        let n = 10_000usize;
        let a = 2.0 * (n as f64).ln() / n as f64;
        let topo = Topology::from_nodes(place_nodes(n, 11), 4, a).unwrap();
        let r = (8.0 * topo.cell_grid.area()).sqrt();
        let set = assign_flows(&topo, 1000, r, 11).unwrap();
        for f in &set.flows {
            let Route::AdHoc { path } = &f.route else { panic!("expected ad hoc") };
            let cells = segment_cells(&topo.cell_grid, &topo.nodes[f.src], &topo.nodes[f.dst]);
            for pair in path.windows(2) {
                let d = topo.nodes[pair[0] as usize].dist(&topo.nodes[pair[1] as usize]);
                assert!(d <= r);
            }
            for relay in &path[1..path.len() - 1] {
                assert!(cells.contains(&topo.cell_of_node(*relay as usize)));
            }
        }
    }

    #[test]
    fn round_robin_balances_relays_within_cells() {
        let n = 3000;
        let a = 2.0 * (n as f64).ln() / n as f64;
        let topo = Topology::from_nodes(place_nodes(n, 4), 1, a).unwrap();
        let r = (8.0 * topo.cell_grid.area()).sqrt();
        let set = assign_flows(&topo, 1000, r, 4).unwrap();
        for members in topo.cell_members() {
            if members.is_empty() {
                continue;
            }
            let loads: Vec<u32> = members.iter().map(|&m| set.graph.relay_load[m as usize]).collect();
            let (lo, hi) = (loads.iter().min().unwrap(), loads.iter().max().unwrap());
            assert!(hi - lo <= 1, "{loads:?}");
        }
    }

    #[test]
    fn line_counts() {
        let nodes = vec![Point::new(0.1, 0.1), Point::new(0.9, 0.1), Point::new(0.5, 0.9)];
        let topo = Topology::from_nodes(nodes, 1, 0.0625).unwrap();
        let flow = Flow { id: 0, src: 0, dst: 1, route: Route::AdHoc { path: vec![0, 1] }, length: 0.8 };
        let counts = count_lines_per_cell(std::slice::from_ref(&flow), &topo);
        assert_eq!(counts.iter().sum::<u32>(), 4);
        assert!(counts[..4].iter().all(|&c| c == 1));

        let infra = Flow { route: Route::Infrastructure { uplink: 0, downlink: 0 }, ..flow };
        assert!(count_lines_per_cell(&[infra], &topo).iter().all(|&c| c == 0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        /// Liang-Barsky: does the segment overlap the closed rectangle in more than a point?
        fn crosses(a: &Point, b: &Point, rect: (f64, f64, f64, f64)) -> bool {
            let (x1, y1, x2, y2) = rect;
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            let (mut t0, mut t1) = (0.0f64, 1.0f64);
            for (p, q) in [(-dx, a.x - x1), (dx, x2 - a.x), (-dy, a.y - y1), (dy, y2 - a.y)] {
                if p == 0.0 {
                    if q < 0.0 {
                        return false;
                    }
                } else {
                    let t = q / p;
                    if p < 0.0 {
                        t0 = t0.max(t);
                    } else {
                        t1 = t1.min(t);
                    }
                }
            }
            t1 - t0 > 1e-9
        }

        proptest! {
            #[test]
            fn traversal_matches_clipping_oracle(
                side in 1u32..30, ax in 0.0f64..1.0, ay in 0.0f64..1.0, bx in 0.0f64..1.0, by in 0.0f64..1.0,
            ) {
                let g = CellGrid::new(side);
                let (a, b) = (Point::new(ax, ay), Point::new(bx, by));
                prop_assume!(a.dist(&b) > 1e-6);
                let mut walked = segment_cells(&g, &a, &b);
                let mut expected: Vec<usize> = (0..g.len()).filter(|&c| crosses(&a, &b, g.bounds(c))).collect();
                walked.sort_unstable();
                expected.sort_unstable();
                prop_assert_eq!(walked, expected);
            }

            #[test]
            fn traversal_is_a_connected_walk(
                side in 1u32..40, ax in 0.0f64..=1.0, ay in 0.0f64..=1.0, bx in 0.0f64..=1.0, by in 0.0f64..=1.0,
            ) {
                let g = CellGrid::new(side);
                let (a, b) = (Point::new(ax, ay), Point::new(bx, by));
                let cells = segment_cells(&g, &a, &b);
                prop_assert_eq!(cells[0], g.cell_of(&a));
                prop_assert_eq!(*cells.last().unwrap(), g.cell_of(&b));
                for pair in cells.windows(2) {
                    let (c0, r0) = g.col_row_of_index(pair[0]);
                    let (c1, r1) = g.col_row_of_index(pair[1]);
                    prop_assert!(c0.abs_diff(c1) <= 1 && r0.abs_diff(r1) <= 1 && pair[0] != pair[1]);
                }
            }
        }
    }
}

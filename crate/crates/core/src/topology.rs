//! Node placement, base-station tessellation and the square cell grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::config::{integer_sqrt, NetworkConfig};
use crate::math::{DomainError, LogTerms};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("base station count b = {0} is not a perfect square")]
    NonSquareBaseStations(u32),
    #[error("cell area {0} must lie in (0, 1]")]
    InvalidCellArea(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Point {
        Point { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist2(other).sqrt()
    }

    pub fn dist2(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// `side × side` square tessellation of the unit square.
///
/// Cells are indexed row-major from the bottom-left corner. Each cell is
/// half-open `[x1, x2) × [y1, y2)` except the last row and column, which
/// also own the closed upper boundary at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CellGrid {
    pub side: u32,
}

impl CellGrid {
    pub fn new(side: u32) -> CellGrid {
        assert!(side >= 1, "grid side must be positive");
        CellGrid { side }
    }

    /// Grid whose side is `round(1/sqrt(area))`, at least 1.
    pub fn from_area(area: f64) -> Result<CellGrid, TopologyError> {
        if !(area > 0.0 && area <= 1.0) {
            return Err(TopologyError::InvalidCellArea(area));
        }
        let side = (1.0 / area.sqrt()).round().max(1.0) as u32;
        Ok(CellGrid { side })
    }

    pub fn len(&self) -> usize {
        (self.side as usize) * (self.side as usize)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn width(&self) -> f64 {
        1.0 / self.side as f64
    }

    pub fn area(&self) -> f64 {
        self.width() * self.width()
    }

    fn axis(&self, v: f64) -> u32 {
        let g = self.side;
        let i = (v * g as f64).floor();
        if i < 0.0 {
            0
        } else if i >= g as f64 {
            g - 1
        } else {
            i as u32
        }
    }

    pub fn col_row(&self, p: &Point) -> (u32, u32) {
        (self.axis(p.x), self.axis(p.y))
    }

    pub fn index(&self, col: u32, row: u32) -> usize {
        row as usize * self.side as usize + col as usize
    }

    pub fn col_row_of_index(&self, idx: usize) -> (u32, u32) {
        let g = self.side as usize;
        ((idx % g) as u32, (idx / g) as u32)
    }

    pub fn cell_of(&self, p: &Point) -> usize {
        let (c, r) = self.col_row(p);
        self.index(c, r)
    }

    pub fn center(&self, idx: usize) -> Point {
        let (c, r) = self.col_row_of_index(idx);
        let w = self.width();
        Point::new((c as f64 + 0.5) * w, (r as f64 + 0.5) * w)
    }

    /// `(x1, y1, x2, y2)` corners of a cell.
    pub fn bounds(&self, idx: usize) -> (f64, f64, f64, f64) {
        let (c, r) = self.col_row_of_index(idx);
        let w = self.width();
        (c as f64 * w, r as f64 * w, (c + 1) as f64 * w, (r + 1) as f64 * w)
    }
}

/// Cell area `a(n)`:
/// `min(max(100 √C_A ln n / n, ln^{3/2} n / (√C_A n)), ln^{3/2} n ln(H² ln n) / (n^{3/2} ln ln(H² ln n)))`.
pub fn cell_area(n: f64, c_a: f64, h: f64) -> Result<f64, DomainError> {
    if !(c_a >= 1.0) {
        return Err(DomainError::Parameter { name: "C_A", value: c_a });
    }
    let logs = LogTerms::new(n, h)?;
    let ln_n = logs.ln_n;
    let connectivity = 100.0 * c_a.sqrt() * ln_n / n;
    let interference = ln_n.powf(1.5) / (c_a.sqrt() * n);
    let destination = ln_n.powf(1.5) * logs.ln_h2 / (n.powf(1.5) * logs.ln_ln_h2);
    Ok(connectivity.max(interference).min(destination))
}

/// Occupancy threshold `50 ln n / n` above which cells hold `Θ(n a(n))` nodes.
pub fn occupancy_threshold(n: f64) -> f64 {
    50.0 * n.ln() / n
}

/// `n` i.i.d. uniform points in the unit square, fully determined by `seed`.
pub fn place_nodes(n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Point::new(rng.random::<f64>(), rng.random::<f64>())).collect()
}

/// Base stations at the centers of a `b0 × b0` grid, row-major from the bottom-left.
pub fn build_bs_grid(b: u32) -> Result<(CellGrid, Vec<Point>), TopologyError> {
    let b0 = match integer_sqrt(b) {
        Some(root) if root >= 1 => root,
        _ => return Err(TopologyError::NonSquareBaseStations(b)),
    };
    let grid = CellGrid::new(b0);
    let bs = (0..grid.len()).map(|k| grid.center(k)).collect();
    Ok((grid, bs))
}

#[derive(Debug, Clone)]
pub struct Topology {
    pub nodes: Vec<Point>,
    pub bs: Vec<Point>,
    pub cell_grid: CellGrid,
    pub bs_grid: CellGrid,
    /// Requested cell area; the realized area is `cell_grid.area()`.
    pub requested_area: f64,
    node_cell: Vec<u32>,
    node_bs_cell: Vec<u32>,
}

impl Topology {
    /// Places `cfg.n` nodes from `cfg.seed` and overlays both grids.
    pub fn build(cfg: &NetworkConfig, cell_area: f64) -> Result<Topology, TopologyError> {
        Topology::from_nodes(place_nodes(cfg.n as usize, cfg.seed), cfg.b, cell_area)
    }

    pub fn from_nodes(nodes: Vec<Point>, b: u32, cell_area: f64) -> Result<Topology, TopologyError> {
        let cell_grid = CellGrid::from_area(cell_area)?;
        let (bs_grid, bs) = build_bs_grid(b)?;
        let node_cell = nodes.iter().map(|p| cell_grid.cell_of(p) as u32).collect();
        let node_bs_cell = nodes.iter().map(|p| bs_grid.cell_of(p) as u32).collect();
        Ok(Topology { nodes, bs, cell_grid, bs_grid, requested_area: cell_area, node_cell, node_bs_cell })
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn cell_of_node(&self, node: usize) -> usize {
        self.node_cell[node] as usize
    }

    pub fn bs_cell_of_node(&self, node: usize) -> usize {
        self.node_bs_cell[node] as usize
    }

    pub fn nodes_per_cell(&self) -> Vec<u32> {
        histogram(&self.node_cell, self.cell_grid.len())
    }

    pub fn nodes_per_bs_cell(&self) -> Vec<u32> {
        histogram(&self.node_bs_cell, self.bs_grid.len())
    }

    /// Node indices grouped by cell, each group in ascending index order.
    pub fn cell_members(&self) -> Vec<Vec<u32>> {
        let mut members = vec![Vec::new(); self.cell_grid.len()];
        for (i, &c) in self.node_cell.iter().enumerate() {
            members[c as usize].push(i as u32);
        }
        members
    }
}

fn histogram(labels: &[u32], bins: usize) -> Vec<u32> {
    let mut counts = vec![0u32; bins];
    for &l in labels {
        counts[l as usize] += 1;
    }
    counts
}

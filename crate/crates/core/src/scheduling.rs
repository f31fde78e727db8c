//! Two-level TDMA construction for ad-hoc hops and the Σ1 base-station frame.
//!
//! One second is split into `E` edge-color slots, one per color of a proper
//! edge coloring of the routing multigraph, so a node is busy in at most one
//! hop per slot. Each edge-color slot is split into `M` mini-slots; a node
//! with vertex color `s` (1-based) in the interference graph transmits in
//! mini-slot `⌈s/C_A⌉` on channel `(s mod C_A) + 1`.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::interference::{find_violation, Adjacency, GeometricConflicts};
use crate::routing::{Hop, RoutingGraph};
use crate::topology::{Point, Topology};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("flow {flow}: hop {tx}->{rx} spans {length}, beyond range {range}")]
    InfeasibleHop { flow: u32, tx: u32, rx: u32, length: f64, range: f64 },
    #[error("transmitter {0} has no vertex color")]
    Uncolored(u32),
    #[error("ad-hoc channel count must be at least 1")]
    NoChannels,
}

/// Greedy first-fit edge coloring of a multigraph, edges taken in order.
///
/// Uses at most `2·maxdeg − 1` colors.
pub fn edge_color_pairs(n: usize, edges: &[(u32, u32)]) -> Vec<u32> {
    let mut used: Vec<Vec<u64>> = vec![Vec::new(); n];
    let mut colors = Vec::with_capacity(edges.len());
    for &(u, v) in edges {
        let (u, v) = (u as usize, v as usize);
        let words = used[u].len().max(used[v].len());
        let mut color = words * 64;
        for k in 0..words {
            let taken = used[u].get(k).copied().unwrap_or(0) | used[v].get(k).copied().unwrap_or(0);
            if taken != u64::MAX {
                color = k * 64 + taken.trailing_ones() as usize;
                break;
            }
        }
        for x in [u, v] {
            let word = color / 64;
            if used[x].len() <= word {
                used[x].resize(word + 1, 0);
            }
            used[x][word] |= 1u64 << (color % 64);
        }
        colors.push(color as u32);
    }
    colors
}

/// Edge colors for every hop of the routing graph, 0-based.
pub fn edge_color(graph: &RoutingGraph) -> Vec<u32> {
    let edges: Vec<(u32, u32)> = graph.hops.iter().map(|h| (h.tx, h.rx)).collect();
    edge_color_pairs(graph.n, &edges)
}

/// Greedy first-fit vertex coloring in index order, 0-based; at most `maxdeg + 1` colors.
pub fn vertex_color<G: Adjacency>(graph: &G) -> Vec<u32> {
    let n = graph.vertex_count();
    let mut colors = vec![u32::MAX; n];
    let mut neigh = Vec::new();
    let mut taken: Vec<bool> = Vec::new();
    for v in 0..n {
        graph.neighbors(v, &mut neigh);
        taken.clear();
        taken.resize(neigh.len() + 1, false);
        for &u in &neigh {
            let c = colors[u] as usize;
            if c < taken.len() {
                taken[c] = true;
            }
        }
        colors[v] = taken.iter().position(|&t| !t).unwrap_or(neigh.len()) as u32;
    }
    colors
}

/// Number of distinct colors in a 0-based coloring.
pub fn color_count(colors: &[u32]) -> usize {
    colors.iter().copied().max().map_or(0, |c| c as usize + 1)
}

/// `(⌈s/C_A⌉, (s mod C_A) + 1)` for a 1-based vertex color `s`.
pub fn assign_minislot(s: u32, c_a: u32) -> (u32, u32) {
    (s.div_ceil(c_a), (s % c_a) + 1)
}

/// How transmitters are judged to conflict when building the vertex coloring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConflictPolicy {
    /// Separation `(2+Δ)·r` for every pair.
    Conservative,
    /// Separation `(2+Δ)·max(ρ_u, ρ_v)` with `ρ` the longest hop a node transmits.
    HopReach,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Role {
    Tx,
    Rx,
}

/// One scheduled hop: the transmitter's slot, mini-slot and channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Transmission {
    pub hop: u32,
    pub flow: u32,
    pub tx: u32,
    pub rx: u32,
    /// 1-based edge-color slot.
    pub eslot: u32,
    /// 1-based mini-slot within the edge-color slot.
    pub mslot: u32,
    /// Channel in `1..=C_A`.
    pub channel: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BsFrame {
    pub k8: u32,
    /// `k8 + 1` slots.
    pub frame_len: u32,
    /// Active slot (0-based) of every BS-cell.
    pub active_slot: Vec<u32>,
    /// Channels an active base station drives: `min(C_I, m)`.
    pub channels_used: u32,
    pub c_i: u32,
    /// Interfaces per direction at each base station.
    pub uplink_interfaces: u32,
    pub downlink_interfaces: u32,
}

impl BsFrame {
    pub fn duty_cycle(&self) -> f64 {
        1.0 / self.frame_len as f64
    }

    /// Long-run rate of one BS-cell: `min(C_I, m)/C_I · W_I / (k8+1)`.
    pub fn per_cell_rate(&self, w_i: f64) -> f64 {
        if self.c_i == 0 {
            return 0.0;
        }
        self.channels_used as f64 / self.c_i as f64 * w_i * self.duty_cycle()
    }

    /// BS-cells active in `slot`.
    pub fn active_in(&self, slot: u32) -> Vec<usize> {
        self.active_slot.iter().enumerate().filter(|(_, &s)| s == slot).map(|(k, _)| k).collect()
    }
}

/// Round-robin Σ1 frame: BS-cells form row-major clusters of `k8+1`, and the
/// `j`-th cell of every cluster is active in slot `j`.
pub fn build_bs_schedule_sigma1(b: usize, k8: u32, c_i: u32, m: u32) -> BsFrame {
    let frame_len = k8 + 1;
    let active_slot = (0..b).map(|k| (k as u32) % frame_len).collect();
    BsFrame {
        k8,
        frame_len,
        active_slot,
        channels_used: c_i.min(m),
        c_i,
        uplink_interfaces: m / 2,
        downlink_interfaces: m / 2,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    /// Edge-color slots per second, `E`.
    pub edge_slots: u32,
    /// Mini-slots per edge-color slot, `M`.
    pub mini_slots: u32,
    pub channels: u32,
    pub vertex_colors: u32,
    pub transmissions: Vec<Transmission>,
    pub bs_frame: Option<BsFrame>,
}

impl Schedule {
    /// Duration of one mini-slot in seconds.
    pub fn minislot_seconds(&self) -> f64 {
        if self.edge_slots == 0 || self.mini_slots == 0 {
            return 0.0;
        }
        1.0 / (self.edge_slots as f64 * self.mini_slots as f64)
    }

    /// `node,eslot,mslot,channel,role,flow` rows, transmitter then receiver per hop.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,eslot,mslot,channel,role,flow\n");
        for t in &self.transmissions {
            let _ = writeln!(out, "{},{},{},{},tx,{}", t.tx, t.eslot, t.mslot, t.channel, t.flow);
            let _ = writeln!(out, "{},{},{},{},rx,{}", t.rx, t.eslot, t.mslot, t.channel, t.flow);
        }
        out
    }
}

/// Colors used by [`build_adhoc_schedule`].
#[derive(Debug, Clone)]
pub struct Colorings {
    /// 0-based edge color per hop.
    pub edge: Vec<u32>,
    /// 0-based vertex color per node; `u32::MAX` for nodes that never transmit.
    pub vertex: Vec<u32>,
}

impl Colorings {
    /// Edge coloring of the routing graph plus a vertex coloring of the
    /// conflict graph restricted to nodes that transmit.
    pub fn compute(topo: &Topology, graph: &RoutingGraph, r: f64, delta: f64, policy: ConflictPolicy) -> Colorings {
        let edge = edge_color(graph);
        let mut reach = vec![-1.0f64; graph.n];
        for hop in &graph.hops {
            let len = topo.nodes[hop.tx as usize].dist(&topo.nodes[hop.rx as usize]);
            let slot = &mut reach[hop.tx as usize];
            *slot = slot.max(len);
        }
        let active: Vec<usize> = (0..graph.n).filter(|&v| reach[v] >= 0.0).collect();
        let points: Vec<Point> = active.iter().map(|&v| topo.nodes[v]).collect();
        let conflicts = match policy {
            ConflictPolicy::Conservative => GeometricConflicts::uniform(points, r, delta),
            ConflictPolicy::HopReach => {
                GeometricConflicts::new(points, active.iter().map(|&v| reach[v]).collect(), delta)
            }
        };
        let local = vertex_color(&conflicts);
        let mut vertex = vec![u32::MAX; graph.n];
        for (i, &v) in active.iter().enumerate() {
            vertex[v] = local[i];
        }
        Colorings { edge, vertex }
    }

    pub fn edge_colors(&self) -> usize {
        color_count(&self.edge)
    }

    pub fn vertex_colors(&self) -> usize {
        self.vertex.iter().filter(|&&c| c != u32::MAX).map(|&c| c as usize + 1).max().unwrap_or(0)
    }
}

/// Lays every hop into its edge-color slot and its transmitter's mini-slot/channel.
pub fn build_adhoc_schedule(
    topo: &Topology,
    graph: &RoutingGraph,
    colorings: &Colorings,
    c_a: u32,
    r: f64,
) -> Result<Schedule, ScheduleError> {
    if c_a == 0 {
        return Err(ScheduleError::NoChannels);
    }
    let mut transmissions = Vec::with_capacity(graph.hops.len());
    for (idx, hop) in graph.hops.iter().enumerate() {
        let Hop { flow, tx, rx } = *hop;
        let length = topo.nodes[tx as usize].dist(&topo.nodes[rx as usize]);
        if length > r {
            return Err(ScheduleError::InfeasibleHop { flow, tx, rx, length, range: r });
        }
        let color = colorings.vertex[tx as usize];
        if color == u32::MAX {
            return Err(ScheduleError::Uncolored(tx));
        }
        let (mslot, channel) = assign_minislot(color + 1, c_a);
        transmissions.push(Transmission {
            hop: idx as u32,
            flow,
            tx,
            rx,
            eslot: colorings.edge[idx] + 1,
            mslot,
            channel,
        });
    }
    let vertex_colors = colorings.vertex_colors() as u32;
    let edge_slots = colorings.edge_colors() as u32;
    Ok(Schedule {
        edge_slots,
        mini_slots: vertex_colors.div_ceil(c_a),
        channels: c_a,
        vertex_colors,
        transmissions,
        bs_frame: None,
    })
}

/// Outcome of the full schedule audit.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AuditReport {
    /// `(node, eslot)` pairs used more than once.
    pub half_duplex: usize,
    /// `(eslot, mslot, channel)` groups failing the guard-zone predicate.
    pub guard_zone: usize,
    /// Hops scheduled zero or several times.
    pub unserved: usize,
    /// Hops longer than the range.
    pub out_of_range: usize,
    /// Entries outside `1..=E`, `1..=M` or `1..=C_A`.
    pub out_of_bounds: usize,
    /// BS-cells not active exactly once per frame.
    pub frame: usize,
}

impl AuditReport {
    pub fn is_feasible(&self) -> bool {
        *self == AuditReport::default()
    }
}

/// Checks half-duplex use per edge-color slot, the guard zone per
/// `(eslot, mslot, channel)`, hop coverage, slot bounds and the Σ1 frame.
pub fn audit(schedule: &Schedule, topo: &Topology, graph: &RoutingGraph, r: f64, delta: f64) -> AuditReport {
    let mut report = AuditReport::default();
    let txs = &schedule.transmissions;

    let mut busy = HashSet::with_capacity(txs.len() * 2);
    for t in txs {
        for node in [t.tx, t.rx] {
            if !busy.insert((node, t.eslot)) {
                report.half_duplex += 1;
            }
        }
        if t.eslot == 0
            || t.eslot > schedule.edge_slots
            || t.mslot == 0
            || t.mslot > schedule.mini_slots
            || t.channel == 0
            || t.channel > schedule.channels
        {
            report.out_of_bounds += 1;
        }
        if topo.nodes[t.tx as usize].dist(&topo.nodes[t.rx as usize]) > r {
            report.out_of_range += 1;
        }
    }

    let mut served = vec![0u32; graph.hops.len()];
    for t in txs {
        match served.get_mut(t.hop as usize) {
            Some(count) if graph.hops[t.hop as usize] == (Hop { flow: t.flow, tx: t.tx, rx: t.rx }) => *count += 1,
            _ => report.unserved += 1,
        }
    }
    report.unserved += served.iter().filter(|&&c| c != 1).count();

    let mut order: Vec<usize> = (0..txs.len()).collect();
    order.sort_unstable_by_key(|&i| (txs[i].eslot, txs[i].mslot, txs[i].channel));
    let mut group: Vec<(Point, Point)> = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let key = |i: usize| (txs[i].eslot, txs[i].mslot, txs[i].channel);
        let k = key(order[start]);
        let mut end = start;
        group.clear();
        while end < order.len() && key(order[end]) == k {
            let t = &txs[order[end]];
            group.push((topo.nodes[t.tx as usize], topo.nodes[t.rx as usize]));
            end += 1;
        }
        if find_violation(&group, delta).is_some() {
            report.guard_zone += 1;
        }
        start = end;
    }

    if let Some(frame) = &schedule.bs_frame {
        report.frame = audit_frame(frame, topo.bs.len());
    }
    report
}

/// BS-cells that are not active exactly once per frame, plus slots where two
/// cells of one cluster would be active together.
pub fn audit_frame(frame: &BsFrame, b: usize) -> usize {
    let mut bad = 0;
    if frame.active_slot.len() != b {
        bad += b.abs_diff(frame.active_slot.len());
    }
    let len = frame.frame_len as usize;
    for (cluster, cells) in frame.active_slot.chunks(len).enumerate() {
        let mut seen = vec![false; len];
        for (j, &slot) in cells.iter().enumerate() {
            let slot = slot as usize;
            if slot >= len || seen[slot] {
                bad += 1;
                continue;
            }
            seen[slot] = true;
            let _ = (cluster, j);
        }
    }
    bad
}

//! Monte-Carlo trials: topology, flows, schedule, then measured throughput and delay.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bounds::classify_condition;
use crate::config::{BoundsConstants, NetworkConfig};
use crate::routing::{assign_flows, count_lines_per_cell, hops_for_distance, FlowSet, Mode, Route, RoutingError};
use crate::scheduling::{
    audit, build_adhoc_schedule, build_bs_schedule_sigma1, AuditReport, Colorings, ConflictPolicy, Schedule,
    ScheduleError,
};
use crate::topology::{cell_area, place_nodes, Topology, TopologyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("schedule failed its audit: {0:?}")]
    Infeasible(AuditReport),
    #[error("{0} flows need infrastructure but it has no capacity (W_I = 0 or min(C_I, m) = 0)")]
    NoInfrastructure(usize),
    #[error("fit needs at least 3 points with positive x and y")]
    FitInput,
}

/// Knobs of a trial that are not network parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialOptions {
    /// Cell area floor `κ · ln n / n`.
    pub area_floor: f64,
    /// Seconds charged per ad-hoc hop in the delay mixture.
    pub hop_seconds: f64,
    pub policy: ConflictPolicy,
    /// Every infrastructure packet arrives at time 0 instead of spread over the second.
    pub saturated: bool,
}

impl Default for TrialOptions {
    fn default() -> TrialOptions {
        TrialOptions { area_floor: 2.0, hop_seconds: 1.0, policy: ConflictPolicy::Conservative, saturated: false }
    }
}

/// Cell area used by the simulator: the analytic `a(n)` raised to the floor.
pub fn simulation_cell_area(cfg: &NetworkConfig, opts: &TrialOptions) -> f64 {
    let n = cfg.n as f64;
    let floor = opts.area_floor * n.ln() / n;
    let analytic = cell_area(n, cfg.c_a as f64, cfg.h as f64).unwrap_or(floor);
    analytic.max(floor).min(1.0)
}

/// Range that lets a relay reach any node in a neighboring cell, diagonals included.
pub fn effective_range(cfg: &NetworkConfig, topo: &Topology) -> f64 {
    cfg.r.max(8f64.sqrt() * topo.cell_grid.width())
}

/// A schedule that passed [`audit`].
#[derive(Debug, Clone)]
pub struct Audited(Schedule);

impl Audited {
    pub fn check(
        schedule: Schedule,
        topo: &Topology,
        flows: &FlowSet,
        r: f64,
        delta: f64,
    ) -> Result<Audited, HarnessError> {
        let report = audit(&schedule, topo, &flows.graph, r, delta);
        if report.is_feasible() {
            Ok(Audited(schedule))
        } else {
            Err(HarnessError::Infeasible(report))
        }
    }

    pub fn schedule(&self) -> &Schedule {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Throughput {
    pub per_flow: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_mean: f64,
    pub t_a: f64,
    pub t_i: f64,
}

/// Ad-hoc flows run at `(airtime of their slowest hop) · W_A/C_A`; infrastructure
/// flows get an equal share of their home BS-cell's Σ1 rate.
pub fn measure_throughput(sched: &Audited, flows: &FlowSet, topo: &Topology, cfg: &NetworkConfig) -> Throughput {
    let s = sched.schedule();
    let channel_rate = if cfg.c_a == 0 { 0.0 } else { cfg.w_a / cfg.c_a as f64 };
    let mut airtime = vec![0.0f64; flows.graph.hops.len()];
    for t in &s.transmissions {
        airtime[t.hop as usize] += s.minislot_seconds();
    }
    let mut flow_rate = vec![f64::INFINITY; flows.flows.len()];
    for (hop, time) in flows.graph.hops.iter().zip(&airtime) {
        let rate = &mut flow_rate[hop.flow as usize];
        *rate = rate.min(time * channel_rate);
    }

    let mut per_uplink = vec![0u32; topo.bs.len()];
    for f in &flows.flows {
        if let Route::Infrastructure { uplink, .. } = f.route {
            per_uplink[uplink as usize] += 1;
        }
    }
    let cell_rate = s.bs_frame.as_ref().map_or(0.0, |fr| fr.per_cell_rate(cfg.w_i));

    let (mut t_a, mut t_i) = (0.0, 0.0);
    let per_flow: Vec<f64> = flows
        .flows
        .iter()
        .map(|f| match f.route {
            Route::AdHoc { .. } => {
                let r = flow_rate[f.id];
                let r = if r.is_finite() { r } else { 0.0 };
                t_a += r;
                r
            }
            Route::Infrastructure { uplink, .. } => {
                let r = cell_rate / per_uplink[uplink as usize] as f64;
                t_i += r;
                r
            }
        })
        .collect();
    let lambda_min = per_flow.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda_mean = per_flow.iter().sum::<f64>() / per_flow.len().max(1) as f64;
    Throughput { lambda_min: if per_flow.is_empty() { 0.0 } else { lambda_min }, lambda_mean, per_flow, t_a, t_i }
}

/// Per-packet delays of a FIFO queue with `servers` identical servers and
/// deterministic service time `service`; `arrivals` must be sorted.
pub fn fifo_delays(arrivals: &[f64], servers: u32, service: f64) -> Vec<f64> {
    assert!(servers >= 1, "queue needs a server");
    let mut free = vec![0.0f64; servers as usize];
    arrivals
        .iter()
        .map(|&a| {
            let (k, &at) = free.iter().enumerate().min_by(|x, y| x.1.total_cmp(y.1)).expect("servers >= 1");
            let done = at.max(a) + service;
            free[k] = done;
            done - a
        })
        .collect()
}

/// Mean delay of `k` packets all queued at time 0.
pub fn saturated_delay(k: usize, servers: u32, service: f64) -> f64 {
    let d = fifo_delays(&vec![0.0; k], servers, service);
    d.iter().sum::<f64>() / k.max(1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayReport {
    /// Mean over all packets, seconds.
    pub mean_seconds: f64,
    pub adhoc_mean_hops: f64,
    pub infra_mean_seconds: f64,
    pub adhoc_packets: usize,
    pub infra_packets: usize,
}

/// One packet per flow. Ad-hoc packets take `hops · hop_seconds`; infrastructure
/// packets queue at their uplink base station with `min(C_I, m)` servers.
pub fn measure_delay(
    flows: &FlowSet,
    topo: &Topology,
    cfg: &NetworkConfig,
    hop_seconds: f64,
    saturated: bool,
) -> Result<DelayReport, HarnessError> {
    let mut hops = 0usize;
    let mut adhoc = 0usize;
    let mut per_bs = vec![0usize; topo.bs.len()];
    for f in &flows.flows {
        match f.route {
            Route::AdHoc { .. } => {
                adhoc += 1;
                hops += f.hop_count();
            }
            Route::Infrastructure { uplink, .. } => per_bs[uplink as usize] += 1,
        }
    }
    let infra: usize = per_bs.iter().sum();
    let servers = cfg.bs_parallelism();
    if infra > 0 && (servers == 0 || !cfg.infrastructure_enabled()) {
        return Err(HarnessError::NoInfrastructure(infra));
    }
    let mut infra_total = 0.0;
    for &k in per_bs.iter().filter(|&&k| k > 0) {
        let arrivals: Vec<f64> = (0..k).map(|j| if saturated { 0.0 } else { j as f64 / k as f64 }).collect();
        infra_total += fifo_delays(&arrivals, servers, cfg.c_service).iter().sum::<f64>();
    }
    let adhoc_total = hops as f64 * hop_seconds;
    let packets = (adhoc + infra).max(1) as f64;
    Ok(DelayReport {
        mean_seconds: (adhoc_total + infra_total) / packets,
        adhoc_mean_hops: if adhoc > 0 { hops as f64 / adhoc as f64 } else { 0.0 },
        infra_mean_seconds: if infra > 0 { infra_total / infra as f64 } else { 0.0 },
        adhoc_packets: adhoc,
        infra_packets: infra,
    })
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub trial: usize,
    pub seed: u64,
    pub n: u64,
    pub b: u32,
    #[serde(rename = "C_A")]
    pub c_a: u32,
    #[serde(rename = "C_I")]
    pub c_i: u32,
    pub m: u32,
    #[serde(rename = "H")]
    pub h: u32,
    #[serde(rename = "W_A")]
    pub w_a: f64,
    #[serde(rename = "W_I")]
    pub w_i: f64,
    pub delta: f64,
    pub lambda_min: f64,
    pub lambda_mean: f64,
    #[serde(rename = "T_A")]
    pub t_a: f64,
    #[serde(rename = "T_I")]
    pub t_i: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub adhoc_sources: usize,
    pub max_dest_flows: u32,
    pub max_lines_cell: u32,
    pub edge_colors: u32,
    pub vertex_colors: u32,
    pub condition: String,
    #[serde(skip)]
    pub feasible: bool,
}

pub const RESULTS_HEADER: &str = "trial,seed,n,b,C_A,C_I,m,H,W_A,W_I,delta,lambda_min,lambda_mean,T_A,T_I,D,adhoc_sources,max_dest_flows,max_lines_cell,edge_colors,vertex_colors,condition";

impl ExperimentResult {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.trial,
            self.seed,
            self.n,
            self.b,
            self.c_a,
            self.c_i,
            self.m,
            self.h,
            self.w_a,
            self.w_i,
            self.delta,
            self.lambda_min,
            self.lambda_mean,
            self.t_a,
            self.t_i,
            self.d,
            self.adhoc_sources,
            self.max_dest_flows,
            self.max_lines_cell,
            self.edge_colors,
            self.vertex_colors,
            self.condition
        )
    }
}

pub fn results_csv(rows: &[ExperimentResult]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

pub fn results_jsonl(rows: &[ExperimentResult]) -> String {
    let mut out = String::new();
    for r in rows {
        let _ = writeln!(out, "{}", serde_json::to_string(r).expect("rows serialize"));
    }
    out
}

/// Everything a trial builds, kept for inspection and dumps.
pub struct TrialArtifacts {
    pub topology: Topology,
    pub flows: FlowSet,
    pub schedule: Audited,
    pub range: f64,
    pub colorings: Colorings,
}

/// Builds topology, flows and the audited schedule for one config.
pub fn build_trial(cfg: &NetworkConfig, opts: &TrialOptions) -> Result<TrialArtifacts, HarnessError> {
    let topo = Topology::build(cfg, simulation_cell_area(cfg, opts))?;
    let range = effective_range(cfg, &topo);
    let flows = assign_flows(&topo, cfg.h, range, cfg.seed)?;
    let colorings = Colorings::compute(&topo, &flows.graph, range, cfg.delta, opts.policy);
    let mut schedule = build_adhoc_schedule(&topo, &flows.graph, &colorings, cfg.c_a.max(1), range)?;
    if cfg.infrastructure_enabled() {
        let k8 = BoundsConstants::from_delta(cfg.delta).k8;
        schedule.bs_frame = Some(build_bs_schedule_sigma1(topo.bs.len(), k8, cfg.c_i, cfg.m));
    }
    let schedule = Audited::check(schedule, &topo, &flows, range, cfg.delta)?;
    Ok(TrialArtifacts { topology: topo, flows, schedule, range, colorings })
}

pub fn run_trial(trial: usize, cfg: &NetworkConfig, opts: &TrialOptions) -> Result<ExperimentResult, HarnessError> {
    let art = build_trial(cfg, opts)?;
    let thr = measure_throughput(&art.schedule, &art.flows, &art.topology, cfg);
    let delay = measure_delay(&art.flows, &art.topology, cfg, opts.hop_seconds, opts.saturated)?;
    let lines = count_lines_per_cell(&art.flows.flows, &art.topology);
    let condition = classify_condition(cfg.n as f64, cfg.c_a as f64, cfg.h as f64)
        .map_or_else(|_| "undefined".to_string(), |c| c.condition.to_string());
    let s = art.schedule.schedule();
    Ok(ExperimentResult {
        trial,
        seed: cfg.seed,
        n: cfg.n,
        b: cfg.b,
        c_a: cfg.c_a,
        c_i: cfg.c_i,
        m: cfg.m,
        h: cfg.h,
        w_a: cfg.w_a,
        w_i: cfg.w_i,
        delta: cfg.delta,
        lambda_min: thr.lambda_min,
        lambda_mean: thr.lambda_mean,
        t_a: thr.t_a,
        t_i: thr.t_i,
        d: delay.mean_seconds,
        adhoc_sources: art.flows.adhoc_sources(),
        max_dest_flows: art.flows.max_flows_per_destination(),
        max_lines_cell: lines.into_iter().max().unwrap_or(0),
        edge_colors: s.edge_slots,
        vertex_colors: s.vertex_colors,
        condition,
        feasible: true,
    })
}

/// Outcome of one sweep trial; failures are kept rather than aborting the sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub trial: usize,
    pub seed: u64,
    pub outcome: Result<ExperimentResult, HarnessError>,
}

/// Runs every `(point, seed)` pair, point-major. Output order does not depend on `workers`.
pub fn sweep(points: &[NetworkConfig], seeds: &[u64], opts: &TrialOptions, workers: Option<usize>) -> Vec<SweepRow> {
    let jobs: Vec<(usize, NetworkConfig)> =
        points.iter().flat_map(|p| seeds.iter().map(move |&s| p.with_seed(s))).enumerate().collect();
    let run = || {
        jobs.par_iter()
            .map(|(trial, cfg)| SweepRow { trial: *trial, seed: cfg.seed, outcome: run_trial(*trial, cfg, opts) })
            .collect::<Vec<_>>()
    };
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map(|pool| pool.install(run))
            .unwrap_or_else(|_| run()),
        None => run(),
    }
}

/// Log-log least-squares fit `ln y = slope · ln x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_scaling(points: &[(f64, f64)]) -> Result<Fit, HarnessError> {
    if points.len() < 3 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(HarnessError::FitInput);
    }
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::FitInput);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(Fit { slope, intercept, r2 })
}

/// Largest bin after throwing `balls` uniformly into `bins`.
pub fn max_bin_load(balls: usize, bins: usize, seed: u64) -> u32 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut load = vec![0u32; bins];
    for _ in 0..balls {
        load[rng.random_range(0..bins)] += 1;
    }
    load.into_iter().max().unwrap_or(0)
}

/// `ln N / ln ln N`.
pub fn max_load_scale(n: f64) -> f64 {
    n.ln() / n.ln().ln()
}

/// Mean hop count of destinations uniform in a disk of radius `H` hop lengths.
pub fn sample_mean_hops(h: u32, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: u64 = (0..samples)
        .map(|_| {
            let d = h as f64 * rng.random::<f64>().sqrt();
            hops_for_distance(d, 1.0) as u64
        })
        .sum();
    total as f64 / samples as f64
}

/// Sources whose uniformly drawn destination lies within `H·r`.
pub fn count_adhoc_sources(n: usize, h: u32, r: f64, seed: u64) -> usize {
    let nodes = place_nodes(n, seed);
    let dests = crate::routing::sample_destinations(n, seed);
    dests
        .iter()
        .enumerate()
        .filter(|&(s, &d)| crate::routing::mode_for_distance(nodes[s].dist(&nodes[d]), h, r) == Mode::AdHoc)
        .count()
}

/// Expected ad-hoc source count `π H² ln n` at the connectivity radius.
pub fn expected_adhoc_sources(n: f64, h: f64) -> f64 {
    PI * h * h * n.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RawConfig;
    use crate::routing::{Flow, RoutingGraph};
    use crate::scheduling::Transmission;
    use crate::topology::Point;

    fn cfg(text: &str) -> NetworkConfig {
        RawConfig::parse(text).unwrap().build().unwrap()
    }

    fn two_node(w_a: f64) -> (Topology, FlowSet, NetworkConfig) {
        let topo = Topology::from_nodes(vec![Point::new(0.1, 0.1), Point::new(0.12, 0.1)], 1, 0.25).unwrap();
        let flows = vec![Flow { id: 0, src: 0, dst: 1, route: Route::AdHoc { path: vec![0, 1] }, length: 0.02 }];
        let graph = RoutingGraph::from_flows(2, &flows);
        let c = cfg(&format!("n=2\nC_A=1\nC_I=0\nW_A={w_a}\nW_I=0\nm=0\nb=1\nr=0.05"));
        (topo, FlowSet { flows, graph }, c)
    }

    #[test]
    fn single_hop_runs_at_channel_rate() {
        let (topo, flows, c) = two_node(5.0);
        let col = Colorings::compute(&topo, &flows.graph, 0.05, 1.0, ConflictPolicy::Conservative);
        let s = build_adhoc_schedule(&topo, &flows.graph, &col, 1, 0.05).unwrap();
        let s = Audited::check(s, &topo, &flows, 0.05, 1.0).unwrap();
        let thr = measure_throughput(&s, &flows, &topo, &c);
        assert_eq!(thr.per_flow, vec![5.0]);
        let d = measure_delay(&flows, &topo, &c, 1.0, false).unwrap();
        assert_eq!(d.mean_seconds, 1.0);
    }

    #[test]
    fn two_hops_share_the_second() {
        let topo =
            Topology::from_nodes(vec![Point::new(0.1, 0.1), Point::new(0.12, 0.1), Point::new(0.14, 0.1)], 1, 0.25)
                .unwrap();
        let flows = vec![Flow { id: 0, src: 0, dst: 2, route: Route::AdHoc { path: vec![0, 1, 2] }, length: 0.04 }];
        let graph = RoutingGraph::from_flows(3, &flows);
        let flows = FlowSet { flows, graph };
        // both transmitters share mini-slot 1, so the hops differ only by edge color
        let sched = Schedule {
            edge_slots: 2,
            mini_slots: 1,
            channels: 1,
            vertex_colors: 1,
            transmissions: vec![
                Transmission { hop: 0, flow: 0, tx: 0, rx: 1, eslot: 1, mslot: 1, channel: 1 },
                Transmission { hop: 1, flow: 0, tx: 1, rx: 2, eslot: 2, mslot: 1, channel: 1 },
            ],
            bs_frame: None,
        };
        let sched = Audited::check(sched, &topo, &flows, 0.05, 1.0).unwrap();
        let (_, _, c) = two_node(5.0);
        let thr = measure_throughput(&sched, &flows, &topo, &c);
        assert_eq!(thr.per_flow, vec![2.5]);
    }

    #[test]
    fn infra_flow_gets_sigma1_share() {
        let topo = Topology::from_nodes(vec![Point::new(0.1, 0.1), Point::new(0.9, 0.9)], 1, 0.25).unwrap();
        let flows =
            vec![Flow { id: 0, src: 0, dst: 1, route: Route::Infrastructure { uplink: 0, downlink: 0 }, length: 1.13 }];
        let graph = RoutingGraph::from_flows(2, &flows);
        let flows = FlowSet { flows, graph };
        let c = cfg("n=2\nC_A=1\nC_I=2\nW_A=1\nW_I=17\nm=2\nb=1\nr=0.05");
        let sched = Schedule {
            edge_slots: 0,
            mini_slots: 0,
            channels: 1,
            vertex_colors: 0,
            transmissions: vec![],
            bs_frame: Some(build_bs_schedule_sigma1(1, 16, 2, 2)),
        };
        let sched = Audited::check(sched, &topo, &flows, 0.05, 1.0).unwrap();
        let thr = measure_throughput(&sched, &flows, &topo, &c);
        assert!((thr.per_flow[0] - 1.0).abs() < 1e-12);
        let d = measure_delay(&flows, &topo, &c, 1.0, false).unwrap();
        assert_eq!(d.infra_mean_seconds, 1.0);
    }

    #[test]
    fn queue_examples() {
        assert_eq!(fifo_delays(&[0.0], 4, 1.0), vec![1.0]);
        assert_eq!(fifo_delays(&[0.0, 0.0, 0.0], 2, 1.0), vec![1.0, 1.0, 2.0]);
        assert_eq!(fifo_delays(&[0.0, 0.5], 1, 1.0), vec![1.0, 1.5]);
        // packet j of K departs at (floor(j/s)+1)·c
        for (k, s) in [(10usize, 3u32), (1000, 4), (7, 1)] {
            let oracle: f64 = (0..k).map(|j| (j / s as usize + 1) as f64).sum::<f64>() / k as f64;
            assert!((saturated_delay(k, s, 1.0) - oracle).abs() < 1e-12);
        }
        let ratio = saturated_delay(1000, 4, 1.0) / saturated_delay(1000, 1, 1.0);
        assert!((ratio - 0.25).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn fits() {
        let pts: Vec<(f64, f64)> = (12..=18).map(|k| 2f64.powi(k)).map(|n| (n, n.powf(-0.5))).collect();
        let f = fit_scaling(&pts).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
        let pts: Vec<(f64, f64)> = (12..=18).map(|k| 2f64.powi(k)).map(|n| (n, 1.0 / (n * n.ln()).sqrt())).collect();
        let f = fit_scaling(&pts).unwrap();
        assert!((-0.62..=-0.52).contains(&f.slope), "{}", f.slope);
        let f = fit_scaling(&[(10.0, 3.0), (100.0, 3.0), (1000.0, 3.0)]).unwrap();
        assert_eq!(f.slope, 0.0);
        assert!(fit_scaling(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
        assert!(fit_scaling(&[(1.0, 1.0), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn hop_sampler_matches_closed_form() {
        let mean = sample_mean_hops(2, 200_000, 1);
        assert!((mean - 1.75).abs() < 0.01, "{mean}");
        assert_eq!(sample_mean_hops(1, 1000, 1), 1.0);
    }

    #[test]
    fn trial_is_deterministic_and_feasible() {
        let c = cfg("n=600\nC_A=2\nC_I=2\nW_A=4\nW_I=2\nm=2\nb=4\nH=2\nseed=5");
        let opts = TrialOptions::default();
        let a = run_trial(0, &c, &opts).unwrap();
        let b = run_trial(0, &c, &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.feasible);
        assert!(a.lambda_min <= c.w && a.lambda_min > 0.0);
        assert_eq!(results_csv(std::slice::from_ref(&a)).lines().nth(1).unwrap().split(',').count(), 22);
        let json: serde_json::Value = serde_json::from_str(results_jsonl(&[a]).trim()).unwrap();
        let keys: Vec<&str> = RESULTS_HEADER.split(',').collect();
        assert_eq!(json.as_object().unwrap().len(), keys.len());
        for k in keys {
            assert!(json.get(k).is_some(), "{k}");
        }
    }

    #[test]
    fn sweep_order_is_stable() {
        let base = cfg("n=300\nC_A=2\nC_I=2\nW_A=4\nW_I=2\nm=2\nb=4\nH=2");
        let points = vec![base.clone(), NetworkConfig { n: 400, ..base }];
        let one = sweep(&points, &[1, 2], &TrialOptions::default(), Some(1));
        let many = sweep(&points, &[1, 2], &TrialOptions::default(), Some(4));
        assert_eq!(one.len(), 4);
        let strip = |rows: Vec<SweepRow>| rows.into_iter().map(|r| r.outcome.unwrap()).collect::<Vec<_>>();
        assert_eq!(strip(one), strip(many));
    }
}

//! Empirical checks of the scaling laws, constructions and fixtures.
//!
//! Each check returns a [`CheckOutcome`] with the measured quantities, so
//! callers can print one line per check and decide on an exit status.

use std::f64::consts::PI;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{adhoc_per_node_bound, average_delay, classify_condition, Condition, DelayForm, DelayParams};
use crate::config::{connectivity_radius, BoundsConstants, NetworkConfig, RawConfig};
use crate::harness::{
    build_trial, count_adhoc_sources, expected_adhoc_sources, fit_scaling, max_bin_load, max_load_scale, measure_delay,
    measure_throughput, sample_mean_hops, sweep, TrialOptions,
};
use crate::interference::{interfering_cell_bound, interfering_cells, Adjacency, GeometricConflicts};
use crate::routing::expected_hops;
use crate::scheduling::{audit, color_count, edge_color_pairs, vertex_color, ConflictPolicy};
use crate::topology::{place_nodes, CellGrid, Topology};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(id: u8, name: &'static str, passed: bool, detail: String) -> CheckOutcome {
        CheckOutcome { id, name, passed, detail }
    }

    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} [{}] {}: {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

fn config(text: &str) -> NetworkConfig {
    RawConfig::parse(text).and_then(|raw| raw.build()).expect("built-in config is valid")
}

/// Mean hop count at `H = 10` over `10^6` sampled destinations, within 1% of 7.15.
pub fn hop_count_law() -> CheckOutcome {
    let target = expected_hops(10).expect("H >= 1");
    let mean = sample_mean_hops(10, 1_000_000, 2024);
    let rel = (mean - 7.15).abs() / 7.15;
    CheckOutcome::new(
        1,
        "hop-count law",
        rel <= 0.01 && (target - 7.15).abs() < 1e-12,
        format!("sampled mean {mean:.5}, closed form {target}, relative error {rel:.2e} (limit 1e-2)"),
    )
}

/// Random configurations over `C_A ∈ {1,2,4}`, `H ∈ {1,2,4}`, `n ≤ 2000`;
/// every schedule must pass the full audit.
pub fn schedule_feasibility(per_combo: usize) -> CheckOutcome {
    let mut jobs = Vec::new();
    for c_a in [1u32, 2, 4] {
        for h in [1u32, 2, 4] {
            for k in 0..per_combo {
                jobs.push((c_a, h, k as u64));
            }
        }
    }
    let results: Vec<Result<usize, String>> = jobs
        .par_iter()
        .map(|&(c_a, h, k)| {
            let seed = 1000 * c_a as u64 + 100 * h as u64 + k;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(50..=2000u64);
            let b = *[1u32, 4, 9].choose(&mut rng).expect("nonempty");
            let c_i = rng.random_range(1..=4u32);
            let m = *[2u32, 4].choose(&mut rng).expect("nonempty");
            let delta = *[0.5, 1.0, 2.0].choose(&mut rng).expect("nonempty");
            let policy = if k % 2 == 0 { ConflictPolicy::Conservative } else { ConflictPolicy::HopReach };
            let cfg = config(&format!(
                "n={n}\nb={b}\nC_A={c_a}\nC_I={c_i}\nm={m}\nW_A={c_a}\nW_I=1\nH={h}\ndelta={delta}\nseed={seed}"
            ));
            let opts = TrialOptions { policy, ..TrialOptions::default() };
            let art = build_trial(&cfg, &opts).map_err(|e| format!("seed {seed}: {e}"))?;
            let report = audit(art.schedule.schedule(), &art.topology, &art.flows.graph, art.range, cfg.delta);
            Ok(report.half_duplex
                + report.guard_zone
                + report.unserved
                + report.out_of_range
                + report.out_of_bounds
                + report.frame)
        })
        .collect();
    let errors: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    let violations: usize = results.iter().filter_map(|r| r.as_ref().ok()).sum();
    CheckOutcome::new(
        2,
        "schedule feasibility",
        errors.is_empty() && violations == 0,
        format!(
            "{} configs, {} audit violations, {} build failures{}",
            jobs.len(),
            violations,
            errors.len(),
            errors.first().map(|e| format!(" (first: {e})")).unwrap_or_default()
        ),
    )
}

/// Interfering-cell counts over random grid sizes never exceed `⌈4(1+Δ)²⌉`.
pub fn interfering_cell_constant(grids: usize) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let sides: Vec<u32> = (0..grids).map(|_| rng.random_range(1..=80)).collect();
    let mut worst = Vec::new();
    let mut passed = true;
    for delta in [0.5, 1.0, 2.0] {
        let bound = interfering_cell_bound(delta).expect("positive delta");
        let measured = sides
            .par_iter()
            .map(|&side| {
                let grid = CellGrid::new(side);
                (0..grid.len())
                    .map(|c| interfering_cells(c, &grid, delta).expect("positive delta").len())
                    .max()
                    .unwrap_or(0)
            })
            .max()
            .unwrap_or(0);
        passed &= measured <= bound as usize;
        worst.push(format!("delta={delta}: max {measured} <= {bound}"));
    }
    CheckOutcome::new(3, "interfering-cell constant", passed, format!("{} grids; {}", grids, worst.join(", ")))
}

/// Greedy colorings stay within `maxdeg + 1` (vertex) and `2·maxdeg − 1` (edge).
pub fn coloring_bounds(instances: usize) -> CheckOutcome {
    let failures: usize = (0..instances as u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(2..=600usize);
            let r = rng.random_range(0.01..0.2);
            let g = GeometricConflicts::uniform(place_nodes(n, seed), r, 1.0);
            let colors = vertex_color(&g);
            let mut buf = Vec::new();
            let mut maxdeg = 0;
            let mut proper = true;
            for v in 0..g.vertex_count() {
                g.neighbors(v, &mut buf);
                maxdeg = maxdeg.max(buf.len());
                proper &= buf.iter().all(|&u| colors[u] != colors[v]);
            }
            let vertex_ok = proper && color_count(&colors) <= maxdeg + 1;

            let m = rng.random_range(1..=3 * n);
            let edges: Vec<(u32, u32)> = (0..m)
                .map(|_| {
                    let a = rng.random_range(0..n as u32);
                    let mut b = rng.random_range(0..n as u32 - 1);
                    if b >= a {
                        b += 1;
                    }
                    (a, b)
                })
                .collect();
            let ecolors = edge_color_pairs(n, &edges);
            let mut deg = vec![0usize; n];
            let mut seen = std::collections::HashSet::new();
            let mut eproper = true;
            for (&(a, b), &c) in edges.iter().zip(&ecolors) {
                deg[a as usize] += 1;
                deg[b as usize] += 1;
                eproper &= seen.insert((a, c)) && seen.insert((b, c));
            }
            let emax = deg.into_iter().max().unwrap_or(0);
            let edge_ok = eproper && color_count(&ecolors) <= (2 * emax).saturating_sub(1);
            usize::from(!vertex_ok) + usize::from(!edge_ok)
        })
        .sum();
    CheckOutcome::new(
        4,
        "coloring bounds",
        failures == 0,
        format!("{instances} random graph pairs, {failures} bound or properness failures"),
    )
}

/// Measured Σ1 `T_I` equals `b·min(C_I,m)/C_I·W_I/(k8+1)` to `1e-9` relative error.
pub fn sigma1_exactness() -> CheckOutcome {
    let cases =
        [(1u32, 2u32, 2u32, 17.0), (4, 2, 4, 3.0), (9, 4, 4, 12.0), (9, 8, 4, 12.0), (16, 6, 2, 5.5), (25, 3, 2, 1.0)];
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for (b, c_i, m, w_i) in cases {
        let cfg = config(&format!("n=2000\nb={b}\nC_A=1\nC_I={c_i}\nm={m}\nW_A=1\nW_I={w_i}\nH=1\nseed={b}"));
        let k8 = BoundsConstants::from_delta(cfg.delta).k8 as f64;
        let expected =
            if c_i <= m { b as f64 * w_i / (k8 + 1.0) } else { b as f64 * (m as f64 / c_i as f64) * w_i / (k8 + 1.0) };
        match build_trial(&cfg, &TrialOptions::default()) {
            Ok(art) => {
                let thr = measure_throughput(&art.schedule, &art.flows, &art.topology, &cfg);
                let rel = (thr.t_i - expected).abs() / expected;
                worst = worst.max(rel);
                if rel > 1e-9 {
                    failures.push(format!("b={b} C_I={c_i} m={m}: {} vs {expected}", thr.t_i));
                }
            }
            Err(e) => failures.push(format!("b={b}: {e}")),
        }
    }
    CheckOutcome::new(
        5,
        "sigma1 exactness",
        failures.is_empty(),
        format!("{} configs, worst relative error {worst:.1e} (limit 1e-9){}", cases.len(), join_failures(&failures)),
    )
}

fn join_failures(f: &[String]) -> String {
    if f.is_empty() {
        String::new()
    } else {
        format!("; {}", f.join("; "))
    }
}

/// SC-AH config at `n`: one ad-hoc channel, all bandwidth ad hoc, `H = ⌈√(n/ln n)⌉`.
pub fn scah_config(n: u64, seed: u64) -> NetworkConfig {
    let nf = n as f64;
    let h = (nf / nf.ln()).sqrt().ceil() as u32;
    config(&format!("n={n}\nb=1\nC_A=1\nC_I=0\nm=0\nW_A=1\nW_I=0\nH={h}\nseed={seed}"))
}

/// Measured SC-AH per-node throughput over `n ∈ {2^12..2^16}`, averaged per `n`.
pub fn scah_sweep(seeds: usize, workers: Option<usize>) -> Result<Vec<(f64, f64)>, String> {
    let points: Vec<NetworkConfig> = (12..=16).map(|k| scah_config(1u64 << k, 0)).collect();
    let seed_list: Vec<u64> = (0..seeds as u64).collect();
    let rows = sweep(&points, &seed_list, &TrialOptions::default(), workers);
    let mut means = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let mut sum = 0.0;
        for row in &rows[i * seeds..(i + 1) * seeds] {
            match &row.outcome {
                Ok(r) => sum += r.lambda_min,
                Err(e) => return Err(format!("n={} seed={}: {e}", p.n, row.seed)),
            }
        }
        means.push((p.n as f64, sum / seeds as f64));
    }
    Ok(means)
}

/// Reduction ratio constant within 10% over `{10^4, 10^5, 10^6}`; measured
/// per-node throughput slope in `[-0.65, -0.45]`.
pub fn scah_reduction(seeds: usize, workers: Option<usize>) -> CheckOutcome {
    let ratios: Vec<f64> = [1e4f64, 1e5, 1e6]
        .iter()
        .map(|&n| {
            let h = (n / n.ln()).sqrt().ceil();
            let bound = adhoc_per_node_bound(Condition::Connectivity, n, h, 1.0, 1.0).expect("valid domain");
            bound / (1.0 / (n * n.ln()).sqrt())
        })
        .collect();
    let hi = ratios.iter().copied().fold(f64::MIN, f64::max);
    let lo = ratios.iter().copied().fold(f64::MAX, f64::min);
    let ratio_ok = hi / lo <= 1.10;
    let (slope_ok, slope_text) = match scah_sweep(seeds, workers)
        .and_then(|pts| fit_scaling(&pts).map(|f| (f, pts)).map_err(|e| e.to_string()))
    {
        Ok((fit, pts)) => (
            (-0.65..=-0.45).contains(&fit.slope),
            format!(
                "measured slope {:.4} (R2 {:.3}) over {}",
                fit.slope,
                fit.r2,
                pts.iter().map(|(n, v)| format!("{n}:{v:.3e}")).collect::<Vec<_>>().join(" ")
            ),
        ),
        Err(e) => (false, format!("sweep failed: {e}")),
    };
    CheckOutcome::new(
        6,
        "SC-AH reduction",
        ratio_ok && slope_ok,
        format!(
            "bound ratios {:.4}/{:.4}/{:.4} (spread {:.4}, limit 1.10); {slope_text}, target [-0.65, -0.45]",
            ratios[0],
            ratios[1],
            ratios[2],
            hi / lo
        ),
    )
}

/// Saturated base-station delay ratio between 4 and 1 parallel channels, plus
/// the closed-form delay at `n = 10^6, H = 10`.
pub fn delay_gain() -> CheckOutcome {
    // m must be even, so min(C_I, m) = 1 is realized with C_I = 1, m = 2
    let infra_delay = |c_i: u32, m: u32| -> Result<f64, String> {
        let cfg = config(&format!("n=1000\nb=1\nC_A=1\nC_I={c_i}\nm={m}\nW_A=1\nW_I=1\nH=1\nseed=9"));
        let art = build_trial(&cfg, &TrialOptions::default()).map_err(|e| e.to_string())?;
        let d = measure_delay(&art.flows, &art.topology, &cfg, 1.0, true).map_err(|e| e.to_string())?;
        Ok(d.infra_mean_seconds)
    };
    let formula =
        average_delay(&DelayParams { n: 1e6, h: 10.0, b: 1.0, c_i: 4, m: 4, w_i: 1.0, c: 1.0 }, DelayForm::Shared)
            .expect("parallelism is positive");
    let formula_ok = (formula - 0.29232).abs() <= 1e-4;
    match (infra_delay(4, 4), infra_delay(1, 2)) {
        (Ok(four), Ok(one)) => {
            let ratio = four / one;
            CheckOutcome::new(
                7,
                "delay gain",
                (ratio - 0.25).abs() <= 0.05 && formula_ok,
                format!("saturated ratio {ratio:.4} (target 0.25 +/- 0.05); closed form {formula:.5} (target 0.29232 +/- 1e-4)"),
            )
        }
        (a, b) => CheckOutcome::new(7, "delay gain", false, format!("trial failed: {a:?} {b:?}")),
    }
}

/// Ad-hoc source counts near `πH² ln n` and cell occupancy near `n·a`.
///
/// The range is the connectivity radius with margin `√π`, i.e. `√(ln n / n)`,
/// for which `n·P(AH)` equals `πH² ln n`.
pub fn concentration(seeds: usize) -> CheckOutcome {
    let n = 100_000usize;
    let h = 5;
    let r = connectivity_radius(n as u64, PI.sqrt()).expect("n >= 2");
    let expected = expected_adhoc_sources(n as f64, h as f64);
    let counts: Vec<f64> = (0..seeds as u64).into_par_iter().map(|s| count_adhoc_sources(n, h, r, s) as f64).collect();
    let within = counts.iter().filter(|&&c| (c - expected).abs() <= 0.2 * expected).count();
    let mean = counts.iter().sum::<f64>() / seeds as f64;
    let sources_ok = within * 100 >= 95 * seeds;

    let mut occ_text = Vec::new();
    let mut occ_ok = true;
    for n in [10_000usize, 100_000] {
        let nf = n as f64;
        let a = 60.0 * nf.ln() / nf;
        let good = (0..seeds as u64)
            .into_par_iter()
            .filter(|&s| {
                let topo = Topology::from_nodes(place_nodes(n, 500 + s), 1, a).expect("valid area");
                let mean = nf * topo.cell_grid.area();
                topo.nodes_per_cell().iter().all(|&c| (0.25 * mean..=4.0 * mean).contains(&(c as f64)))
            })
            .count();
        occ_ok &= good * 100 >= 95 * seeds;
        occ_text.push(format!("n={n}: {good}/{seeds}"));
    }
    CheckOutcome::new(
        8,
        "concentration",
        sources_ok && occ_ok,
        format!(
            "ad-hoc sources within 20% of {expected:.1} in {within}/{seeds} seeds (H={h}, mean {mean:.1}); occupancy within [0.25, 4]x in {}",
            occ_text.join(", ")
        ),
    )
}

/// Max flows per destination over `N` sources, relative to `ln N / ln ln N`,
/// changes by less than 2x between `N = 10^3` and `N = 10^5`.
pub fn destination_maximum(seeds: usize) -> CheckOutcome {
    let mean_ratio = |n: usize| -> f64 {
        let total: u64 = (0..seeds as u64).into_par_iter().map(|s| max_bin_load(n, n, s) as u64).sum();
        total as f64 / seeds as f64 / max_load_scale(n as f64)
    };
    let small = mean_ratio(1_000);
    let large = mean_ratio(100_000);
    let spread = small.max(large) / small.min(large);
    CheckOutcome::new(
        9,
        "destination flow maximum",
        spread < 2.0,
        format!("ratio {small:.3} at N=1e3, {large:.3} at N=1e5, spread {spread:.3} (limit 2)"),
    )
}

/// The three worked classification examples.
pub fn classifier_fixtures() -> CheckOutcome {
    let cases = [
        ((1e6, 4.0, 5.0), (1, 1, Condition::InterfaceBottleneck)),
        ((1e6, 4.0, 50.0), (1, 2, Condition::Connectivity)),
        ((1e6, 100.0, 10.0), (2, 3, Condition::InterfaceBottleneck)),
    ];
    let mut lines = Vec::new();
    let mut ok = true;
    for ((n, c_a, h), want) in cases {
        match classify_condition(n, c_a, h) {
            Ok(c) => {
                ok &= (c.case, c.sub_case, c.condition) == want;
                lines.push(format!("(C_A={c_a}, H={h}) -> {c}"));
            }
            Err(e) => {
                ok = false;
                lines.push(format!("(C_A={c_a}, H={h}) -> {e}"));
            }
        }
    }
    CheckOutcome::new(10, "classifier fixtures", ok, lines.join("; "))
}

/// Full-size suite in criterion order.
pub fn run_all(workers: Option<usize>) -> Vec<CheckOutcome> {
    vec![
        hop_count_law(),
        schedule_feasibility(12),
        interfering_cell_constant(50),
        coloring_bounds(200),
        sigma1_exactness(),
        scah_reduction(10, workers),
        delay_gain(),
        concentration(100),
        destination_maximum(200),
        classifier_fixtures(),
    ]
}

//! Closed-form capacity and delay formulas, with the regime classifier.
//!
//! Every order-of-magnitude expression is evaluated with constant factor 1,
//! natural logarithms throughout.

use std::f64::consts::PI;
use std::fmt;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::config::{BoundsConstants, NetworkConfig};
use crate::math::{DomainError, LogTerms};
use crate::topology::cell_area;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("infrastructure traffic needs min(C_I, m) > 0")]
    NoInfrastructureParallelism,
}

/// Requirement that binds the ad-hoc capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Condition {
    Connectivity,
    Interference,
    DestinationBottleneck,
    InterfaceBottleneck,
}

impl Condition {
    pub fn from_sub_case(sub_case: u8) -> Condition {
        match sub_case {
            2 => Condition::Connectivity,
            4 => Condition::Interference,
            6 => Condition::DestinationBottleneck,
            _ => Condition::InterfaceBottleneck,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Condition::Connectivity => "Connectivity",
            Condition::Interference => "Interference",
            Condition::DestinationBottleneck => "DestinationBottleneck",
            Condition::InterfaceBottleneck => "InterfaceBottleneck",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Case thresholds on `C_A` (`F1`, `F2`) and sub-case thresholds on `H` (`G1..G3`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub f1: f64,
    pub f2: f64,
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
}

impl Thresholds {
    pub fn new(n: f64, c_a: f64, h: f64) -> Result<Thresholds, DomainError> {
        let logs = LogTerms::new(n, h)?;
        let ln_n = logs.ln_n;
        Ok(Thresholds {
            f1: ln_n,
            f2: n * logs.destination_ratio().powi(2),
            g1: n.cbrt() / ln_n.powf(2.0 / 3.0),
            g2: n.cbrt() * c_a.powf(1.0 / 6.0) / ln_n.sqrt(),
            g3: (n / ln_n).sqrt(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Classification {
    pub case: u8,
    pub sub_case: u8,
    pub condition: Condition,
    pub thresholds: Thresholds,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Case {} / Sub-case {} / {}", self.case, self.sub_case, self.condition)
    }
}

/// Case from `C_A` against `F1`/`F2`, sub-case from `H` against the case's
/// `G` threshold. Ties resolve to the lower case and sub-case.
pub fn classify_condition(n: f64, c_a: f64, h: f64) -> Result<Classification, DomainError> {
    if !(c_a >= 1.0) {
        return Err(DomainError::Parameter { name: "C_A", value: c_a });
    }
    let t = Thresholds::new(n, c_a, h)?;
    let (case, g) = if c_a <= t.f1 {
        (1, t.g1)
    } else if c_a <= t.f2 {
        (2, t.g2)
    } else {
        (3, t.g3)
    };
    let sub_case = 2 * case - u8::from(h <= g);
    Ok(Classification { case, sub_case, condition: Condition::from_sub_case(sub_case), thresholds: t })
}

/// Per-node ad-hoc throughput bound `λ_a` under the given condition.
pub fn adhoc_per_node_bound(cond: Condition, n: f64, h: f64, c_a: f64, w_a: f64) -> Result<f64, DomainError> {
    let logs = LogTerms::new(n, h)?;
    let ln_n = logs.ln_n;
    let h3 = h.powi(3);
    Ok(match cond {
        Condition::Connectivity => n * w_a / (h3 * ln_n * ln_n * c_a),
        Condition::Interference => n * w_a / (c_a.sqrt() * h3 * ln_n.powf(1.5)),
        Condition::DestinationBottleneck => {
            n.powf(1.5) * logs.ln_ln_h2 * w_a / (c_a * h3 * ln_n.powf(1.5) * logs.ln_h2)
        }
        Condition::InterfaceBottleneck => w_a / c_a,
    })
}

/// Aggregate ad-hoc throughput `T_A = H² ln n · λ_a`: `πH² ln n` active
/// sources each at `λ_a`, with the constant π absorbed.
pub fn adhoc_aggregate(cond: Condition, n: f64, h: f64, c_a: f64, w_a: f64) -> Result<f64, DomainError> {
    let lambda_a = adhoc_per_node_bound(cond, n, h, c_a, w_a)?;
    Ok(h * h * n.ln() * lambda_a)
}

/// `T_I`: `b·W_I` when `C_I ≤ m`, otherwise `b·(m/C_I)·W_I`.
pub fn infra_capacity(b: f64, m: f64, c_i: f64, w_i: f64) -> f64 {
    if w_i <= 0.0 || c_i <= 0.0 {
        return 0.0;
    }
    if c_i <= m {
        b * w_i
    } else {
        b * (m / c_i) * w_i
    }
}

/// Combined per-node throughput `λ = T_A/n + T_I/n`.
pub fn per_node_throughput(t_a: f64, t_i: f64, n: f64) -> f64 {
    (t_a + t_i) / n
}

/// Which infrastructure delay term to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DelayForm {
    /// `c / min(C_I, m)`.
    Shared,
    /// `c / (b · min(C_I, m))`.
    PerStation,
}

/// Inputs of the delay mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayParams {
    pub n: f64,
    pub h: f64,
    pub b: f64,
    pub c_i: u32,
    pub m: u32,
    pub w_i: f64,
    pub c: f64,
}

impl From<&NetworkConfig> for DelayParams {
    fn from(cfg: &NetworkConfig) -> DelayParams {
        DelayParams {
            n: cfg.n as f64,
            h: cfg.h as f64,
            b: cfg.b as f64,
            c_i: cfg.c_i,
            m: cfg.m,
            w_i: cfg.w_i,
            c: cfg.c_service,
        }
    }
}

/// Average packet delay: `(n_a·H + (n − n_a)·c/min(C_I, m)) / n` with
/// `n_a = min(πH² ln n, n)` ad-hoc packets at `H` each.
pub fn average_delay(p: &DelayParams, form: DelayForm) -> Result<f64, BoundsError> {
    let n_a = (PI * p.h * p.h * p.n.ln()).clamp(0.0, p.n);
    let par = p.c_i.min(p.m) as f64;
    if par == 0.0 {
        if p.w_i > 0.0 && n_a < p.n {
            return Err(BoundsError::NoInfrastructureParallelism);
        }
        return Ok(p.h);
    }
    let infra = match form {
        DelayForm::Shared => p.c / par,
        DelayForm::PerStation => p.c / (p.b * par),
    };
    Ok((n_a * p.h + (p.n - n_a) * infra) / p.n)
}

/// Every evaluated formula for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub case: u8,
    pub sub_case: u8,
    pub condition: Condition,
    pub thresholds: Thresholds,
    pub cell_area: f64,
    pub k5: f64,
    pub k8: u32,
    pub lambda_a: f64,
    pub t_a: f64,
    pub t_i: f64,
    pub lambda: f64,
    pub delay: f64,
    pub delay_per_station: f64,
}

impl BoundsReport {
    pub fn evaluate(cfg: &NetworkConfig, consts: &BoundsConstants) -> Result<BoundsReport, BoundsError> {
        let n = cfg.n as f64;
        let h = cfg.h as f64;
        let c_a = cfg.c_a as f64;
        let class = classify_condition(n, c_a, h)?;
        let s = consts.threshold_scale;
        let lambda_a = s * adhoc_per_node_bound(class.condition, n, h, c_a, cfg.w_a)?;
        let t_a = s * adhoc_aggregate(class.condition, n, h, c_a, cfg.w_a)?;
        let t_i = s * infra_capacity(cfg.b as f64, cfg.m as f64, cfg.c_i as f64, cfg.w_i);
        let params = DelayParams::from(cfg);
        Ok(BoundsReport {
            case: class.case,
            sub_case: class.sub_case,
            condition: class.condition,
            thresholds: class.thresholds,
            cell_area: cell_area(n, c_a, h)?,
            k5: consts.k5,
            k8: consts.k8,
            lambda_a,
            t_a,
            t_i,
            lambda: per_node_throughput(t_a, t_i, n),
            delay: average_delay(&params, DelayForm::Shared)?,
            delay_per_station: average_delay(&params, DelayForm::PerStation)?,
        })
    }

    /// Flat `(name, value)` view shared by the text, CSV and JSON writers.
    pub fn fields(&self) -> Vec<(&'static str, Value)> {
        let f = |x: f64| serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number);
        vec![
            ("case", Value::from(self.case)),
            ("sub_case", Value::from(self.sub_case)),
            ("condition", Value::from(self.condition.name())),
            ("F1", f(self.thresholds.f1)),
            ("F2", f(self.thresholds.f2)),
            ("G1", f(self.thresholds.g1)),
            ("G2", f(self.thresholds.g2)),
            ("G3", f(self.thresholds.g3)),
            ("cell_area", f(self.cell_area)),
            ("k5", f(self.k5)),
            ("k8", Value::from(self.k8)),
            ("lambda_a", f(self.lambda_a)),
            ("T_A", f(self.t_a)),
            ("T_I", f(self.t_i)),
            ("lambda", f(self.lambda)),
            ("D", f(self.delay)),
            ("D_per_station", f(self.delay_per_station)),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpecialCase {
    ScAh,
    McAh,
    ScIs,
}

impl SpecialCase {
    pub fn parse(s: &str) -> Option<SpecialCase> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "scah" => Some(SpecialCase::ScAh),
            "mcah" => Some(SpecialCase::McAh),
            "scis" => Some(SpecialCase::ScIs),
            _ => None,
        }
    }
}

/// Parameters that collapse the hybrid network into a baseline, with the
/// baseline's reference throughput and the hybrid bound evaluated there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reduction {
    pub kind: SpecialCase,
    pub n: f64,
    /// Real-valued hop limit used for the bound.
    pub h: f64,
    pub b: f64,
    pub c_a: u32,
    pub c_i: u32,
    pub m: u32,
    pub w_a: f64,
    pub w_i: f64,
    pub reference: f64,
    pub bound: f64,
    pub reference_delay: Option<f64>,
    pub delay: Option<f64>,
}

impl Reduction {
    pub fn ratio(&self) -> f64 {
        self.bound / self.reference
    }
}

/// Reduces to SC-AH (`H = √(n/ln n)`, `C_A = 1`, `W_I = 0`), MC-AH (same with
/// `C_A = channels`) or SC-IS (`C_A = C_I = 1`, `m = 2`, `W_A = 0`, `W_I = W/2`).
pub fn reduce_special_case(kind: SpecialCase, n: f64, w: f64, channels: u32) -> Result<Reduction, BoundsError> {
    let ln_n = n.ln();
    let h_ad = (n / ln_n).sqrt();
    match kind {
        SpecialCase::ScAh | SpecialCase::McAh => {
            let c_a = if kind == SpecialCase::ScAh { 1 } else { channels.max(1) };
            let bound = adhoc_per_node_bound(Condition::Connectivity, n, h_ad, c_a as f64, w)?;
            Ok(Reduction {
                kind,
                n,
                h: h_ad,
                b: 0.0,
                c_a,
                c_i: 0,
                m: 0,
                w_a: w,
                w_i: 0.0,
                reference: w / (c_a as f64 * (n * ln_n).sqrt()),
                bound,
                reference_delay: None,
                delay: None,
            })
        }
        SpecialCase::ScIs => {
            let b = n.sqrt().round().powi(2);
            let w_i = w / 2.0;
            let t_i = infra_capacity(b, 2.0, 1.0, w_i);
            let params = DelayParams { n, h: 1.0, b, c_i: 1, m: 2, w_i, c: 1.0 };
            Ok(Reduction {
                kind,
                n,
                h: 1.0,
                b,
                c_a: 1,
                c_i: 1,
                m: 2,
                w_a: 0.0,
                w_i,
                reference: w,
                bound: per_node_throughput(0.0, t_i, n),
                reference_delay: Some(1.0),
                delay: Some(average_delay(&params, DelayForm::Shared)?),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs()
    }

    #[test]
    fn classification_fixtures() {
        let c = classify_condition(1e6, 4.0, 5.0).unwrap();
        assert_eq!((c.case, c.sub_case, c.condition), (1, 1, Condition::InterfaceBottleneck));
        assert!(close(c.thresholds.f1, 13.8155, 1e-5));
        assert!(close(c.thresholds.g1, 17.37, 1e-3));
        let c = classify_condition(1e6, 4.0, 50.0).unwrap();
        assert_eq!((c.case, c.sub_case, c.condition), (1, 2, Condition::Connectivity));
        let c = classify_condition(1e6, 100.0, 10.0).unwrap();
        assert_eq!((c.case, c.sub_case, c.condition), (2, 3, Condition::InterfaceBottleneck));
        assert!(close(c.thresholds.f2, 7.49e4, 1e-3));
        assert!(close(c.thresholds.g2, 57.96, 1e-3));
        assert_eq!(c.to_string(), "Case 2 / Sub-case 3 / InterfaceBottleneck");
    }

    #[test]
    fn classification_boundaries_go_low() {
        let n = 1e6f64;
        let f1 = n.ln();
        // C_A exactly on F1 is not representable as an integer here, so probe H = G1 instead
        let g1 = n.cbrt() / f1.powf(2.0 / 3.0);
        let c = classify_condition(n, 4.0, g1).unwrap();
        assert_eq!(c.sub_case, 1);
        assert_eq!(classify_condition(n, 4.0, g1 * (1.0 + 1e-12)).unwrap().sub_case, 2);
        let c = classify_condition(n, 200_000.0, 2.0).unwrap();
        assert_eq!(c.case, 3);
        assert!(matches!(classify_condition(3.0, 1.0, 1.0), Err(DomainError::IteratedLog(_))));
    }

    #[test]
    fn per_node_examples() {
        assert_eq!(adhoc_per_node_bound(Condition::InterfaceBottleneck, 1e6, 2.0, 3.0, 6.0).unwrap(), 2.0);
        let v = adhoc_per_node_bound(Condition::Connectivity, 1e6, 50.0, 4.0, 1.0).unwrap();
        assert!(close(v, 1.048e-2, 1e-3), "{v}");
        let v = adhoc_per_node_bound(Condition::Interference, 1e6, 50.0, 4.0, 1.0).unwrap();
        assert!(close(v, 7.79e-2, 1e-3), "{v}");
    }

    #[test]
    fn aggregate_examples() {
        let e = std::f64::consts::E;
        let v = adhoc_aggregate(Condition::InterfaceBottleneck, e, 2.0, 1.0, 1.0).unwrap();
        assert!(close(v, 4.0, 1e-12));
        let v = adhoc_aggregate(Condition::Connectivity, 1e6, 50.0, 4.0, 1.0).unwrap();
        assert!(close(v, 361.9, 1e-3), "{v}");
        for cond in [Condition::Connectivity, Condition::Interference, Condition::DestinationBottleneck] {
            let la = adhoc_per_node_bound(cond, 1e5, 7.0, 3.0, 2.0).unwrap();
            let ta = adhoc_aggregate(cond, 1e5, 7.0, 3.0, 2.0).unwrap();
            // n·πH²r² with r² = ln n/(πn) gives H² ln n active sources
            assert!(close(ta / la, 1e5 * PI * 49.0 * (1e5f64.ln() / (PI * 1e5)), 1e-12));
        }
    }

    #[test]
    fn infra_examples() {
        assert_eq!(infra_capacity(9.0, 4.0, 4.0, 12.0), 108.0);
        assert_eq!(infra_capacity(9.0, 4.0, 8.0, 12.0), 54.0);
        assert_eq!(infra_capacity(9.0, 4.0, 4.0, 0.0), 0.0);
        assert_eq!(infra_capacity(9.0, 0.0, 4.0, 1.0), 0.0);
    }

    #[test]
    fn delay_examples() {
        let p = DelayParams { n: 1e6, h: 10.0, b: 4.0, c_i: 4, m: 4, w_i: 1.0, c: 1.0 };
        let d = average_delay(&p, DelayForm::Shared).unwrap();
        assert!((d - 0.29232).abs() < 1e-5, "{d}");
        let p = DelayParams { h: 1.0, c_i: 1, m: 1, ..p };
        let d = average_delay(&p, DelayForm::Shared).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        let p = DelayParams { c_i: 0, ..p };
        assert_eq!(average_delay(&p, DelayForm::Shared), Err(BoundsError::NoInfrastructureParallelism));
        let p = DelayParams { n: 1e8, h: 1.0, b: 4.0, c_i: 2, m: 2, w_i: 1.0, c: 1.0 };
        let d = average_delay(&p, DelayForm::Shared).unwrap();
        assert!((d - 0.5).abs() < 1e-3);
        let d = average_delay(&p, DelayForm::PerStation).unwrap();
        assert!((d - 0.125).abs() < 1e-3);
    }

    #[test]
    fn full_infrastructure_gives_w_i_per_node() {
        let t_i = infra_capacity(1000.0, 2.0, 2.0, 3.0);
        assert_eq!(per_node_throughput(0.0, t_i, 1000.0), 3.0);
    }

    #[test]
    fn reductions() {
        for n in [1e4, 1e5, 1e6] {
            let r = reduce_special_case(SpecialCase::ScAh, n, 1.0, 1).unwrap();
            assert!((r.ratio() - 1.0).abs() < 1e-12, "{}", r.ratio());
            let r = reduce_special_case(SpecialCase::McAh, n, 1.0, 4).unwrap();
            assert!((r.ratio() - 1.0).abs() < 1e-12);
        }
        let r = reduce_special_case(SpecialCase::ScAh, 1e6, 1.0, 1).unwrap();
        assert!(close(r.reference, 2.690e-4, 1e-3));
        let r = reduce_special_case(SpecialCase::ScIs, 1e6, 1.0, 2).unwrap();
        assert!(close(r.bound, 0.5, 1e-12));
        assert!(close(r.delay.unwrap(), 1.0, 1e-3));
    }

    #[test]
    fn report_uses_config() {
        let cfg = crate::config::RawConfig {
            n: Some(1_000_000),
            h: Some(10),
            c_a: Some(4),
            c_i: Some(4),
            m: Some(4),
            ..Default::default()
        }
        .build()
        .unwrap();
        let rep = BoundsReport::evaluate(&cfg, &BoundsConstants::from_delta(cfg.delta)).unwrap();
        assert!((rep.delay - 0.29232).abs() < 1e-4);
        assert_eq!(rep.k8, 16);
        assert_eq!(rep.fields().len(), 17);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn classifier_is_total(n in 20.0f64..1e9, c_a in 1u32..10_000, h in 1u32..5000) {
                let c = classify_condition(n, c_a as f64, h as f64).unwrap();
                prop_assert!((1..=6).contains(&c.sub_case));
                prop_assert_eq!(c.condition, Condition::from_sub_case(c.sub_case));
                prop_assert_eq!(c.sub_case.div_ceil(2), c.case);
            }

            #[test]
            fn bounds_decrease_in_h(n in 100.0f64..1e8, h in 1.0f64..200.0, c_a in 1.0f64..50.0) {
                for cond in [Condition::Connectivity, Condition::Interference] {
                    let a = adhoc_per_node_bound(cond, n, h, c_a, 1.0).unwrap();
                    let b = adhoc_per_node_bound(cond, n, h + 1.0, c_a, 1.0).unwrap();
                    prop_assert!(b < a);
                }
                let a = adhoc_per_node_bound(Condition::Connectivity, n, h, c_a, 1.0).unwrap();
                let b = adhoc_per_node_bound(Condition::Connectivity, n, h, c_a + 1.0, 1.0).unwrap();
                prop_assert!(b < a);
            }

            #[test]
            fn infra_continuous_at_equal_split(b in 1u32..100, m in 1u32..32, w in 0.0f64..100.0) {
                let at = infra_capacity(b as f64, m as f64, m as f64, w);
                let above = infra_capacity(b as f64, m as f64, m as f64 + 1e-9, w);
                prop_assert!((at - b as f64 * w).abs() < 1e-9 * (1.0 + at));
                prop_assert!((at - above).abs() < 1e-6 * (1.0 + at));
            }
        }
    }
}

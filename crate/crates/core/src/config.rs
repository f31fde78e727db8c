//! Network configuration shared by every stage of the simulator.
//!
//! A [`NetworkConfig`] carries the full parameter set of an MC-IS network:
//! node and base-station counts, the channel and bandwidth split between
//! ad-hoc and infrastructure traffic, the hop limit `H`, the guard zone and
//! the transmission range. It is only constructed through [`validate_config`]
//! (or the [`RawConfig`] loader, which calls it), so a value of this type
//! always satisfies the structural constraints below:
//!
//! * `C = C_A + C_I`
//! * `W = W_A + 2 W_I` (uplink and downlink each get `W_I`)
//! * `m` is even, and at least 2 when `W_I > 0`
//! * `b = b0²`
//! * `delta > 0`, `H >= 1`, `n >= 2`

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

/// Absolute tolerance used when checking the bandwidth split on reals.
const SPLIT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("channel split violated: C_A + C_I = {c_a} + {c_i} != C = {c}")]
    ChannelSplit { c: u32, c_a: u32, c_i: u32 },
    #[error("bandwidth split violated: W_A + 2*W_I = {w_a} + 2*{w_i} != W = {w}")]
    BandwidthSplit { w: f64, w_a: f64, w_i: f64 },
    #[error("interface count m = {0} must be even")]
    OddInterfaces(u32),
    #[error("interface count m = {0} must be at least 2 when W_I > 0")]
    TooFewInterfaces(u32),
    #[error("base station count b = {0} is not a perfect square")]
    NonSquareBaseStations(u32),
    #[error("b0 = {b0} does not match b = {b}")]
    BaseStationRoot { b: u32, b0: u32 },
    #[error("guard zone delta = {0} must be positive")]
    NonPositiveDelta(f64),
    #[error("hop limit H must be at least 1")]
    ZeroHops,
    #[error("node count n = {0} must be at least 2")]
    TooFewNodes(u64),
    #[error("bandwidth {name} = {value} must be finite and nonnegative")]
    InvalidBandwidth { name: &'static str, value: f64 },
    #[error("transmission range r = {0} must lie in (0, 1]")]
    InvalidRange(f64),
    #[error("transmission range r = {r} is below the connectivity threshold {threshold}")]
    RangeBelowConnectivity { r: f64, threshold: f64 },
    #[error("service constant c = {0} must be positive")]
    InvalidServiceTime(f64),
    #[error("connectivity margin {0} must be at least 1")]
    InvalidMargin(f64),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cannot read config file {path}: {message}")]
    Io { path: String, message: String },
}

/// Full parameter set of one network instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkConfig {
    pub n: u64,
    pub b: u32,
    pub b0: u32,
    /// Total channel count `C`.
    pub channels: u32,
    pub c_a: u32,
    pub c_i: u32,
    /// Interfaces per base station.
    pub m: u32,
    /// Total bandwidth `W` in bits/sec.
    pub w: f64,
    pub w_a: f64,
    /// Per-direction infrastructure bandwidth (`W_{I,U} = W_{I,D}`).
    pub w_i: f64,
    /// Maximum ad-hoc hop count.
    pub h: u32,
    pub delta: f64,
    pub r: f64,
    pub seed: u64,
    /// Infrastructure service time constant `c`, seconds.
    pub c_service: f64,
    /// Reject ranges below [`connectivity_radius`] when set.
    pub enforce_connectivity: bool,
}

impl NetworkConfig {
    pub fn infrastructure_enabled(&self) -> bool {
        self.w_i > 0.0
    }

    /// Parallel infrastructure transmissions a base station can sustain.
    pub fn bs_parallelism(&self) -> u32 {
        self.c_i.min(self.m)
    }

    pub fn with_seed(&self, seed: u64) -> NetworkConfig {
        NetworkConfig { seed, ..self.clone() }
    }
}

/// Checks every structural invariant and hands the config back unchanged.
pub fn validate_config(cfg: NetworkConfig) -> Result<NetworkConfig, ConfigError> {
    if cfg.n < 2 {
        return Err(ConfigError::TooFewNodes(cfg.n));
    }
    if cfg.c_a.checked_add(cfg.c_i) != Some(cfg.channels) {
        return Err(ConfigError::ChannelSplit { c: cfg.channels, c_a: cfg.c_a, c_i: cfg.c_i });
    }
    for (name, value) in [("W", cfg.w), ("W_A", cfg.w_a), ("W_I", cfg.w_i)] {
        if !value.is_finite() || value < 0.0 {
            return Err(ConfigError::InvalidBandwidth { name, value });
        }
    }
    let split = cfg.w_a + 2.0 * cfg.w_i;
    if (split - cfg.w).abs() > SPLIT_TOLERANCE * cfg.w.abs().max(1.0) {
        return Err(ConfigError::BandwidthSplit { w: cfg.w, w_a: cfg.w_a, w_i: cfg.w_i });
    }
    if !cfg.m.is_multiple_of(2) {
        return Err(ConfigError::OddInterfaces(cfg.m));
    }
    if cfg.infrastructure_enabled() && cfg.m < 2 {
        return Err(ConfigError::TooFewInterfaces(cfg.m));
    }
    match integer_sqrt(cfg.b) {
        Some(root) if root >= 1 => {
            if cfg.b0 != root {
                return Err(ConfigError::BaseStationRoot { b: cfg.b, b0: cfg.b0 });
            }
        }
        _ => return Err(ConfigError::NonSquareBaseStations(cfg.b)),
    }
    if !(cfg.delta > 0.0) || !cfg.delta.is_finite() {
        return Err(ConfigError::NonPositiveDelta(cfg.delta));
    }
    if cfg.h < 1 {
        return Err(ConfigError::ZeroHops);
    }
    if !(cfg.r > 0.0 && cfg.r <= 1.0) {
        return Err(ConfigError::InvalidRange(cfg.r));
    }
    if !(cfg.c_service > 0.0) || !cfg.c_service.is_finite() {
        return Err(ConfigError::InvalidServiceTime(cfg.c_service));
    }
    if cfg.enforce_connectivity {
        let threshold = connectivity_threshold(cfg.n as f64);
        if cfg.r < threshold {
            return Err(ConfigError::RangeBelowConnectivity { r: cfg.r, threshold });
        }
    }
    Ok(cfg)
}

/// `Some(k)` when `value == k²`.
pub fn integer_sqrt(value: u32) -> Option<u32> {
    let root = (value as f64).sqrt().round() as u32;
    (root.checked_mul(root) == Some(value)).then_some(root)
}

fn connectivity_threshold(n: f64) -> f64 {
    (n.ln() / (std::f64::consts::PI * n)).sqrt()
}

/// Smallest range keeping a random network connected w.h.p., times `margin`.
///
/// `margin` below 1 would put the range under the threshold and is rejected.
pub fn connectivity_radius(n: u64, margin: f64) -> Result<f64, ConfigError> {
    if n < 2 {
        return Err(ConfigError::TooFewNodes(n));
    }
    if !(margin >= 1.0) || !margin.is_finite() {
        return Err(ConfigError::InvalidMargin(margin));
    }
    Ok(margin * connectivity_threshold(n as f64))
}

/// Constants that the capacity analysis leaves symbolic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundsConstants {
    /// Interfering-cell bound `4(1+Δ)²`.
    pub k5: f64,
    /// Interfering BS-cell bound, rounded up to a whole cell count.
    pub k8: u32,
    pub threshold_scale: f64,
    pub margin: f64,
}

impl BoundsConstants {
    pub fn from_delta(delta: f64) -> BoundsConstants {
        let k5 = 4.0 * (1.0 + delta).powi(2);
        BoundsConstants { k5, k8: k5.ceil() as u32, threshold_scale: 1.0, margin: 1.0 }
    }
}

/// Partially specified config, as read from a file or the command line.
///
/// Missing fields are filled by [`RawConfig::build`]: `C` and `W` default to
/// the sums of their parts and `r` to the connectivity radius.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub n: Option<u64>,
    pub b: Option<u32>,
    pub b0: Option<u32>,
    pub channels: Option<u32>,
    pub c_a: Option<u32>,
    pub c_i: Option<u32>,
    pub m: Option<u32>,
    pub w: Option<f64>,
    pub w_a: Option<f64>,
    pub w_i: Option<f64>,
    pub h: Option<u32>,
    pub delta: Option<f64>,
    pub r: Option<f64>,
    pub seed: Option<u64>,
    pub c_service: Option<f64>,
    pub enforce_connectivity: Option<bool>,
}

impl RawConfig {
    pub fn from_file(path: &Path) -> Result<RawConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        RawConfig::parse(&text)
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<RawConfig, ConfigError> {
        let mut raw = RawConfig::default();
        for (idx, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
                line: idx + 1,
                message: format!("expected key=value, got `{line}`"),
            })?;
            raw.set(key.trim(), value.trim()).map_err(|e| match e {
                ConfigError::Parse { message, .. } => ConfigError::Parse { line: idx + 1, message },
                other => other,
            })?;
        }
        Ok(raw)
    }

    /// Sets one field by its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
            value
                .parse()
                .map_err(|_| ConfigError::Parse { line: 0, message: format!("invalid value `{value}` for `{key}`") })
        }
        match key {
            "n" => self.n = Some(num(key, value)?),
            "b" => self.b = Some(num(key, value)?),
            "b0" => self.b0 = Some(num(key, value)?),
            "C" => self.channels = Some(num(key, value)?),
            "C_A" => self.c_a = Some(num(key, value)?),
            "C_I" => self.c_i = Some(num(key, value)?),
            "m" => self.m = Some(num(key, value)?),
            "W" => self.w = Some(num(key, value)?),
            "W_A" => self.w_a = Some(num(key, value)?),
            "W_I" => self.w_i = Some(num(key, value)?),
            "H" => self.h = Some(num(key, value)?),
            "delta" => self.delta = Some(num(key, value)?),
            "r" => self.r = Some(num(key, value)?),
            "seed" => self.seed = Some(num(key, value)?),
            "c_service" => self.c_service = Some(num(key, value)?),
            "enforce_connectivity" => self.enforce_connectivity = Some(num(key, value)?),
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Field-wise overlay: values present in `over` win.
    pub fn merged(&self, over: &RawConfig) -> RawConfig {
        RawConfig {
            n: over.n.or(self.n),
            b: over.b.or(self.b),
            b0: over.b0.or(self.b0),
            channels: over.channels.or(self.channels),
            c_a: over.c_a.or(self.c_a),
            c_i: over.c_i.or(self.c_i),
            m: over.m.or(self.m),
            w: over.w.or(self.w),
            w_a: over.w_a.or(self.w_a),
            w_i: over.w_i.or(self.w_i),
            h: over.h.or(self.h),
            delta: over.delta.or(self.delta),
            r: over.r.or(self.r),
            seed: over.seed.or(self.seed),
            c_service: over.c_service.or(self.c_service),
            enforce_connectivity: over.enforce_connectivity.or(self.enforce_connectivity),
        }
    }

    /// Fills defaults and validates.
    pub fn build(&self) -> Result<NetworkConfig, ConfigError> {
        let n = self.n.unwrap_or(1000);
        let b = self.b.unwrap_or(4);
        let c_a = self.c_a.unwrap_or(4);
        let c_i = self.c_i.unwrap_or(2);
        let w_a = self.w_a.unwrap_or(6.0);
        let w_i = self.w_i.unwrap_or(2.0);
        let r = match self.r {
            Some(r) => r,
            None => connectivity_threshold(n.max(2) as f64),
        };
        let cfg = NetworkConfig {
            n,
            b,
            b0: self.b0.unwrap_or_else(|| integer_sqrt(b).unwrap_or(0)),
            channels: self.channels.unwrap_or(c_a + c_i),
            c_a,
            c_i,
            m: self.m.unwrap_or(2),
            w: self.w.unwrap_or(w_a + 2.0 * w_i),
            w_a,
            w_i,
            h: self.h.unwrap_or(2),
            delta: self.delta.unwrap_or(1.0),
            r,
            seed: self.seed.unwrap_or(0),
            c_service: self.c_service.unwrap_or(1.0),
            enforce_connectivity: self.enforce_connectivity.unwrap_or(false),
        };
        validate_config(cfg)
    }

    /// Key/value view in config-file key order, for echoing.
    pub fn to_pairs(cfg: &NetworkConfig) -> BTreeMap<&'static str, String> {
        let mut map = BTreeMap::new();
        map.insert("n", cfg.n.to_string());
        map.insert("b", cfg.b.to_string());
        map.insert("b0", cfg.b0.to_string());
        map.insert("C", cfg.channels.to_string());
        map.insert("C_A", cfg.c_a.to_string());
        map.insert("C_I", cfg.c_i.to_string());
        map.insert("m", cfg.m.to_string());
        map.insert("W", cfg.w.to_string());
        map.insert("W_A", cfg.w_a.to_string());
        map.insert("W_I", cfg.w_i.to_string());
        map.insert("H", cfg.h.to_string());
        map.insert("delta", cfg.delta.to_string());
        map.insert("r", cfg.r.to_string());
        map.insert("seed", cfg.seed.to_string());
        map.insert("c_service", cfg.c_service.to_string());
        map.insert("enforce_connectivity", cfg.enforce_connectivity.to_string());
        map
    }
}

impl fmt::Display for NetworkConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (key, value) in RawConfig::to_pairs(self) {
            writeln!(f, "{key}={value}")?;
        }
        Ok(())
    }
}

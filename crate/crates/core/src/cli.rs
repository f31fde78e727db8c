//! Command-line front end. [`dispatch`] returns the process exit code:
//! 0 on success, 1 on invalid input, 2 on runtime or domain errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{Map, Value};

use crate::bounds::{classify_condition, reduce_special_case, BoundsReport, SpecialCase};
use crate::config::{BoundsConstants, NetworkConfig, RawConfig};
use crate::harness::{build_trial, fit_scaling, run_trial, sweep, ExperimentResult, TrialOptions, RESULTS_HEADER};
use crate::routing::Mode;
use crate::scheduling::ConflictPolicy;
use crate::verify::run_all;

#[derive(Debug, Parser)]
#[command(name = "mcis", version, about = "Capacity and delay toolkit for multi-channel hybrid wireless networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dominating requirement and case/sub-case for (n, C_A, H).
    Classify(Common),
    /// Every closed-form bound for a configuration.
    Bounds {
        #[command(flatten)]
        common: Common,
        /// Evaluate a special-case reduction instead: scah, mcah or scis.
        #[arg(long)]
        reduce: Option<String>,
    },
    /// Node and base-station positions, or the routed flows.
    Topo {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        trial: TrialArgs,
        /// Dump flows (`id,src,dst,mode,hops,length`) instead of positions.
        #[arg(long)]
        flows: bool,
    },
    /// One trial: build, schedule, audit and measure.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        trial: TrialArgs,
        /// Also write the schedule (`node,eslot,mslot,channel,role,flow`) here.
        #[arg(long)]
        schedule_out: Option<PathBuf>,
    },
    /// Trials over a parameter grid and a seed range.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        trial: TrialArgs,
        /// `key=v1,v2,...`; repeat for a cartesian product.
        #[arg(long = "vary", value_name = "KEY=LIST")]
        vary: Vec<String>,
        /// Seeds per point, counted up from --seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        workers: Option<usize>,
        /// Replace each point by its SC-AH reduction (C_A = 1, W_I = 0, H = ceil(sqrt(n / ln n))).
        #[arg(long)]
        scah: bool,
        /// Report a log-log fit of lambda_min against n on stderr.
        #[arg(long)]
        fit: bool,
    },
    /// The full verification suite; exit 0 iff every check passes.
    Verify {
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    Conservative,
    HopReach,
}

/// Network parameters, config file, seed and output selection.
#[derive(Debug, Args)]
struct Common {
    /// Key=value config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    b: Option<u32>,
    #[arg(long)]
    b0: Option<u32>,
    #[arg(long = "C", alias = "channels")]
    channels: Option<u32>,
    #[arg(long = "C_A", alias = "ca")]
    c_a: Option<u32>,
    #[arg(long = "C_I", alias = "ci")]
    c_i: Option<u32>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long = "W", alias = "w")]
    w: Option<f64>,
    #[arg(long = "W_A", alias = "wa")]
    w_a: Option<f64>,
    #[arg(long = "W_I", alias = "wi")]
    w_i: Option<f64>,
    #[arg(long = "H", alias = "hops")]
    h: Option<u32>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long = "c_service", alias = "c-service")]
    c_service: Option<f64>,
    #[arg(long = "enforce_connectivity", alias = "enforce-connectivity")]
    enforce_connectivity: Option<bool>,
    #[arg(long, env = "MCIS_SEED")]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrialArgs {
    /// Cell area floor factor: cells are at least `kappa · ln n / n`.
    #[arg(long, default_value_t = 2.0)]
    kappa: f64,
    /// Seconds charged per ad-hoc hop.
    #[arg(long, default_value_t = 1.0)]
    hop_seconds: f64,
    #[arg(long, value_enum, default_value_t = PolicyArg::Conservative)]
    policy: PolicyArg,
    /// Queue all infrastructure packets at time 0.
    #[arg(long)]
    saturated: bool,
}

impl TrialArgs {
    fn options(&self) -> Result<TrialOptions, CliError> {
        if !(self.kappa > 0.0) || !(self.hop_seconds > 0.0) {
            return Err(CliError::Invalid("--kappa and --hop-seconds must be positive".into()));
        }
        Ok(TrialOptions {
            area_floor: self.kappa,
            hop_seconds: self.hop_seconds,
            policy: match self.policy {
                PolicyArg::Conservative => ConflictPolicy::Conservative,
                PolicyArg::HopReach => ConflictPolicy::HopReach,
            },
            saturated: self.saturated,
        })
    }
}

#[derive(Debug)]
enum CliError {
    Invalid(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Invalid(m) | CliError::Runtime(m) => m,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

impl Common {
    fn raw(&self) -> Result<RawConfig, CliError> {
        let base = match &self.config {
            Some(path) => RawConfig::from_file(path).map_err(invalid)?,
            None => RawConfig::default(),
        };
        let flags = RawConfig {
            n: self.n,
            b: self.b,
            b0: self.b0,
            channels: self.channels,
            c_a: self.c_a,
            c_i: self.c_i,
            m: self.m,
            w: self.w,
            w_a: self.w_a,
            w_i: self.w_i,
            h: self.h,
            delta: self.delta,
            r: self.r,
            seed: self.seed,
            c_service: self.c_service,
            enforce_connectivity: self.enforce_connectivity,
        };
        Ok(base.merged(&flags))
    }

    fn network(&self) -> Result<NetworkConfig, CliError> {
        self.raw()?.build().map_err(invalid)
    }
}

/// Columns plus rows of JSON values; rendered as text, CSV or JSON lines.
struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Value>>,
}

fn cell(v: &Value) -> String {
    match v {
        Value::Number(num) => match (num.as_u64(), num.as_i64(), num.as_f64()) {
            (Some(u), _, _) => u.to_string(),
            (_, Some(i), _) => i.to_string(),
            (_, _, Some(f)) => f.to_string(),
            _ => num.to_string(),
        },
        Value::String(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn float(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

impl Table {
    fn new(columns: &[&str]) -> Table {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    fn single(pairs: Vec<(&str, Value)>) -> Table {
        let (cols, vals): (Vec<&str>, Vec<Value>) = pairs.into_iter().unzip();
        let mut t = Table::new(&cols);
        t.rows.push(vals);
        t
    }

    fn csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(cell).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    fn jsonl(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let obj: Map<String, Value> = self.columns.iter().cloned().zip(row.iter().cloned()).collect();
            out.push_str(&Value::Object(obj).to_string());
            out.push('\n');
        }
        out
    }

    fn text(&self) -> String {
        if self.rows.len() != 1 {
            return self.csv();
        }
        let width = self.columns.iter().map(|c| c.len()).max().unwrap_or(0);
        self.columns.iter().zip(&self.rows[0]).map(|(c, v)| format!("{c:<width$}  {}\n", cell(v))).collect()
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.text(),
            Format::Csv => self.csv(),
            Format::Json => self.jsonl(),
        }
    }
}

fn results_table(rows: &[ExperimentResult]) -> Table {
    let columns: Vec<&str> = RESULTS_HEADER.split(',').collect();
    let mut t = Table::new(&columns);
    for r in rows {
        let v = serde_json::to_value(r).expect("results serialize");
        t.rows.push(columns.iter().map(|c| v.get(*c).cloned().unwrap_or(Value::Null)).collect());
    }
    t
}

fn emit(text: &str, out: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| runtime(format!("cannot write {}: {e}", path.display()))),
        None => stdout.write_all(text.as_bytes()).map_err(runtime),
    }
}

fn classify(common: &Common, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = common.network()?;
    let c = classify_condition(cfg.n as f64, cfg.c_a as f64, cfg.h as f64).map_err(runtime)?;
    let text = match common.format {
        Format::Text => format!("{c}\n"),
        fmt => Table::single(vec![
            ("case", Value::from(c.case)),
            ("sub_case", Value::from(c.sub_case)),
            ("condition", Value::from(c.condition.name())),
            ("F1", float(c.thresholds.f1)),
            ("F2", float(c.thresholds.f2)),
            ("G1", float(c.thresholds.g1)),
            ("G2", float(c.thresholds.g2)),
            ("G3", float(c.thresholds.g3)),
        ])
        .render(fmt),
    };
    emit(&text, common.out.as_deref(), stdout)
}

fn bounds(common: &Common, reduce: Option<&str>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = common.network()?;
    let table = match reduce {
        Some(kind) => {
            let kind = SpecialCase::parse(kind).ok_or_else(|| invalid(format!("unknown reduction {kind:?}")))?;
            let r = reduce_special_case(kind, cfg.n as f64, cfg.w, cfg.channels).map_err(runtime)?;
            let opt = |x: Option<f64>| x.map_or(Value::Null, float);
            Table::single(vec![
                ("kind", Value::from(format!("{:?}", r.kind))),
                ("n", float(r.n)),
                ("H", float(r.h)),
                ("b", float(r.b)),
                ("C_A", Value::from(r.c_a)),
                ("C_I", Value::from(r.c_i)),
                ("m", Value::from(r.m)),
                ("W_A", float(r.w_a)),
                ("W_I", float(r.w_i)),
                ("reference", float(r.reference)),
                ("bound", float(r.bound)),
                ("ratio", float(r.ratio())),
                ("reference_delay", opt(r.reference_delay)),
                ("delay", opt(r.delay)),
            ])
        }
        None => {
            let rep = BoundsReport::evaluate(&cfg, &BoundsConstants::from_delta(cfg.delta)).map_err(runtime)?;
            Table::single(rep.fields())
        }
    };
    emit(&table.render(common.format), common.out.as_deref(), stdout)
}

fn topo(common: &Common, trial: &TrialArgs, flows: bool, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = common.network()?;
    let art = build_trial(&cfg, &trial.options()?).map_err(runtime)?;
    let t = &art.topology;
    let table = if flows {
        let mut table = Table::new(&["id", "src", "dst", "mode", "hops", "length"]);
        for f in &art.flows.flows {
            let mode = match f.mode() {
                Mode::AdHoc => "adhoc",
                Mode::Infrastructure => "infra",
            };
            table.rows.push(vec![
                Value::from(f.id),
                Value::from(f.src),
                Value::from(f.dst),
                Value::from(mode),
                Value::from(f.hop_count()),
                float(f.length),
            ]);
        }
        table
    } else {
        let mut table = Table::new(&["kind", "x", "y", "cell", "bscell"]);
        for (i, p) in t.nodes.iter().enumerate() {
            table.rows.push(vec![
                Value::from("node"),
                float(p.x),
                float(p.y),
                Value::from(t.cell_of_node(i)),
                Value::from(t.bs_cell_of_node(i)),
            ]);
        }
        for (k, p) in t.bs.iter().enumerate() {
            table.rows.push(vec![
                Value::from("bs"),
                float(p.x),
                float(p.y),
                Value::from(t.cell_grid.cell_of(p)),
                Value::from(k),
            ]);
        }
        table
    };
    let text = match common.format {
        Format::Json => table.jsonl(),
        _ => table.csv(),
    };
    emit(&text, common.out.as_deref(), stdout)
}

fn simulate(
    common: &Common,
    trial: &TrialArgs,
    schedule_out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let cfg = common.network()?;
    let opts = trial.options()?;
    if let Some(path) = schedule_out {
        let art = build_trial(&cfg, &opts).map_err(runtime)?;
        std::fs::write(path, art.schedule.schedule().to_csv())
            .map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    let row = run_trial(0, &cfg, &opts).map_err(runtime)?;
    emit(&results_table(&[row]).render(common.format), common.out.as_deref(), stdout)
}

/// Expands `--vary` specs into the cartesian product of configs.
fn sweep_points(base: &RawConfig, vary: &[String], scah: bool) -> Result<Vec<NetworkConfig>, CliError> {
    let mut raws = vec![base.clone()];
    for spec in vary {
        let (key, list) =
            spec.split_once('=').ok_or_else(|| invalid(format!("--vary expects KEY=LIST, got {spec:?}")))?;
        let mut next = Vec::new();
        for raw in &raws {
            for value in list.split(',').map(str::trim).filter(|v| !v.is_empty()) {
                let mut r = raw.clone();
                r.set(key.trim(), value).map_err(invalid)?;
                next.push(r);
            }
        }
        raws = next;
    }
    raws.into_iter()
        .map(|r| {
            if scah {
                let n = r.n.unwrap_or(1000);
                let h = ((n as f64) / (n as f64).ln()).sqrt().ceil() as u32;
                let over = RawConfig {
                    b: Some(1),
                    c_a: Some(1),
                    c_i: Some(0),
                    channels: Some(1),
                    m: Some(0),
                    w_a: Some(r.w.or(r.w_a).unwrap_or(1.0)),
                    w_i: Some(0.0),
                    w: None,
                    h: Some(h),
                    b0: None,
                    ..RawConfig::default()
                };
                let mut merged = r.merged(&over);
                merged.w = None;
                merged.b0 = None;
                merged.build().map_err(invalid)
            } else {
                r.build().map_err(invalid)
            }
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn run_sweep(
    common: &Common,
    trial: &TrialArgs,
    vary: &[String],
    seeds: u64,
    workers: Option<usize>,
    scah: bool,
    fit: bool,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    if seeds == 0 {
        return Err(invalid("--seeds must be at least 1"));
    }
    let opts = trial.options()?;
    let points = sweep_points(&common.raw()?, vary, scah)?;
    let first = common.seed.unwrap_or(0);
    let seed_list: Vec<u64> = (first..first + seeds).collect();
    let rows = sweep(&points, &seed_list, &opts, workers);
    let mut ok = Vec::with_capacity(rows.len());
    for row in rows {
        match row.outcome {
            Ok(r) => ok.push(r),
            Err(e) => {
                let _ = writeln!(stderr, "trial {} (seed {}) failed: {e}", row.trial, row.seed);
            }
        }
    }
    if fit {
        let mut by_n: std::collections::BTreeMap<u64, (f64, usize)> = Default::default();
        for r in &ok {
            let e = by_n.entry(r.n).or_default();
            e.0 += r.lambda_min;
            e.1 += 1;
        }
        let pts: Vec<(f64, f64)> = by_n.iter().map(|(&n, &(s, k))| (n as f64, s / k as f64)).collect();
        match fit_scaling(&pts) {
            Ok(f) => {
                let _ = writeln!(stderr, "fit lambda_min ~ n: slope={} intercept={} r2={}", f.slope, f.intercept, f.r2);
            }
            Err(e) => {
                let _ = writeln!(stderr, "fit skipped: {e}");
            }
        }
    }
    let table = results_table(&ok);
    let text = match common.format {
        Format::Json => table.jsonl(),
        _ => table.csv(),
    };
    emit(&text, common.out.as_deref(), stdout)
}

fn verify(
    format: Format,
    out: Option<&Path>,
    workers: Option<usize>,
    stdout: &mut dyn Write,
) -> Result<bool, CliError> {
    let run = || run_all(workers);
    let outcomes = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build().map_err(runtime)?.install(run),
        None => run(),
    };
    let text = match format {
        Format::Text => outcomes.iter().map(|o| o.line() + "\n").collect::<String>(),
        Format::Csv => {
            // details contain commas, so that column is quoted
            let mut s = String::from("id,name,passed,detail\n");
            for o in &outcomes {
                s.push_str(&format!("{},{},{},\"{}\"\n", o.id, o.name, o.passed, o.detail.replace('"', "\"\"")));
            }
            s
        }
        Format::Json => {
            let mut t = Table::new(&["id", "name", "passed", "detail"]);
            for o in &outcomes {
                t.rows.push(vec![
                    Value::from(o.id),
                    Value::from(o.name),
                    Value::from(o.passed),
                    Value::from(o.detail.clone()),
                ]);
            }
            t.jsonl()
        }
    };
    emit(&text, out, stdout)?;
    Ok(outcomes.iter().all(|o| o.passed))
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn dispatch<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ =
                if code == 0 { stdout.write_all(rendered.as_bytes()) } else { stderr.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Classify(common) => classify(common, stdout),
        Command::Bounds { common, reduce } => bounds(common, reduce.as_deref(), stdout),
        Command::Topo { common, trial, flows } => topo(common, trial, *flows, stdout),
        Command::Simulate { common, trial, schedule_out } => simulate(common, trial, schedule_out.as_deref(), stdout),
        Command::Sweep { common, trial, vary, seeds, workers, scah, fit } => {
            run_sweep(common, trial, vary, *seeds, *workers, *scah, *fit, stdout, stderr)
        }
        Command::Verify { format, out, workers } => match verify(*format, out.as_deref(), *workers, stdout) {
            Ok(true) => Ok(()),
            Ok(false) => Err(CliError::Runtime("verification failed".into())),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.code()
        }
    }
}

//! Command-line front end.
//!
//! Exit codes: 0 when every verified entry passes (or the command
//! succeeded), 1 when a verification fails or a run errors, 2 on usage
//! errors such as unknown flags or entry ids.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{self, CatalogEntry};
use crate::cycles::LimitCycle;
use crate::error::HlbError;
use crate::integrate::{flow, FlowOptions, ModeState, Trajectory};
use crate::pwsys::{
    classify_manifold_point, equilibria, fold_points, ManifoldPoint, Region, SwitchingStructure, SystemDef, Vec2,
};
use crate::scaling::{self, fit_exponents, jitter_seed, ScalingFit, SweepOptions, SweepRow, VerifyReport, SCHEMA_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "hlb", version, about = "Hopf-like bifurcations in piecewise-smooth planar systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List catalog entries with their expected exponents.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Integrate one trajectory from the entry's seed point.
    Simulate(SimulateArgs),
    /// Sweep mu and record cycle amplitude and period.
    Sweep(SweepArgs),
    /// Check fitted exponents and qualitative properties.
    Verify(VerifyArgs),
    /// Export phase-portrait data at parameter values either side of zero.
    ExportPortrait(PortraitArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub id: String,
    #[arg(long, allow_negative_numbers = true)]
    pub mu: f64,
    #[arg(long, default_value_t = 20.0)]
    pub t_end: f64,
    /// Local relative tolerance of the integrator.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub id: String,
    #[arg(long)]
    pub mu_min: Option<f64>,
    #[arg(long)]
    pub mu_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub parallel: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, required_unless_present = "all", conflicts_with = "all")]
    pub id: Vec<String>,
    #[arg(long)]
    pub all: bool,
    /// Tolerance on both exponents.
    #[arg(long, default_value_t = 0.05)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub parallel: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PortraitArgs {
    #[arg(long)]
    pub id: String,
    /// Parameter values; defaults to `-m, m` with `m` the top of the sweep grid.
    #[arg(long, allow_negative_numbers = true, num_args = 1..)]
    pub mu: Vec<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Parse and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run `hlb --help` for usage");
            EXIT_USAGE
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            EXIT_FAIL
        }
    }
}

enum Failure {
    Usage(String),
    Run(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

impl From<HlbError> for Failure {
    fn from(e: HlbError) -> Self {
        Failure::Run(e.into())
    }
}

fn lookup(id: &str) -> Result<CatalogEntry, Failure> {
    catalog::entry(id).map_err(|_| Failure::Usage(format!("unknown entry id '{id}'")))
}

fn usage(cond: bool, msg: impl Into<String>) -> Result<(), Failure> {
    if cond {
        Err(Failure::Usage(msg.into()))
    } else {
        Ok(())
    }
}

fn dispatch(cmd: Command) -> Result<i32, Failure> {
    match cmd {
        Command::List { json } => cmd_list(json),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
        Command::ExportPortrait(a) => cmd_export_portrait(a),
    }
}

fn output(path: Option<&PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_json<T: Serialize>(value: &T, path: Option<&PathBuf>) -> anyhow::Result<()> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_list(json: bool) -> Result<i32, Failure> {
    let infos: Vec<_> = catalog::entries().iter().map(|e| e.info()).collect();
    if json {
        write_json(&infos, None)?;
    } else {
        let mut w = output(None)?;
        let table = || -> io::Result<()> {
            writeln!(w, "{:<4} {:<38} {:>5} {:>5}", "id", "name", "a", "b")?;
            for i in infos {
                writeln!(w, "{:<4} {:<38} {:>5} {:>5}", i.id, i.name, i.expected_a.to_string(), i.expected_b.to_string())?;
            }
            w.flush()
        };
        // a closed pipe downstream is not an error for a listing
        if let Err(e) = table() {
            if e.kind() != io::ErrorKind::BrokenPipe {
                return Err(anyhow::Error::from(e).into());
            }
        }
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SimulationFile {
    pub schema_version: u32,
    pub entry: String,
    pub mu: f64,
    pub t_end: f64,
    pub seed: Vec2,
    pub status: String,
    pub trajectory: TrajectoryRecord,
    pub events: Vec<EventRecord>,
}

fn cmd_simulate(a: SimulateArgs) -> Result<i32, Failure> {
    let entry = lookup(&a.id)?;
    usage(!(a.t_end > 0.0), "--t-end must be positive")?;
    usage(!(a.tol > 0.0 && a.tol < 1.0), "--tol must lie in (0, 1)")?;
    let sys = entry.build(a.mu).map_err(|e| Failure::Usage(e.to_string()))?;
    let seed = jitter_seed(entry.seed_point(a.mu.abs()), a.seed, 0);
    let opts = FlowOptions { rtol: a.tol, h_max: entry.period_scale(a.mu.abs()) / 50.0, ..Default::default() };
    let traj = simulate(&sys, a.mu, seed, a.t_end, &opts)?;
    match a.format {
        Format::Json => {
            let file = SimulationFile {
                schema_version: SCHEMA_VERSION,
                entry: entry.id.into(),
                mu: a.mu,
                t_end: a.t_end,
                seed,
                status: tag(&traj.status),
                trajectory: TrajectoryRecord::from_trajectory(seed, &traj),
                events: traj.events.iter().map(|e| EventRecord::new(0, e)).collect(),
            };
            write_json(&file, a.out.as_ref())?;
        }
        Format::Csv => {
            let mut w = output(a.out.as_ref())?;
            writeln!(w, "# schema_version={SCHEMA_VERSION}").map_err(anyhow::Error::from)?;
            let mut c = csv::Writer::from_writer(w);
            for s in &traj.samples {
                c.serialize(s).map_err(anyhow::Error::from)?;
            }
            c.flush().map_err(anyhow::Error::from)?;
        }
    }
    Ok(EXIT_OK)
}

fn simulate(sys: &SystemDef, mu: f64, seed: Vec2, t_end: f64, opts: &FlowOptions) -> anyhow::Result<Trajectory> {
    let init = ModeState::initial(sys, seed[0], seed[1], mu)?;
    Ok(flow(sys, &init, mu, t_end, opts)?)
}

/// Sweep output in JSON form.
#[derive(Debug, Serialize, Deserialize)]
pub struct SweepFile {
    pub schema_version: u32,
    pub entry: String,
    pub rows: Vec<SweepRow>,
    pub fit: Option<ScalingFit>,
}

fn cmd_sweep(a: SweepArgs) -> Result<i32, Failure> {
    let entry = lookup(&a.id)?;
    let (lo, hi, n) = entry.mu_sweep;
    let (lo, hi, n) = (a.mu_min.unwrap_or(lo), a.mu_max.unwrap_or(hi), a.points.unwrap_or(n));
    usage(!(lo > 0.0 && hi >= lo), "need 0 < --mu-min <= --mu-max")?;
    usage(n == 0 || (n > 1 && hi == lo), "--points must be positive, and 1 when --mu-min equals --mu-max")?;
    usage(hi > entry.mu_range.1, format!("--mu-max exceeds {} for entry {}", entry.mu_range.1, entry.id))?;
    let grid = catalog::log_grid(lo, hi, n);
    let rows = scaling::sweep_mu(&entry, &grid, SweepOptions { parallel: a.parallel, rng_seed: a.seed })?;
    match a.format {
        Format::Csv => {
            scaling::write_csv(&rows, output(a.out.as_ref())?)?;
        }
        Format::Json => {
            let file =
                SweepFile { schema_version: SCHEMA_VERSION, entry: entry.id.into(), fit: fit_exponents(&rows).ok(), rows };
            write_json(&file, a.out.as_ref())?;
        }
    }
    Ok(EXIT_OK)
}

/// Verification output.
#[derive(Debug, Serialize, Deserialize)]
pub struct VerifyFile {
    pub schema_version: u32,
    pub tol_a: f64,
    pub tol_b: f64,
    pub pass: bool,
    pub reports: Vec<VerifyReport>,
}

fn cmd_verify(a: VerifyArgs) -> Result<i32, Failure> {
    usage(!(a.tol > 0.0), "--tol must be positive")?;
    let entries: Vec<CatalogEntry> =
        if a.all { catalog::entries() } else { a.id.iter().map(|id| lookup(id)).collect::<Result<_, _>>()? };
    let opts = SweepOptions { parallel: false, rng_seed: a.seed };
    let job = |e: &CatalogEntry| scaling::verify_entry(e.id, a.tol, a.tol, opts);
    let reports: Vec<VerifyReport> = if a.parallel {
        entries.par_iter().map(job).collect::<Result<_, _>>()?
    } else {
        entries.iter().map(job).collect::<Result<_, _>>()?
    };
    for r in &reports {
        eprintln!("{} {:<4} {}", if r.pass { "PASS" } else { "FAIL" }, r.id, r.name);
        for c in r.criteria.iter().filter(|c| !c.pass) {
            eprintln!("       {}: {}", c.name, c.detail);
        }
    }
    let pass = reports.iter().all(|r| r.pass);
    let file = VerifyFile { schema_version: SCHEMA_VERSION, tol_a: a.tol, tol_b: a.tol, pass, reports };
    write_json(&file, a.out.as_ref())?;
    Ok(if pass { EXIT_OK } else { EXIT_FAIL })
}

/// Portrait export: one record per parameter value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PortraitFile {
    pub schema_version: u32,
    pub entry: EntrySummary,
    pub records: Vec<PortraitRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntrySummary {
    pub id: String,
    pub name: String,
    pub a: f64,
    pub b: f64,
    pub switching: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PortraitRecord {
    pub entry: String,
    pub mu: f64,
    pub trajectories: Vec<TrajectoryRecord>,
    pub events: Vec<EventRecord>,
    pub equilibria: Vec<EquilibriumRecord>,
    pub folds: Vec<FoldRecord>,
    pub sliding_regions: Vec<SlidingRegion>,
    pub cycle: Option<CycleRecord>,
}

/// Column-oriented samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: Vec2,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub piece: Vec<usize>,
    pub sliding: Vec<bool>,
}

impl TrajectoryRecord {
    pub fn from_trajectory(seed: Vec2, traj: &Trajectory) -> Self {
        let s = &traj.samples;
        TrajectoryRecord {
            seed,
            t: s.iter().map(|p| p.t).collect(),
            x: s.iter().map(|p| p.x).collect(),
            y: s.iter().map(|p| p.y).collect(),
            piece: s.iter().map(|p| p.piece).collect(),
            sliding: s.iter().map(|p| p.sliding).collect(),
        }
    }

    pub fn is_ragged(&self) -> bool {
        let n = self.t.len();
        self.x.len() != n || self.y.len() != n || self.piece.len() != n || self.sliding.len() != n
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventRecord {
    /// Index into `trajectories`, or -1 for the cycle.
    pub trajectory: i64,
    pub t: f64,
    pub kind: String,
    pub x: f64,
    pub y: f64,
}

impl EventRecord {
    fn new(trajectory: i64, e: &crate::integrate::Event) -> Self {
        EventRecord { trajectory, t: e.t, kind: tag(&e.kind), x: e.location[0], y: e.location[1] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumRecord {
    pub piece: usize,
    pub x: f64,
    pub y: f64,
    pub kind: String,
    pub admissibility: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldRecord {
    pub piece: usize,
    pub x: f64,
    pub y: f64,
    pub visibility: String,
}

/// Interval `y_min <= y <= y_max` of `x = 0` with sliding of the given kind.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlidingRegion {
    pub kind: String,
    pub y_min: f64,
    pub y_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CycleRecord {
    pub period: f64,
    pub amplitude: f64,
    pub x_max: f64,
    pub multiplier: f64,
    pub stable: bool,
    pub converged: bool,
    /// The cycle contains a sliding segment.
    pub sliding_segment: bool,
    pub orbit: TrajectoryRecord,
    pub events: Vec<EventRecord>,
}

impl CycleRecord {
    fn new(c: &LimitCycle) -> Self {
        let orbit = TrajectoryRecord {
            seed: c.point,
            t: c.samples.iter().map(|p| p.t).collect(),
            x: c.samples.iter().map(|p| p.x).collect(),
            y: c.samples.iter().map(|p| p.y).collect(),
            piece: c.samples.iter().map(|p| p.piece).collect(),
            sliding: c.samples.iter().map(|p| p.sliding).collect(),
        };
        CycleRecord {
            period: c.period,
            amplitude: c.amplitude,
            x_max: c.x_max,
            multiplier: c.multiplier,
            stable: c.is_stable(),
            converged: c.converged,
            sliding_segment: c.has_sliding(),
            orbit,
            events: c.events.iter().map(|e| EventRecord::new(-1, e)).collect(),
        }
    }
}

fn tag<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

/// Attracting and repelling sliding intervals of `x = 0` within `window`.
pub fn sliding_regions(sys: &SystemDef, mu: f64, window: (f64, f64), n: usize) -> Vec<SlidingRegion> {
    if !matches!(sys.switching(), SwitchingStructure::Filippov) {
        return Vec::new();
    }
    let mut out: Vec<SlidingRegion> = Vec::new();
    let mut open: Option<(ManifoldPoint, f64, f64)> = None;
    for k in 0..n {
        let y = window.0 + (window.1 - window.0) * k as f64 / (n - 1) as f64;
        let kind = classify_manifold_point(sys, y, mu).ok();
        let sliding =
            kind.filter(|p| matches!(p, ManifoldPoint::AttractingSliding | ManifoldPoint::RepellingSliding));
        open = match (open, sliding) {
            (Some((p, lo, _)), Some(q)) if p == q => Some((p, lo, y)),
            (prev, next) => {
                if let Some((p, lo, hi)) = prev {
                    out.push(SlidingRegion { kind: tag(&p), y_min: lo, y_max: hi });
                }
                next.map(|q| (q, y, y))
            }
        };
    }
    if let Some((p, lo, hi)) = open {
        out.push(SlidingRegion { kind: tag(&p), y_min: lo, y_max: hi });
    }
    out
}

/// Portrait record of `entry` at `mu`.
pub fn portrait_record(entry: &CatalogEntry, mu: f64, t_end: Option<f64>, rng_seed: Option<u64>) -> anyhow::Result<PortraitRecord> {
    let sys = entry.build(mu)?;
    let m = mu.abs();
    let cycle = if mu > 0.0 { scaling::compute_cycle(entry, mu, jitter_seed(entry.seed_point(mu), rng_seed, 0).into()).ok() } else { None };
    let scale = cycle.as_ref().map(|c| c.amplitude).unwrap_or_else(|| entry.seed_point(m)[0].hypot(entry.seed_point(m)[1]));
    let half = 3.0 * scale.max(1e-12);

    // seeds inside and outside the cycle's scale
    let base = entry.seed_point(m);
    let t_end = t_end.unwrap_or_else(|| 10.0 * entry.period_scale(m));
    let opts = FlowOptions { h_max: entry.period_scale(m) / 50.0, ..Default::default() };
    let mut trajectories = Vec::new();
    let mut events = Vec::new();
    for (i, f) in [0.3, 2.0].into_iter().enumerate() {
        let seed = jitter_seed([base[0] * f, base[1] * f], rng_seed, i + 1);
        let Ok(traj) = simulate(&sys, mu, seed, t_end, &opts) else { continue };
        let idx = trajectories.len() as i64;
        events.extend(traj.events.iter().map(|e| EventRecord::new(idx, e)));
        trajectories.push(TrajectoryRecord::from_trajectory(seed, &traj));
    }

    let equilibria = (0..sys.pieces().len())
        .filter_map(|i| equilibria(&sys, i, mu).ok())
        .flatten()
        .map(|e| EquilibriumRecord {
            piece: e.piece_id,
            x: e.location[0],
            y: e.location[1],
            kind: tag(&e.kind),
            admissibility: tag(&e.admissibility),
        })
        .collect();

    let folds = if matches!(sys.switching(), SwitchingStructure::Continuous) {
        Vec::new()
    } else {
        (0..sys.pieces().len())
            .filter(|&i| matches!(sys.pieces()[i].region(), Region::Left | Region::Right))
            .filter_map(|i| fold_points(&sys, i, mu, (-half, half)).ok())
            .flatten()
            .map(|f| FoldRecord { piece: f.piece_id, x: f.location[0], y: f.location[1], visibility: tag(&f.visibility) })
            .collect()
    };

    Ok(PortraitRecord {
        entry: entry.id.into(),
        mu,
        trajectories,
        events,
        equilibria,
        folds,
        sliding_regions: sliding_regions(&sys, mu, (-half, half), 2001),
        cycle: cycle.as_ref().map(CycleRecord::new),
    })
}

fn cmd_export_portrait(a: PortraitArgs) -> Result<i32, Failure> {
    let entry = lookup(&a.id)?;
    let mus = if a.mu.is_empty() { vec![-entry.mu_sweep.1, entry.mu_sweep.1] } else { a.mu.clone() };
    for &m in &mus {
        usage(
            !(m >= entry.mu_range.0 && m <= entry.mu_range.1) || m == 0.0,
            format!("mu = {m} must be nonzero and within [{}, {}]", entry.mu_range.0, entry.mu_range.1),
        )?;
    }
    usage(a.t_end.is_some_and(|t| !(t > 0.0)), "--t-end must be positive")?;
    let records = mus.iter().map(|&m| portrait_record(&entry, m, a.t_end, a.seed)).collect::<anyhow::Result<Vec<_>>>()?;
    let file = PortraitFile {
        schema_version: SCHEMA_VERSION,
        entry: EntrySummary {
            id: entry.id.into(),
            name: entry.name.into(),
            a: entry.expected_a.value(),
            b: entry.expected_b.value(),
            switching: entry.build(mus[0])?.switching().label().into(),
        },
        records,
    };
    let mut w = output(a.out.as_ref())?;
    serde_json::to_writer(&mut w, &file).map_err(anyhow::Error::from)?;
    writeln!(w).and_then(|_| w.flush()).map_err(anyhow::Error::from)?;
    Ok(EXIT_OK)
}

/// Check a parsed portrait document against the documented layout.
pub fn validate_portrait(v: &serde_json::Value) -> Result<PortraitFile, String> {
    let version = v.get("schema_version").and_then(|s| s.as_u64()).ok_or("missing field schema_version")?;
    if version != SCHEMA_VERSION as u64 {
        return Err(format!("unsupported schema_version {version}"));
    }
    let records = v.get("records").and_then(|r| r.as_array()).ok_or("missing field records")?;
    for (i, r) in records.iter().enumerate() {
        for key in ["entry", "mu", "trajectories", "events", "equilibria", "folds", "sliding_regions", "cycle"] {
            if r.get(key).is_none() {
                return Err(format!("records[{i}]: missing field {key}"));
            }
        }
    }
    let file: PortraitFile = serde_json::from_value(v.clone()).map_err(|e| e.to_string())?;
    for (i, r) in file.records.iter().enumerate() {
        if let Some(j) = r.trajectories.iter().position(|t| t.is_ragged()) {
            return Err(format!("records[{i}].trajectories[{j}]: ragged arrays"));
        }
        if r.cycle.as_ref().is_some_and(|c| c.orbit.is_ragged()) {
            return Err(format!("records[{i}].cycle.orbit: ragged arrays"));
        }
    }
    Ok(file)
}

//! Parameter sweeps, power-law fits and verification of the catalog's
//! scaling exponents.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{self, CatalogEntry};
use crate::cycles::{find_limit_cycle, settle, CycleOptions, LimitCycle};
use crate::error::{HlbError, Result};
use crate::integrate::FlowOptions;
use crate::pwsys::Vec2;

pub const SCHEMA_VERSION: u32 = 1;

/// Minimum fraction of converged rows for a fit to proceed.
const MIN_CONVERGED_FRACTION: f64 = 0.75;

/// One sweep sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mu: f64,
    pub amplitude: f64,
    pub period: f64,
    pub x_max: f64,
    pub multiplier: f64,
    pub converged: bool,
}

impl SweepRow {
    fn failed(mu: f64) -> Self {
        SweepRow { mu, amplitude: f64::NAN, period: f64::NAN, x_max: f64::NAN, multiplier: f64::NAN, converged: false }
    }

    fn from_cycle(c: &LimitCycle) -> Self {
        SweepRow {
            mu: c.mu,
            amplitude: c.amplitude,
            period: c.period,
            x_max: c.x_max,
            multiplier: c.multiplier,
            converged: c.converged && c.amplitude > 0.0 && c.period > 0.0,
        }
    }
}

/// Log-log least-squares fits of amplitude and period against `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub a_hat: f64,
    pub k1: f64,
    pub b_hat: f64,
    pub k2: f64,
    pub r2_amp: f64,
    pub r2_per: f64,
    pub n_points: usize,
}

/// Power law `value = k * mu^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub k: f64,
    pub r2: f64,
}

/// Least-squares line through `(ln mu, ln value)`.
pub fn fit_power(mu: &[f64], value: &[f64]) -> Result<PowerFit> {
    if mu.len() != value.len() || mu.len() < 2 {
        return Err(HlbError::Domain("power fit needs at least two paired samples".into()));
    }
    if mu.iter().chain(value).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(HlbError::Domain("power fit needs positive finite samples".into()));
    }
    let xs: Vec<f64> = mu.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = value.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(HlbError::Domain("power fit needs distinct mu values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    // a constant series is fitted exactly by a flat line
    let r2 = if syy <= f64::EPSILON * n { 1.0 } else { 1.0 - sse / syy };
    Ok(PowerFit { exponent: slope, k: intercept.exp(), r2 })
}

/// Fit amplitude and period exponents from the converged rows.
pub fn fit_exponents(rows: &[SweepRow]) -> Result<ScalingFit> {
    let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.converged).collect();
    if ok.len() < 4 {
        return Err(HlbError::Domain(format!("fit needs at least 4 converged rows, got {}", ok.len())));
    }
    let (lo, hi) = ok.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.mu), hi.max(r.mu)));
    if (hi / lo).log10() < 1.5 - 1e-9 {
        return Err(HlbError::Domain(format!("fit needs rows spanning 1.5 decades, got [{lo:e}, {hi:e}]")));
    }
    let mu: Vec<f64> = ok.iter().map(|r| r.mu).collect();
    let amp = fit_power(&mu, &ok.iter().map(|r| r.amplitude).collect::<Vec<_>>())?;
    let per = fit_power(&mu, &ok.iter().map(|r| r.period).collect::<Vec<_>>())?;
    Ok(ScalingFit {
        a_hat: amp.exponent,
        k1: amp.k,
        b_hat: per.exponent,
        k2: per.k,
        r2_amp: amp.r2,
        r2_per: per.r2,
        n_points: ok.len(),
    })
}

/// Cycle-search options sized to the entry's time scale at `mu`.
pub fn cycle_options(entry: &CatalogEntry, mu: f64) -> CycleOptions {
    let t = entry.period_scale(mu);
    CycleOptions {
        flow: FlowOptions { record_samples: false, h_max: t / 50.0, zeno_span: 1e-6 * t.min(1.0), ..Default::default() },
        t_return_max: 50.0 * t,
        ..Default::default()
    }
}

/// Settle-run length for the entry at `mu`.
pub fn settle_time(entry: &CatalogEntry, mu: f64) -> f64 {
    (40.0 * entry.period_scale(mu)).min(200.0)
}

/// Limit cycle of `entry` at `mu`, settling from `seed` (default: the
/// entry's seed point).
pub fn compute_cycle(entry: &CatalogEntry, mu: f64, seed: Option<Vec2>) -> Result<LimitCycle> {
    let sys = entry.build(mu)?;
    let section = entry.section(mu);
    let opts = cycle_options(entry, mu);
    let seed = seed.unwrap_or_else(|| entry.seed_point(mu));
    let start = settle(&sys, mu, &section, seed, settle_time(entry, mu), &opts)?;
    find_limit_cycle(&sys, mu, &section, &start, &opts)
}

/// Sweep configuration.
#[derive(Debug, Clone, Copy, Default)]
pub struct SweepOptions {
    /// Solve rows concurrently; disables warm starts.
    pub parallel: bool,
    /// Relative jitter of up to 1% applied to settle seeds.
    pub rng_seed: Option<u64>,
}

/// Seed point scaled by a reproducible factor in `[0.99, 1.01]`.
pub fn jitter_seed(seed: Vec2, rng_seed: Option<u64>, index: usize) -> Vec2 {
    match rng_seed {
        None => seed,
        Some(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(s.wrapping_add(index as u64));
            let f = 1.0 + 0.01 * rng.gen_range(-1.0..=1.0);
            [seed[0] * f, seed[1] * f]
        }
    }
}

/// Cycles over `grid`, one result per point, sorted by `mu`.
pub fn sweep_cycles(entry: &CatalogEntry, grid: &[f64], opts: SweepOptions) -> Result<Vec<Result<LimitCycle>>> {
    if grid.is_empty() || grid.iter().any(|m| !(*m > 0.0)) {
        return Err(HlbError::Domain("mu grid must be non-empty and positive".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HlbError::Domain("mu grid must be strictly ascending".into()));
    }
    let solve = |i: usize, seed: Option<Vec2>| {
        let mu = grid[i];
        let seed = jitter_seed(seed.unwrap_or_else(|| entry.seed_point(mu)), opts.rng_seed, i);
        compute_cycle(entry, mu, Some(seed))
    };
    if opts.parallel {
        return Ok((0..grid.len()).into_par_iter().map(|i| solve(i, None)).collect());
    }
    let a = entry.expected_a.value();
    let mut out: Vec<Result<LimitCycle>> = Vec::with_capacity(grid.len());
    for (i, &mu) in grid.iter().enumerate() {
        let warm = match out.last() {
            Some(Ok(prev)) if prev.converged => {
                let f = (mu / prev.mu).powf(a);
                Some([prev.point[0] * f, prev.point[1] * f])
            }
            _ => None,
        };
        let res = match warm {
            Some(w) => solve(i, Some(w)).or_else(|_| solve(i, None)),
            None => solve(i, None),
        };
        out.push(res);
    }
    Ok(out)
}

/// One row per grid point; non-converged rows are kept and flagged.
pub fn sweep_mu(entry: &CatalogEntry, grid: &[f64], opts: SweepOptions) -> Result<Vec<SweepRow>> {
    let cycles = sweep_cycles(entry, grid, opts)?;
    let rows: Vec<SweepRow> = cycles
        .iter()
        .zip(grid)
        .map(|(c, &mu)| c.as_ref().map(SweepRow::from_cycle).unwrap_or_else(|_| SweepRow::failed(mu)))
        .collect();
    if rows.iter().all(|r| !r.converged) {
        let why = cycles.into_iter().find_map(|c| c.err()).map(|e| e.to_string()).unwrap_or_default();
        return Err(HlbError::SweepFailed(format!("entry {}: no row converged ({why})", entry.id)));
    }
    Ok(rows)
}

const CSV_HEADER: [&str; 6] = ["mu", "amplitude", "period", "x_max", "multiplier", "converged"];

/// Write rows as headered CSV preceded by a schema comment line.
pub fn write_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "# schema_version={SCHEMA_VERSION}")?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER).map_err(|e| HlbError::Io(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| HlbError::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Parse CSV produced by [`write_csv`].
pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let header = r.headers().map_err(|e| HlbError::Io(e.to_string()))?.clone();
    if header.len() != 6 {
        return Err(HlbError::Io(format!("expected 6 columns, found {}", header.len())));
    }
    r.deserialize().map(|row| row.map_err(|e| HlbError::Io(e.to_string()))).collect()
}

/// One pass/fail line of a verification report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Expected {
    pub a: f64,
    pub b: f64,
    pub a_exact: String,
    pub b_exact: String,
}

/// Verification of one catalog entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub id: String,
    pub name: String,
    pub expected: Expected,
    pub tol_a: f64,
    pub tol_b: f64,
    pub fit: Option<ScalingFit>,
    pub x_max_fit: Option<PowerFit>,
    pub n_converged: usize,
    pub rows: Vec<SweepRow>,
    pub criteria: Vec<Criterion>,
    pub pass: bool,
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

/// Entries whose `x_max` law is part of verification: `(id, exponent, tol)`.
const X_MAX_LAWS: &[(&str, f64, f64)] = &[("20", 2.0, 0.1)];

/// Sweep the default grid, fit, and run the qualitative checks.
///
/// Failures of the sweep are reported as failing criteria.
pub fn verify_entry(id: &str, tol_a: f64, tol_b: f64, opts: SweepOptions) -> Result<VerifyReport> {
    let entry = catalog::entry(id)?;
    let grid = entry.default_grid();
    let cycles = sweep_cycles(&entry, &grid, opts)?;
    let rows: Vec<SweepRow> = cycles
        .iter()
        .zip(&grid)
        .map(|(c, &mu)| c.as_ref().map(SweepRow::from_cycle).unwrap_or_else(|_| SweepRow::failed(mu)))
        .collect();
    let n_converged = rows.iter().filter(|r| r.converged).count();
    let mut criteria = Vec::new();
    let mut push = |name: String, pass: bool, detail: String| criteria.push(Criterion { name, pass, detail });

    let enough = n_converged as f64 >= MIN_CONVERGED_FRACTION * rows.len() as f64;
    let first_error = cycles.iter().find_map(|c| c.as_ref().err()).map(|e| e.to_string());
    push(
        "converged rows".into(),
        enough,
        format!("{n_converged}/{}{}", rows.len(), first_error.map(|e| format!(" (first error: {e})")).unwrap_or_default()),
    );

    let fit = if enough { fit_exponents(&rows).ok() } else { None };
    let (ea, eb) = (entry.expected_a.value(), entry.expected_b.value());
    match fit {
        Some(f) => {
            push(
                format!("amplitude exponent {}", entry.expected_a),
                (f.a_hat - ea).abs() <= tol_a,
                format!("a_hat = {:.4} (r2 {:.6})", f.a_hat, f.r2_amp),
            );
            push(
                format!("period exponent {}", entry.expected_b),
                (f.b_hat - eb).abs() <= tol_b,
                format!("b_hat = {:.4} (r2 {:.6})", f.b_hat, f.r2_per),
            );
        }
        None => {
            push(format!("amplitude exponent {}", entry.expected_a), false, "no fit".into());
            push(format!("period exponent {}", entry.expected_b), false, "no fit".into());
        }
    }

    let mut x_max_fit = None;
    for &(_, exponent, tol) in X_MAX_LAWS.iter().filter(|l| l.0 == entry.id) {
        let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.converged && r.x_max > 0.0).collect();
        let mu: Vec<f64> = ok.iter().map(|r| r.mu).collect();
        let xm: Vec<f64> = ok.iter().map(|r| r.x_max).collect();
        x_max_fit = if enough { fit_power(&mu, &xm).ok() } else { None };
        let (pass, detail) = match x_max_fit {
            Some(f) => ((f.exponent - exponent).abs() <= tol, format!("exponent = {:.4} (r2 {:.6})", f.exponent, f.r2)),
            None => (false, "no fit".into()),
        };
        push(format!("x_max exponent {exponent}"), pass, detail);
    }

    let conv: Vec<&SweepRow> = rows.iter().filter(|r| r.converged).collect();
    let monotone = conv.windows(2).all(|w| w[1].amplitude >= w[0].amplitude);
    push("amplitude nondecreasing in mu".into(), monotone && !conv.is_empty(), format!("{} rows", conv.len()));

    // qualitative checks on the cycle nearest the middle of the grid
    let mid = grid.len() / 2;
    let probe = (0..grid.len())
        .map(|k| if k % 2 == 0 { mid + k / 2 } else { mid.wrapping_sub(k / 2 + 1) })
        .filter(|&i| i < grid.len())
        .find_map(|i| cycles[i].as_ref().ok());
    for check in entry.checks {
        let (pass, detail) = match probe {
            Some(c) => match entry.build(c.mu) {
                Ok(sys) => {
                    let (p, d) = check.evaluate(&sys, c);
                    (p, format!("mu = {:e}: {d}", c.mu))
                }
                Err(e) => (false, e.to_string()),
            },
            None => (false, "no cycle".into()),
        };
        push(check.name().into(), pass, detail);
    }

    let pass = criteria.iter().all(|c| c.pass);
    Ok(VerifyReport {
        schema_version: SCHEMA_VERSION,
        id: entry.id.into(),
        name: entry.name.into(),
        expected: Expected {
            a: round4(ea),
            b: round4(eb),
            a_exact: entry.expected_a.to_string(),
            b_exact: entry.expected_b.to_string(),
        },
        tol_a,
        tol_b,
        fit,
        x_max_fit,
        n_converged,
        rows,
        criteria,
        pass,
    })
}

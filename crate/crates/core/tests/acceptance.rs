//! One PASS/FAIL line per acceptance criterion; exits nonzero on any failure.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use hlb::catalog::{self, build_1_flipped, entries, entry};
use hlb::integrate::{flow, sliding_weight, EventKind, FlowOptions, ModeState};
use hlb::pwsys::{alpha_criticality, Eigen, SystemDef};
use hlb::scaling::{compute_cycle, settle_time, verify_entry, SweepOptions, VerifyReport};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn focus_alpha(sys: &SystemDef, mu: f64) -> Result<f64, String> {
    let eig = |p: usize| match Eigen::of(sys.pieces()[p].jacobian(0.0, 0.0, mu)) {
        Eigen::Complex { re, im } => Ok((re, im.abs())),
        other => Err(format!("piece {p} is not a focus: {other:?}")),
    };
    let (ll, wl) = eig(0)?;
    let (lr, wr) = eig(1)?;
    alpha_criticality(ll, wl, lr, wr).map_err(|e| e.to_string())
}

fn table_exponents(reports: &BTreeMap<String, VerifyReport>, secs: f64) -> Outcome {
    let mut bad = Vec::new();
    for r in reports.values() {
        let (a, b) = catalog::expected_exponents(&r.id).map_err(|e| e.to_string())?;
        let ok = r
            .fit
            .as_ref()
            .is_some_and(|f| (f.a_hat - a.value()).abs() <= 0.05 && (f.b_hat - b.value()).abs() <= 0.05);
        if !ok || !r.pass {
            bad.push(r.id.clone());
        }
    }
    check(
        bad.is_empty() && reports.len() == 21 && secs <= 600.0,
        format!("{} entries, failing {bad:?}, {secs:.1} s", reports.len()),
    )
}

fn hopf_baseline(reports: &BTreeMap<String, VerifyReport>) -> Outcome {
    let a = reports["H"].fit.as_ref().ok_or("no fit")?.a_hat;
    let c = compute_cycle(&entry("H").unwrap(), 1e-4, None).map_err(|e| e.to_string())?;
    let rel = (c.period / (2.0 * std::f64::consts::PI) - 1.0).abs();
    check((a - 0.5).abs() <= 0.02 && rel < 0.01, format!("a_hat {a:.4}, period error {rel:.2e}"))
}

fn criticality() -> Outcome {
    let mu = 1e-3;
    let e = entry("1").unwrap();
    let sys = e.build(mu).map_err(|x| x.to_string())?;
    let alpha = focus_alpha(&sys, mu)?;
    let c = compute_cycle(&e, mu, None).map_err(|x| x.to_string())?;

    let flipped = build_1_flipped(mu).map_err(|x| x.to_string())?;
    let alpha_flip = focus_alpha(&flipped, mu)?;
    let z0 = e.seed_point(mu);
    let init = ModeState::initial(&flipped, z0[0], z0[1], mu).map_err(|x| x.to_string())?;
    let tr = flow(&flipped, &init, mu, settle_time(&e, mu), &FlowOptions::default()).map_err(|x| x.to_string())?;
    let r_max = tr.samples.iter().map(|s| s.x.hypot(s.y)).fold(0.0, f64::max);
    check(
        alpha < 0.0 && c.converged && c.multiplier > 0.0 && c.multiplier < 1.0 && alpha_flip > 0.0 && r_max > 10.0 * mu,
        format!(
            "alpha {alpha:.4}, multiplier {:.4}; flipped alpha {alpha_flip:.4}, max radius {:.1} mu",
            c.multiplier,
            r_max / mu
        ),
    )
}

fn homogeneity() -> Outcome {
    let mut worst: f64 = 0.0;
    for id in ["1", "2", "3", "4", "11", "12", "13"] {
        let e = entry(id).unwrap();
        for mu in [1e-4, 1e-3, 1e-2] {
            let c1 = compute_cycle(&e, mu, None).map_err(|x| format!("{id}: {x}"))?;
            let c2 = compute_cycle(&e, 2.0 * mu, None).map_err(|x| format!("{id}: {x}"))?;
            if !(c1.converged && c2.converged) {
                return Err(format!("{id} at {mu}: not converged"));
            }
            worst = worst.max((c2.amplitude / c1.amplitude / 2.0 - 1.0).abs());
            worst = worst.max((c2.period / c1.period - 1.0).abs());
        }
    }
    check(worst <= 1e-4, format!("worst relative error {worst:.2e}"))
}

fn sliding_correctness() -> Outcome {
    let e = entry("3").unwrap();
    let grid = e.default_grid();
    let mu = grid[grid.len() / 2];
    let sys = e.build(mu).map_err(|x| x.to_string())?;
    let c = compute_cycle(&e, mu, None).map_err(|x| x.to_string())?;
    let (mut n_slide, mut bad) = (0, 0);
    let mut x_other = f64::NEG_INFINITY;
    for s in &c.samples {
        if s.sliding {
            n_slide += 1;
            let lam = sliding_weight(&sys, s.y, mu);
            if s.x.abs() > 1e-10 || !(0.0..=1.0).contains(&lam) {
                bad += 1;
            }
        } else {
            x_other = x_other.max(s.x);
        }
    }
    check(
        n_slide > 0 && bad == 0 && x_other < 1e-10,
        format!("{n_slide} sliding samples, {bad} violations, max x off the manifold {x_other:.2e}"),
    )
}

fn cube_root(reports: &BTreeMap<String, VerifyReport>) -> Outcome {
    let f = reports["17"].fit.as_ref().ok_or("no fit")?;
    let third = 1.0 / 3.0;
    check(
        (f.a_hat - third).abs() <= 0.05 && (f.b_hat - third).abs() <= 0.05,
        format!("a_hat {:.4}, b_hat {:.4}", f.a_hat, f.b_hat),
    )
}

fn penetration(reports: &BTreeMap<String, VerifyReport>) -> Outcome {
    let r = &reports["20"];
    let xm = r.x_max_fit.as_ref().ok_or("no x_max fit")?.exponent;
    let a = r.fit.as_ref().ok_or("no fit")?.a_hat;
    check((xm - 2.0).abs() <= 0.1 && (a - 1.0).abs() <= 0.05, format!("x_max exponent {xm:.4}, a_hat {a:.4}"))
}

fn oracle_equivalence() -> Outcome {
    let mu = 1e-3;
    let mut worst = (0.0, String::new());
    for e in entries() {
        let sys = e.build(mu).map_err(|x| x.to_string())?;
        let z0 = e.seed_point(mu);
        let init = ModeState::initial(&sys, z0[0], z0[1], mu).map_err(|x| x.to_string())?;
        let opts = FlowOptions { rtol: 1e-12, atol: 1e-15, h_max: 1e-2, record_samples: false, ..Default::default() };
        let lib = flow(&sys, &init, mu, 20.0, &opts).map_err(|x| format!("{}: {x}", e.id))?.final_state.point();
        let r = common::reference_final(&sys, mu, z0, 20.0, 1e-5);
        let err = (lib[0] - r[0]).hypot(lib[1] - r[1]);
        if err >= worst.0 {
            worst = (err, e.id.to_string());
        }
    }
    check(worst.0 <= 1e-6, format!("worst final-state error {:.2e} (entry {})", worst.0, worst.1))
}

/// Linear interpolation of `x` at time `t` from time-ordered samples.
fn x_at(ts: &[f64], xs: &[f64], t: f64) -> f64 {
    let i = ts.partition_point(|&s| s <= t).clamp(1, ts.len() - 1);
    let w = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
    xs[i - 1] + w * (xs[i] - xs[i - 1])
}

fn delay_semantics() -> Outcome {
    let mut details = Vec::new();
    let mut total_bad = 0;
    for id in ["16", "18"] {
        let e = entry(id).unwrap();
        let grid = e.default_grid();
        let mu = grid[grid.len() / 2];
        let sys = e.build(mu).map_err(|x| x.to_string())?;
        let z0 = e.seed_point(mu);
        let init = ModeState::initial(&sys, z0[0], z0[1], mu).map_err(|x| x.to_string())?;
        let t_end = 6.0 * e.period_scale(mu);
        let opts = FlowOptions { h_max: e.period_scale(mu) / 200.0, dense_samples: 8, ..Default::default() };
        let tr = flow(&sys, &init, mu, t_end, &opts).map_err(|x| x.to_string())?;
        let mut ts: Vec<f64> = Vec::new();
        let mut xs: Vec<f64> = Vec::new();
        for s in &tr.samples {
            if ts.last().is_none_or(|&t| s.t > t) {
                ts.push(s.t);
                xs.push(s.x);
            }
        }
        let switches: Vec<(f64, usize)> = tr
            .events
            .iter()
            .filter(|ev| ev.kind == EventKind::DelayedSwitch)
            .map(|ev| (ev.t, ev.piece_after))
            .collect();
        let (mut bad, mut checked) = (0, 0);
        let n = 1000;
        for k in 0..n {
            let t = mu + (t_end - mu) * (k as f64 + 0.5) / n as f64;
            let active = switches.iter().take_while(|s| s.0 <= t).last().map_or(init.piece, |s| s.1);
            let x = x_at(&ts, &xs, t - mu);
            if x.abs() < 1e-12 {
                continue;
            }
            checked += 1;
            let region = if x > 0.0 { 1 } else { 0 };
            if region != active {
                bad += 1;
            }
        }
        total_bad += bad;
        details.push(format!("{id}: {bad}/{checked} violations, {} switches", switches.len()));
    }
    check(total_bad == 0, details.join("; "))
}

fn no_secondary(root: &Path) -> Outcome {
    let found: Vec<String> = std::fs::read_dir(root.join("crates"))
        .map_err(|e| e.to_string())?
        .filter_map(|d| d.ok())
        .map(|d| d.file_name().to_string_lossy().into_owned())
        .chain(root.join("plotkit").exists().then(|| "plotkit".to_string()))
        .filter(|n| n.contains("plotkit"))
        .collect();
    check(found.is_empty(), format!("workspace members: no plotting component ({found:?})"))
}

fn main() -> ExitCode {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let start = Instant::now();
    let reports: BTreeMap<String, VerifyReport> = catalog::list_entries()
        .into_iter()
        .filter_map(|(id, ..)| verify_entry(id, 0.05, 0.05, SweepOptions::default()).ok().map(|r| (id.to_string(), r)))
        .collect();
    let secs = start.elapsed().as_secs_f64();

    let results: Vec<(&str, Outcome)> = vec![
        ("catalog exponents", table_exponents(&reports, secs)),
        ("hopf baseline", hopf_baseline(&reports)),
        ("criticality alpha < 0", criticality()),
        ("piecewise-linear homogeneity", homogeneity()),
        ("sliding correctness", sliding_correctness()),
        ("entry 17 cube-root law", cube_root(&reports)),
        ("entry 20 penetration law", penetration(&reports)),
        ("integrator oracle equivalence", oracle_equivalence()),
        ("delay semantics", delay_semantics()),
        ("no secondary component", no_secondary(&root)),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(d) => println!("PASS {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d}")
            }
        }
    }
    println!("{} of {} acceptance criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

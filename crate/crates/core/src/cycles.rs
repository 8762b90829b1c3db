//! Poincaré sections, return maps and limit cycles.
//!
//! A return map is evaluated from a *template* mode state: the discrete part
//! of the state (active piece, hysteresis branch, pending delayed switches)
//! is taken from a previous section crossing, and only the point on the
//! section varies. This makes return maps well defined for systems with
//! memory, where a point alone does not determine the future.

use serde::Serialize;

use crate::error::{HlbError, Result};
use crate::integrate::{flow, Event, EventKind, FlowOptions, ModeState, Sample, Status};
use crate::pwsys::{SystemDef, Vec2};
use crate::roots::brent;

/// A straight Poincaré section with a crossing orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Section {
    pub anchor: Vec2,
    /// Unit vector along the section; the coordinate `s` is measured along it.
    pub direction: Vec2,
    /// `+1`: counted crossings move along `normal()`; `-1`: against it.
    pub orientation: f64,
    /// Only the half `s > 0` counts.
    pub half_line: bool,
}

impl Section {
    pub fn new(anchor: Vec2, direction: Vec2, orientation: f64, half_line: bool) -> Result<Self> {
        let n = direction[0].hypot(direction[1]);
        if !(n > 0.0) || !n.is_finite() {
            return Err(HlbError::Domain("section direction must be nonzero".into()));
        }
        if orientation == 0.0 || !orientation.is_finite() {
            return Err(HlbError::Domain("section orientation must be +1 or -1".into()));
        }
        Ok(Section {
            anchor,
            direction: [direction[0] / n, direction[1] / n],
            orientation: orientation.signum(),
            half_line,
        })
    }

    /// Left normal of the direction.
    pub fn normal(&self) -> Vec2 {
        [-self.direction[1], self.direction[0]]
    }

    /// Signed distance from the section line, positive on the `normal()` side
    /// when `orientation > 0`.
    pub fn signed_value(&self, z: Vec2) -> f64 {
        let n = self.normal();
        self.orientation * (n[0] * (z[0] - self.anchor[0]) + n[1] * (z[1] - self.anchor[1]))
    }

    pub fn coordinate(&self, z: Vec2) -> f64 {
        self.direction[0] * (z[0] - self.anchor[0]) + self.direction[1] * (z[1] - self.anchor[1])
    }

    pub fn accepts(&self, z: Vec2) -> bool {
        !self.half_line || self.coordinate(z) > 0.0
    }

    pub fn point_at(&self, s: f64) -> Vec2 {
        [self.anchor[0] + s * self.direction[0], self.anchor[1] + s * self.direction[1]]
    }

    /// Rate of change of `signed_value` along the vector `v`.
    pub fn crossing_rate(&self, v: Vec2) -> f64 {
        let n = self.normal();
        self.orientation * (n[0] * v[0] + n[1] * v[1])
    }
}

#[derive(Debug, Clone)]
pub struct CycleOptions {
    pub flow: FlowOptions,
    /// Maximal return time of one section-to-section flight.
    pub t_return_max: f64,
    pub max_iter: usize,
    /// Dense samples per step when assembling the cycle orbit.
    pub orbit_dense_samples: usize,
}

impl Default for CycleOptions {
    fn default() -> Self {
        CycleOptions {
            flow: FlowOptions { record_samples: false, ..FlowOptions::default() },
            t_return_max: 1e3,
            max_iter: 100,
            orbit_dense_samples: 8,
        }
    }
}

/// One evaluation of the return map.
#[derive(Debug, Clone)]
pub struct Return {
    pub s: f64,
    pub period: f64,
    /// Full state at the return, usable as the next template.
    pub state: ModeState,
}

/// First return to `section` from the point at coordinate `s`, keeping the
/// discrete mode of `template`.
pub fn return_map_from(
    sys: &SystemDef,
    mu: f64,
    section: &Section,
    template: &ModeState,
    s: f64,
    opts: &CycleOptions,
) -> Result<Return> {
    let init = template.with_point(0.0, section.point_at(s));
    let fo = FlowOptions {
        record_samples: false,
        section: Some(*section),
        stop_after_hits: Some(1),
        ..opts.flow.clone()
    };
    let traj = flow(sys, &init, mu, opts.t_return_max, &fo)?;
    match traj.status {
        Status::SectionReached => {
            let st = traj.section_hits.last().cloned().expect("section reached implies a hit");
            Ok(Return { s: section.coordinate(st.point()), period: st.t, state: st })
        }
        Status::BlowUp => Err(HlbError::BlowUp(traj.final_state.t)),
        _ => Err(HlbError::NoReturn(opts.t_return_max)),
    }
}

/// Return map of a memoryless system: `(s', T)`.
pub fn return_map(sys: &SystemDef, mu: f64, section: &Section, s: f64) -> Result<(f64, f64)> {
    let p = section.point_at(s);
    let template = ModeState::initial(sys, p[0], p[1], mu)?;
    let r = return_map_from(sys, mu, section, &template, s, &CycleOptions::default())?;
    Ok((r.s, r.period))
}

/// Integrate from `seed` for `t_settle` and return the state at the last
/// section crossing.
pub fn settle(
    sys: &SystemDef,
    mu: f64,
    section: &Section,
    seed: Vec2,
    t_settle: f64,
    opts: &CycleOptions,
) -> Result<ModeState> {
    let init = ModeState::initial(sys, seed[0], seed[1], mu)?;
    let fo = FlowOptions { record_samples: false, section: Some(*section), ..opts.flow.clone() };
    let traj = flow(sys, &init, mu, t_settle, &fo)?;
    if traj.status == Status::BlowUp {
        return Err(HlbError::BlowUp(traj.final_state.t));
    }
    let last = traj.section_hits.last().cloned().ok_or(HlbError::NoReturn(t_settle))?;
    Ok(last.with_point(0.0, last.point()))
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitCycle {
    pub mu: f64,
    pub section: Section,
    pub section_point: f64,
    pub point: Vec2,
    pub period: f64,
    /// Max distance of the orbit from the origin.
    pub amplitude: f64,
    pub x_max: f64,
    pub multiplier: f64,
    /// The multiplier came from a one-sided difference.
    pub multiplier_one_sided: bool,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    /// Discrete mode at the section point.
    pub state: ModeState,
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
}

impl LimitCycle {
    pub fn is_stable(&self) -> bool {
        self.multiplier.abs() < 1.0
    }

    pub fn has_sliding(&self) -> bool {
        self.samples.iter().any(|s| s.sliding)
    }

    pub fn count_events(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }
}

/// Secant steps tried before falling back to bracketing.
const SECANT_ITER: usize = 12;

fn tolerance(s: f64) -> f64 {
    1e-10 * (1.0 + s.abs())
}

/// Fixed point of the return map started from `seed`, a state on `section`.
///
/// Secant iteration on `g(s) = P(s) - s`, falling back to plain iteration of
/// `P` whenever a secant step leaves the section or fails to reduce `|g|`.
pub fn find_limit_cycle(
    sys: &SystemDef,
    mu: f64,
    section: &Section,
    seed: &ModeState,
    opts: &CycleOptions,
) -> Result<LimitCycle> {
    let template = seed.with_point(0.0, seed.point());
    let valid = |s: f64| s.is_finite() && (!section.half_line || s > 0.0);
    let eval = |s: f64| return_map_from(sys, mu, section, &template, s, opts);

    let mut s0 = section.coordinate(seed.point());
    let r0 = eval(s0)?;
    let mut g0 = r0.s - s0;
    let mut best = (s0, g0);
    let mut iterations = 0;
    let mut converged = g0.abs() <= tolerance(s0);
    let mut s1 = r0.s;
    // opposite-sign samples of g, once seen
    let mut bracket: Option<(f64, f64)> = None;
    let note = |a: f64, ga: f64, b: f64, gb: f64, br: &mut Option<(f64, f64)>| {
        if ga * gb < 0.0 && br.is_none_or(|(lo, hi)| (b - a).abs() < (hi - lo).abs()) {
            *br = Some((a.min(b), a.max(b)));
        }
    };
    while !converged && iterations < SECANT_ITER.min(opts.max_iter) {
        iterations += 1;
        let r1 = eval(s1)?;
        let g1 = r1.s - s1;
        if g1.abs() < best.1.abs() {
            best = (s1, g1);
        }
        if g1.abs() <= tolerance(s1) {
            converged = true;
            break;
        }
        note(s0, g0, s1, g1, &mut bracket);
        let secant = if g1 != g0 { s1 - g1 * (s1 - s0) / (g1 - g0) } else { f64::NAN };
        let next = if valid(secant) && g1.abs() < g0.abs() { secant } else { r1.s };
        s0 = s1;
        g0 = g1;
        s1 = next;
    }

    if !converged && section.half_line {
        // a stable cycle has g > 0 below s* and g < 0 above it
        let (mut s, mut g) = best;
        let factor = if g > 0.0 { 2.0 } else { 0.5 };
        while bracket.is_none() && iterations < opts.max_iter {
            iterations += 1;
            let sn = s * factor;
            let gn = eval(sn)?.s - sn;
            note(s, g, sn, gn, &mut bracket);
            (s, g) = (sn, gn);
        }
    }
    if let (false, Some((lo, hi))) = (converged, bracket) {
        let failure = std::cell::RefCell::new(None);
        let gfun = |x: f64| match eval(x) {
            Ok(r) => r.s - x,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        };
        let remaining = opts.max_iter.saturating_sub(iterations).max(1);
        let root = brent(gfun, lo, hi, 1e-12 * hi.abs(), remaining);
        let root = root.ok().map(|sr| (sr, gfun(sr)));
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        if let Some((sr, gr)) = root {
            iterations += 1;
            if gr.abs() <= best.1.abs() {
                best = (sr, gr);
            }
            converged = gr.abs() <= tolerance(sr) || (hi - lo).abs() <= 1e-9 * hi.abs();
        }
    }
    let s_star = best.0;
    let residual = best.1.abs();

    let (multiplier, one_sided) = floquet(sys, mu, section, &template, s_star, opts)?;

    // assemble one period with dense samples and located extrema
    let init = template.with_point(0.0, section.point_at(s_star));
    let fo = FlowOptions {
        record_samples: true,
        dense_samples: opts.orbit_dense_samples,
        extremum_origin: Some([0.0, 0.0]),
        section: Some(*section),
        stop_after_hits: Some(1),
        ..opts.flow.clone()
    };
    let traj = flow(sys, &init, mu, opts.t_return_max, &fo)?;
    if traj.status != Status::SectionReached {
        return Err(HlbError::NoReturn(opts.t_return_max));
    }
    let period = traj.final_state.t;
    let mut cycle = LimitCycle {
        mu,
        section: *section,
        section_point: s_star,
        point: section.point_at(s_star),
        period,
        amplitude: 0.0,
        x_max: 0.0,
        multiplier,
        multiplier_one_sided: one_sided,
        converged,
        iterations,
        residual,
        state: init,
        samples: traj.samples,
        events: traj.events,
    };
    let (a, _, xm) = cycle_metrics(&cycle, [0.0, 0.0]);
    cycle.amplitude = a;
    cycle.x_max = xm;
    Ok(cycle)
}

/// `(amplitude, period, x_max)` of a cycle about `origin`.
pub fn cycle_metrics(cycle: &LimitCycle, origin: Vec2) -> (f64, f64, f64) {
    let amplitude = cycle
        .samples
        .iter()
        .map(|s| (s.x - origin[0]).hypot(s.y - origin[1]))
        .fold(0.0, f64::max);
    let x_max = cycle.samples.iter().map(|s| s.x).fold(f64::NEG_INFINITY, f64::max);
    (amplitude, cycle.period, x_max)
}

fn floquet(
    sys: &SystemDef,
    mu: f64,
    section: &Section,
    template: &ModeState,
    s: f64,
    opts: &CycleOptions,
) -> Result<(f64, bool)> {
    let mut h = (1e-4 * s.abs()).max(1e-14);
    if section.half_line {
        h = h.min(0.5 * s);
    }
    let p = |x: f64| return_map_from(sys, mu, section, template, x, opts).map(|r| r.s);
    let centre = p(s)?;
    let plus = p(s + h);
    let minus = if section.half_line && s - h <= 0.0 { Err(HlbError::Domain("offset leaves the half-line".into())) } else { p(s - h) };
    match (plus, minus) {
        (Ok(a), Ok(b)) => Ok(((a - b) / (2.0 * h), false)),
        (Ok(a), Err(_)) => Ok(((a - centre) / h, true)),
        (Err(_), Ok(b)) => Ok(((centre - b) / h, true)),
        (Err(e), Err(_)) => Err(e),
    }
}

/// Floquet multiplier `P'(s*)` of a memoryless system by central differences.
///
/// Returns the multiplier and whether a one-sided fallback was used.
pub fn floquet_multiplier(sys: &SystemDef, mu: f64, section: &Section, s_star: f64) -> Result<(f64, bool)> {
    let p = section.point_at(s_star);
    let template = ModeState::initial(sys, p[0], p[1], mu)?;
    floquet(sys, mu, section, &template, s_star, &CycleOptions::default())
}

//! Event-driven integration of piecewise-smooth systems.
//!
//! Between events the flow of the active mode is advanced with an adaptive
//! Dormand–Prince 5(4) pair. Every step is scanned for sign changes of the
//! mode's guard functions on its dense output; the earliest one is then
//! polished by root finding on re-taken steps, so located events carry the
//! accuracy of the integrator rather than of the interpolant.

mod reset;
mod stepper;

pub use reset::apply_reset;
pub use stepper::{advance, Step};

use std::collections::VecDeque;

use serde::Serialize;

use crate::cycles::Section;
use crate::error::{HlbError, Result};
use crate::pwsys::{
    classify_normal_components, filippov_weight, quadrant_index, ManifoldPoint, SwitchingStructure, SystemDef,
    Vec2, LEFT, MANIFOLD_TOL, RIGHT,
};
use crate::roots::brent;

/// Hysteresis branch: which field is in use inside the band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    L,
    R,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PendingSwitch {
    pub at: f64,
    pub piece: usize,
}

/// Continuous state plus discrete mode memory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub piece: usize,
    pub sliding: bool,
    pub branch: Option<Branch>,
    /// Delayed switches, ascending in time.
    pub pending: Vec<PendingSwitch>,
}

impl ModeState {
    /// Consistent initial mode for a point, classifying points on a manifold.
    pub fn initial(sys: &SystemDef, x: f64, y: f64, mu: f64) -> Result<Self> {
        let mut st = ModeState {
            t: 0.0,
            x,
            y,
            piece: sys.piece_at(x, y),
            sliding: false,
            branch: None,
            pending: Vec::new(),
        };
        match sys.switching() {
            SwitchingStructure::Continuous | SwitchingStructure::Filippov if x.abs() <= MANIFOLD_TOL => {
                st.x = 0.0;
                let fl = sys.pieces()[LEFT].eval(0.0, y, mu);
                let fr = sys.pieces()[RIGHT].eval(0.0, y, mu);
                match classify_normal_components(fl, fr) {
                    ManifoldPoint::AttractingSliding if sys.switching() == SwitchingStructure::Filippov => {
                        st.sliding = true
                    }
                    ManifoldPoint::CrossingUp => st.piece = RIGHT,
                    ManifoldPoint::CrossingDown => st.piece = LEFT,
                    _ => st.piece = if fl[0] + fr[0] > 0.0 { RIGHT } else { LEFT },
                }
            }
            SwitchingStructure::Impact | SwitchingStructure::Impulse { .. } => {
                if x > MANIFOLD_TOL {
                    return Err(HlbError::Domain(format!("initial point x = {x} outside x <= 0")));
                }
            }
            SwitchingStructure::Hysteresis => {
                let b = if x > 0.0 { Branch::R } else { Branch::L };
                st.branch = Some(b);
                st.piece = if b == Branch::R { RIGHT } else { LEFT };
            }
            _ => {}
        }
        Ok(st)
    }

    pub fn point(&self) -> Vec2 {
        [self.x, self.y]
    }

    /// Mode invariants: sliding only on attracting points, pending queue in the future.
    pub fn validate(&self, sys: &SystemDef, mu: f64) -> Result<()> {
        if !self.x.is_finite() || !self.y.is_finite() || !self.t.is_finite() {
            return Err(HlbError::Domain("non-finite initial state".into()));
        }
        sys.piece(self.piece)?;
        if self.sliding {
            if sys.switching() != SwitchingStructure::Filippov || self.x.abs() > 1e-10 {
                return Err(HlbError::Domain("sliding state off the Filippov manifold".into()));
            }
            let fl = sys.pieces()[LEFT].eval(0.0, self.y, mu);
            let fr = sys.pieces()[RIGHT].eval(0.0, self.y, mu);
            if !(fl[0] > 0.0 && fr[0] < 0.0) {
                return Err(HlbError::Domain(format!("(0, {}) is not attracting sliding", self.y)));
            }
        }
        if self.pending.windows(2).any(|w| w[0].at > w[1].at) || self.pending.iter().any(|p| p.at <= self.t) {
            return Err(HlbError::Domain("pending switches must be in the future and sorted".into()));
        }
        if sys.switching() == SwitchingStructure::Hysteresis && self.branch.is_none() {
            return Err(HlbError::Domain("hysteresis state without a branch".into()));
        }
        Ok(())
    }

    /// Copy of the discrete mode with a new point and time; pending switch
    /// times keep their offsets relative to `t`.
    pub fn with_point(&self, t: f64, p: Vec2) -> Self {
        let shift = t - self.t;
        let mut s = self.clone();
        s.t = t;
        s.x = p[0];
        s.y = p[1];
        for q in &mut s.pending {
            q.at += shift;
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Crossing,
    SlidingEntry,
    SlidingExit,
    PseudoEquilibrium,
    Impact,
    Impulse,
    HysteresisSwitch,
    DelayedSwitch,
    SectionHit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    /// Post-event location.
    pub location: Vec2,
    /// Pre-event location (differs from `location` for resets).
    pub before: Vec2,
    pub piece_before: usize,
    pub piece_after: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub piece: usize,
    pub sliding: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Completed,
    MaxSteps,
    BlowUp,
    /// Stopped after the requested number of section hits.
    SectionReached,
    /// Stopped when a sliding segment ended (see [`slide_segment`]).
    SlidingEnded,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
    pub status: Status,
    pub final_state: ModeState,
    /// Full post-event states at each section hit.
    #[serde(skip)]
    pub section_hits: Vec<ModeState>,
}

#[derive(Debug, Clone)]
pub struct FlowOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub h_init: Option<f64>,
    pub max_steps: usize,
    pub blow_up: f64,
    /// Store samples (otherwise only events and the final state).
    pub record_samples: bool,
    /// Extra dense-output samples stored inside each accepted step.
    pub dense_samples: usize,
    /// When set, interior maxima of `|z - origin|` and of `x` inside each
    /// step are located and stored as samples.
    pub extremum_origin: Option<Vec2>,
    pub section: Option<Section>,
    pub stop_after_hits: Option<usize>,
    pub stop_on_sliding_exit: bool,
    /// Abort when this many events happen within `zeno_span`.
    pub zeno_count: usize,
    pub zeno_span: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-14,
            h_max: 0.05,
            h_init: None,
            max_steps: 2_000_000,
            blow_up: 1e6,
            record_samples: true,
            dense_samples: 0,
            extremum_origin: None,
            section: None,
            stop_after_hits: None,
            stop_on_sliding_exit: false,
            zeno_count: 10_000,
            zeno_span: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Dir {
    Up,
    Down,
    Any,
}

impl Dir {
    fn fires(self, g0: f64, g1: f64) -> bool {
        match self {
            Dir::Up => g0 < 0.0 && g1 >= 0.0,
            Dir::Down => g0 > 0.0 && g1 <= 0.0,
            Dir::Any => (g0 < 0.0 && g1 >= 0.0) || (g0 > 0.0 && g1 <= 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Guard {
    /// `z[coord] - level`
    Level { coord: usize, level: f64, dir: Dir },
    /// Normal component of a piece on `x = 0` (sliding exit).
    Normal { piece: usize, dir: Dir },
    /// `t - at`
    Time { at: f64 },
}

/// Active vector field and guards of the current mode.
struct Mode<'a> {
    sys: &'a SystemDef,
    mu: f64,
    piece: usize,
    sliding: bool,
}

impl Mode<'_> {
    fn field(&self, z: Vec2) -> Vec2 {
        if self.sliding {
            let fl = self.sys.pieces()[LEFT].eval(0.0, z[1], self.mu);
            let fr = self.sys.pieces()[RIGHT].eval(0.0, z[1], self.mu);
            let den = fr[0] - fl[0];
            if den == 0.0 {
                return [0.0, 0.0];
            }
            [0.0, (fr[0] * fl[1] - fl[0] * fr[1]) / den]
        } else {
            self.sys.pieces()[self.piece].eval(z[0], z[1], self.mu)
        }
    }
}

fn guards(sys: &SystemDef, st: &ModeState, mu: f64) -> Vec<Guard> {
    use SwitchingStructure::*;
    if st.sliding {
        return vec![
            Guard::Normal { piece: LEFT, dir: Dir::Down },
            Guard::Normal { piece: RIGHT, dir: Dir::Up },
        ];
    }
    match sys.switching() {
        Continuous | Filippov => {
            let dir = if st.piece == LEFT { Dir::Up } else { Dir::Down };
            vec![Guard::Level { coord: 0, level: 0.0, dir }]
        }
        Impact | Impulse { .. } => vec![Guard::Level { coord: 0, level: 0.0, dir: Dir::Up }],
        Hysteresis => match st.branch {
            Some(Branch::R) => vec![Guard::Level { coord: 0, level: -mu, dir: Dir::Down }],
            _ => vec![Guard::Level { coord: 0, level: mu, dir: Dir::Up }],
        },
        Delay => {
            let mut g = vec![Guard::Level { coord: 0, level: 0.0, dir: Dir::Any }];
            if let Some(p) = st.pending.first() {
                g.push(Guard::Time { at: p.at });
            }
            g
        }
        TwoManifolds => vec![
            Guard::Level { coord: 0, level: 0.0, dir: Dir::Any },
            Guard::Level { coord: 1, level: 0.0, dir: Dir::Any },
        ],
    }
}

fn guard_value(g: &Guard, sys: &SystemDef, mu: f64, t: f64, z: Vec2) -> f64 {
    match *g {
        Guard::Level { coord, level, .. } => z[coord] - level,
        Guard::Normal { piece, .. } => sys.pieces()[piece].eval(0.0, z[1], mu)[0],
        Guard::Time { at } => t - at,
    }
}

fn guard_dir(g: &Guard) -> Dir {
    match *g {
        Guard::Level { dir, .. } | Guard::Normal { dir, .. } => dir,
        Guard::Time { .. } => Dir::Up,
    }
}

/// Locate a root of `event_fn` on `[t0, t1]` (sign change required).
///
/// Safeguarded secant/bisection (Brent) with at most 200 iterations.
pub fn locate_event<F: Fn(f64) -> f64>(event_fn: F, t0: f64, t1: f64) -> Result<f64> {
    let xtol = 1e-15 * (1.0 + t0.abs().max(t1.abs()));
    brent(event_fn, t0, t1, xtol, 200)
}

/// Root of `g` along a dense-output segment.
pub fn locate_on_segment<G: Fn(f64, Vec2) -> f64>(segment: &Step, g: G, t0: f64, t1: f64) -> Result<f64> {
    locate_event(|t| g(t, segment.dense(t)), t0, t1)
}

const SUBDIV: usize = 8;

struct Found {
    tau: f64,
    guard: Option<Guard>,
    z: Vec2,
}

/// Earliest firing guard (and section hit) inside an accepted step.
#[allow(clippy::too_many_arguments)]
fn scan_step<F: Fn(Vec2) -> Vec2>(
    f: &F,
    k1: Vec2,
    step: &Step,
    gs: &[Guard],
    sys: &SystemDef,
    mu: f64,
    section: Option<&Section>,
) -> Result<(Option<Found>, Option<Found>)> {
    let taus: Vec<f64> = (0..=SUBDIV).map(|j| step.h * j as f64 / SUBDIV as f64).collect();
    let pts: Vec<Vec2> = taus.iter().map(|&tau| step.dense(step.t0 + tau)).collect();
    let restep = |tau: f64| -> Vec2 {
        if tau == 0.0 {
            step.y0
        } else {
            advance(f, step.y0, k1, tau)
        }
    };
    let refine = |gfun: &dyn Fn(f64, Vec2) -> f64, lo: f64, hi: f64| -> Result<f64> {
        let exact = |tau: f64| gfun(step.t0 + tau, restep(tau));
        let dense = |tau: f64| gfun(step.t0 + tau, step.dense(step.t0 + tau));
        let (a, b) = (exact(lo), exact(hi));
        if a * b <= 0.0 && a != b {
            return locate_event(exact, lo, hi);
        }
        // interpolant and re-step disagree at the bracket ends: widen once
        let (a0, b1) = (exact(0.0), exact(step.h));
        if a0 * b1 < 0.0 {
            if a0 * b <= 0.0 && hi > 0.0 {
                return locate_event(exact, 0.0, hi);
            }
            if a * b1 <= 0.0 {
                return locate_event(exact, lo, step.h);
            }
        }
        locate_event(dense, lo, hi)
    };

    let mut best: Option<Found> = None;
    for g in gs {
        if let Guard::Time { at } = *g {
            let tau = at - step.t0;
            if tau > 0.0 && tau <= step.h && best.as_ref().is_none_or(|b| tau < b.tau) {
                best = Some(Found { tau, guard: Some(*g), z: restep(tau) });
            }
            continue;
        }
        let dir = guard_dir(g);
        let gfun = |t: f64, z: Vec2| guard_value(g, sys, mu, t, z);
        let (ts, vals) = guard_samples(&gfun, guard_rate(&gfun, step.t0, step.y0, k1), step, &taus, &pts);
        for j in 1..=SUBDIV {
            if dir.fires(vals[j - 1], vals[j]) {
                if best.as_ref().is_some_and(|b| b.tau < ts[j - 1]) {
                    break;
                }
                let tau = refine(&gfun, ts[j - 1], ts[j])?;
                if best.as_ref().is_none_or(|b| tau < b.tau) {
                    best = Some(Found { tau, guard: Some(*g), z: restep(tau) });
                }
                break;
            }
        }
    }

    let mut hit: Option<Found> = None;
    if let Some(sec) = section {
        // a state left on the section by a previous hit reads as exactly zero
        let gfun = |_t: f64, z: Vec2| {
            let v = sec.signed_value(z);
            if v.abs() <= 1e-14 * (1.0 + z[0].abs().max(z[1].abs())) {
                0.0
            } else {
                v
            }
        };
        let (ts, vals) = guard_samples(&gfun, guard_rate(&gfun, step.t0, step.y0, k1), step, &taus, &pts);
        for j in 1..=SUBDIV {
            if Dir::Up.fires(vals[j - 1], vals[j]) {
                let tau = refine(&gfun, ts[j - 1], ts[j])?;
                let z = restep(tau);
                if sec.accepts(z) {
                    hit = Some(Found { tau, guard: None, z });
                    break;
                }
            }
        }
    }
    Ok((best, hit))
}

/// Guard values at the sub-sample times.
///
/// A guard that vanishes at the step start (the state sits on its surface
/// after an event) takes its sign from `rate0`, its derivative along the
/// flow, and the first sample is moved slightly into the step so that a
/// prompt return through the surface is still bracketed.
fn guard_samples(
    gfun: &dyn Fn(f64, Vec2) -> f64,
    rate0: f64,
    step: &Step,
    taus: &[f64],
    pts: &[Vec2],
) -> (Vec<f64>, Vec<f64>) {
    let mut ts = taus.to_vec();
    let mut vals: Vec<f64> = taus.iter().zip(pts).map(|(&tau, &z)| gfun(step.t0 + tau, z)).collect();
    if vals[0] == 0.0 && rate0 != 0.0 {
        for k in [1e-4, 1e-7, 1e-10, 1e-13] {
            let tau = k * taus[1];
            let v = gfun(step.t0 + tau, step.dense(step.t0 + tau));
            if v != 0.0 && v.signum() == rate0.signum() {
                ts[0] = tau;
                vals[0] = v;
                break;
            }
        }
    }
    (ts, vals)
}

/// Derivative of a guard along the flow at the step start.
fn guard_rate(gfun: &dyn Fn(f64, Vec2) -> f64, t0: f64, z0: Vec2, k1: Vec2) -> f64 {
    let speed = k1[0].abs().max(k1[1].abs());
    if speed == 0.0 {
        return 0.0;
    }
    let d = 1e-9 * (1.0 + z0[0].abs().max(z0[1].abs())) / speed;
    (gfun(t0 + d, [z0[0] + d * k1[0], z0[1] + d * k1[1]]) - gfun(t0, z0)) / d
}

struct Recorder {
    samples: Vec<Sample>,
    events: Vec<Event>,
    record: bool,
    recent: VecDeque<f64>,
    zeno_count: usize,
    zeno_span: f64,
}

impl Recorder {
    fn sample(&mut self, t: f64, z: Vec2, st: &ModeState) {
        if !self.record {
            return;
        }
        let s = Sample { t, x: z[0], y: z[1], piece: st.piece, sliding: st.sliding };
        match self.samples.last_mut() {
            Some(last) if last.t >= t => *last = s,
            _ => self.samples.push(s),
        }
    }

    fn event(&mut self, ev: Event) -> Result<()> {
        let t = ev.t;
        self.events.push(ev);
        self.recent.push_back(t);
        if self.recent.len() > self.zeno_count {
            self.recent.pop_front();
        }
        if self.recent.len() == self.zeno_count {
            let span = t - self.recent.front().copied().unwrap_or(t);
            if span < self.zeno_span {
                return Err(HlbError::Zeno { count: self.zeno_count, span, t });
            }
        }
        Ok(())
    }
}

/// Integrate `sys` from `init` up to `t_end`.
pub fn flow(sys: &SystemDef, init: &ModeState, mu: f64, t_end: f64, opts: &FlowOptions) -> Result<Trajectory> {
    sys.check_mu(mu)?;
    init.validate(sys, mu)?;
    if matches!(sys.switching(), SwitchingStructure::Hysteresis | SwitchingStructure::Delay) && mu <= 0.0 {
        return Err(HlbError::Domain("hysteresis/delay regularisation needs mu > 0".into()));
    }
    let mut st = init.clone();
    let mut rec = Recorder {
        samples: Vec::new(),
        events: Vec::new(),
        record: opts.record_samples,
        recent: VecDeque::new(),
        zeno_count: opts.zeno_count.max(2),
        zeno_span: opts.zeno_span,
    };
    let mut section_hits = Vec::new();
    rec.sample(st.t, st.point(), &st);

    let mut h = opts.h_init.unwrap_or(0.0);
    let mut steps = 0usize;
    let mut status = Status::Completed;

    'outer: while st.t < t_end {
        let mode = Mode { sys, mu, piece: st.piece, sliding: st.sliding };
        let f = |z: Vec2| mode.field(z);
        let z0 = st.point();
        let k1 = f(z0);
        if !k1[0].is_finite() || !k1[1].is_finite() {
            return Err(HlbError::Numeric(format!("non-finite field at ({}, {})", z0[0], z0[1])));
        }
        if st.sliding && k1[1].abs() <= 1e-12 {
            rec.event(Event {
                t: st.t,
                kind: EventKind::PseudoEquilibrium,
                location: z0,
                before: z0,
                piece_before: st.piece,
                piece_after: st.piece,
            })?;
            st.t = t_end;
            rec.sample(st.t, z0, &st);
            break;
        }
        if h <= 0.0 {
            let zn = z0[0].abs().max(z0[1].abs());
            let fn_ = k1[0].abs().max(k1[1].abs());
            h = if fn_ > 0.0 { 0.01 * (zn + opts.atol * 1e4) / fn_ } else { 1e-3 };
            h = h.clamp(1e-10, opts.h_max);
        }
        let gs = guards(sys, &st, mu);

        // adaptive step
        let step = loop {
            steps += 1;
            if steps > opts.max_steps {
                status = Status::MaxSteps;
                break 'outer;
            }
            let hh = h.min(t_end - st.t).min(opts.h_max);
            let s = Step::take(&f, st.t, z0, k1, hh, opts.rtol, opts.atol);
            let ok = s.err <= 1.0 && s.y1[0].is_finite() && s.y1[1].is_finite();
            let fac = if s.err > 0.0 { 0.9 * s.err.powf(-0.2) } else { 5.0 };
            if ok {
                h = (hh * fac.clamp(0.2, 5.0)).min(opts.h_max);
                break s;
            }
            h = hh * fac.clamp(0.1, 0.5);
            if h < 1e-15 * (1.0 + st.t.abs()) {
                return Err(HlbError::Numeric(format!("step size underflow at t = {}", st.t)));
            }
        };

        let (found, hit) = scan_step(&f, k1, &step, &gs, sys, mu, opts.section.as_ref())?;
        let ev_tau = found.as_ref().map(|e| e.tau).unwrap_or(f64::INFINITY);

        // a section hit strictly before any discrete event
        if let Some(hf) = hit.as_ref().filter(|hf| hf.tau < ev_tau - 1e-13) {
            let t = st.t + hf.tau;
            record_interior(&mut rec, &step, &f, st.t, t, opts, &st);
            st.t = t;
            st.x = hf.z[0];
            st.y = hf.z[1];
            rec.sample(t, hf.z, &st);
            rec.event(Event {
                t,
                kind: EventKind::SectionHit,
                location: hf.z,
                before: hf.z,
                piece_before: st.piece,
                piece_after: st.piece,
            })?;
            section_hits.push(st.clone());
            if opts.stop_after_hits.is_some_and(|n| section_hits.len() >= n) {
                status = Status::SectionReached;
                break;
            }
            continue;
        }

        match found {
            Some(ev) => {
                let t = st.t + ev.tau;
                record_interior(&mut rec, &step, &f, st.t, t, opts, &st);
                st.t = t;
                st.x = ev.z[0];
                st.y = ev.z[1];
                rec.sample(t, ev.z, &st);
                let guard = ev.guard.expect("discrete event carries its guard");
                let ended_slide = st.sliding;
                handle_event(sys, mu, &mut st, guard, &mut rec)?;
                rec.sample(st.t, st.point(), &st);
                let coincident = hit.is_some_and(|hf| (hf.tau - ev.tau).abs() <= 1e-13);
                if coincident {
                    let z = st.point();
                    if opts.section.as_ref().is_some_and(|s| s.accepts(z)) {
                        rec.event(Event {
                            t: st.t,
                            kind: EventKind::SectionHit,
                            location: z,
                            before: z,
                            piece_before: st.piece,
                            piece_after: st.piece,
                        })?;
                        section_hits.push(st.clone());
                        if opts.stop_after_hits.is_some_and(|n| section_hits.len() >= n) {
                            status = Status::SectionReached;
                            break;
                        }
                    }
                }
                if opts.stop_on_sliding_exit && ended_slide && !st.sliding {
                    status = Status::SlidingEnded;
                    break;
                }
                h = h.min(step.h.max(1e-8));
            }
            None => {
                record_interior(&mut rec, &step, &f, st.t, step.t1(), opts, &st);
                st.t = step.t1();
                st.x = step.y1[0];
                st.y = step.y1[1];
                if st.sliding {
                    st.x = 0.0;
                }
                rec.sample(st.t, st.point(), &st);
            }
        }
        if st.x.abs().max(st.y.abs()) > opts.blow_up {
            status = Status::BlowUp;
            break;
        }
    }
    if status == Status::Completed && st.t > t_end {
        st.t = t_end;
    }
    Ok(Trajectory { samples: rec.samples, events: rec.events, status, final_state: st, section_hits })
}

fn record_interior<F: Fn(Vec2) -> Vec2>(
    rec: &mut Recorder,
    step: &Step,
    f: &F,
    t_from: f64,
    t_to: f64,
    opts: &FlowOptions,
    st: &ModeState,
) {
    if !rec.record || t_to <= t_from {
        return;
    }
    let n = opts.dense_samples;
    let mut ts: Vec<f64> = (1..=n).map(|j| t_from + (t_to - t_from) * j as f64 / (n + 1) as f64).collect();
    if let Some(o) = opts.extremum_origin {
        let rate_r = |t: f64| {
            let z = step.dense(t);
            let v = f(z);
            (z[0] - o[0]) * v[0] + (z[1] - o[1]) * v[1]
        };
        let rate_x = |t: f64| f(step.dense(t))[0];
        ts.extend(interior_maxima(&rate_r, t_from, t_to));
        ts.extend(interior_maxima(&rate_x, t_from, t_to));
    }
    ts.retain(|&t| t > t_from && t < t_to);
    ts.sort_by(f64::total_cmp);
    for t in ts {
        rec.sample(t, step.dense(t), st);
    }
}

/// Times in `(a, b)` where `rate` changes sign from positive to negative.
fn interior_maxima(rate: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Vec<f64> {
    let ts: Vec<f64> = (0..=SUBDIV).map(|j| a + (b - a) * j as f64 / SUBDIV as f64).collect();
    let vals: Vec<f64> = ts.iter().map(|&t| rate(t)).collect();
    (1..=SUBDIV)
        .filter(|&j| vals[j - 1] > 0.0 && vals[j] < 0.0)
        .filter_map(|j| locate_event(rate, ts[j - 1], ts[j]).ok())
        .collect()
}

fn handle_event(sys: &SystemDef, mu: f64, st: &mut ModeState, guard: Guard, rec: &mut Recorder) -> Result<()> {
    use SwitchingStructure::*;
    let before = st.point();
    let piece_before = st.piece;
    let emit = |st: &ModeState, kind: EventKind, rec: &mut Recorder| {
        rec.event(Event { t: st.t, kind, location: st.point(), before, piece_before, piece_after: st.piece })
    };

    if st.sliding {
        let Guard::Normal { piece, .. } = guard else { unreachable!("sliding mode only has normal guards") };
        st.x = 0.0;
        st.sliding = false;
        st.piece = piece;
        return emit(st, EventKind::SlidingExit, rec);
    }

    match sys.switching() {
        Continuous | Filippov => {
            st.x = 0.0;
            let fl = sys.pieces()[LEFT].eval(0.0, st.y, mu);
            let fr = sys.pieces()[RIGHT].eval(0.0, st.y, mu);
            let target = if piece_before == LEFT { RIGHT } else { LEFT };
            let pointing_back = if target == RIGHT { fr[0] < 0.0 } else { fl[0] > 0.0 };
            let tol = crate::pwsys::tangency_tol(fl, fr);
            let tgt_normal = if target == RIGHT { fr[0] } else { fl[0] };
            if sys.switching() == Filippov && (pointing_back || tgt_normal.abs() <= tol) {
                let slide = if tgt_normal.abs() > tol {
                    true
                } else {
                    // on a fold of the target piece: slide if the sliding
                    // flow moves into the sliding region
                    let h = 1e-7 * (1.0 + st.y.abs());
                    let tp = &sys.pieces()[target];
                    let d = (tp.eval(0.0, st.y + h, mu)[0] - tp.eval(0.0, st.y - h, mu)[0]) / (2.0 * h);
                    let ys = if fl[0] != fr[0] { (fr[0] * fl[1] - fl[0] * fr[1]) / (fr[0] - fl[0]) } else { 0.0 };
                    let sign = if target == RIGHT { -1.0 } else { 1.0 };
                    sign * d * ys > 0.0
                };
                if slide {
                    st.sliding = true;
                    st.piece = piece_before;
                    return emit(st, EventKind::SlidingEntry, rec);
                }
            }
            st.piece = target;
            emit(st, EventKind::Crossing, rec)
        }
        Impact => {
            st.x = 0.0;
            let next = apply_reset(sys, st, mu)?;
            *st = next;
            emit(st, EventKind::Impact, rec)
        }
        Impulse { .. } => {
            st.x = 0.0;
            let next = apply_reset(sys, st, mu)?;
            *st = next;
            emit(st, EventKind::Impulse, rec)
        }
        Hysteresis => {
            match st.branch {
                Some(Branch::R) => {
                    st.x = -mu;
                    st.branch = Some(Branch::L);
                    st.piece = LEFT;
                }
                _ => {
                    st.x = mu;
                    st.branch = Some(Branch::R);
                    st.piece = RIGHT;
                }
            }
            emit(st, EventKind::HysteresisSwitch, rec)
        }
        Delay => match guard {
            Guard::Time { .. } => {
                let p = st.pending.remove(0);
                st.piece = p.piece;
                emit(st, EventKind::DelayedSwitch, rec)
            }
            _ => {
                st.x = 0.0;
                let fa = sys.pieces()[st.piece].eval(0.0, st.y, mu);
                let side = if fa[0] > 0.0 {
                    RIGHT
                } else if fa[0] < 0.0 {
                    LEFT
                } else if before[0] < 0.0 {
                    RIGHT
                } else {
                    LEFT
                };
                st.pending.push(PendingSwitch { at: st.t + mu, piece: side });
                st.pending.sort_by(|a, b| a.at.total_cmp(&b.at));
                emit(st, EventKind::Crossing, rec)
            }
        },
        TwoManifolds => {
            let Guard::Level { coord, .. } = guard else { unreachable!() };
            let f_old = sys.pieces()[st.piece].eval(st.x, st.y, mu);
            let dir_pos = f_old[coord] > 0.0;
            let (mut xp, mut yp) = match st.piece {
                0 => (true, true),
                1 => (false, true),
                2 => (false, false),
                _ => (true, false),
            };
            if coord == 0 {
                st.x = 0.0;
                xp = dir_pos;
            } else {
                st.y = 0.0;
                yp = dir_pos;
            }
            let next = quadrant_index(xp, yp);
            let f_new = sys.pieces()[next].eval(st.x, st.y, mu);
            if (f_new[coord] > 0.0) != dir_pos || f_new[coord] == 0.0 {
                return Err(HlbError::ModelInconsistency(format!(
                    "sliding on a manifold of a two-manifold system at ({}, {}) is not supported",
                    st.x, st.y
                )));
            }
            st.piece = next;
            emit(st, EventKind::Crossing, rec)
        }
    }
}

/// Follow a sliding segment from `entry` until it leaves the manifold,
/// reaches a pseudo-equilibrium, or `t_end` elapses.
pub fn slide_segment(sys: &SystemDef, entry: &ModeState, mu: f64, t_end: f64) -> Result<Trajectory> {
    if sys.switching() != SwitchingStructure::Filippov {
        return Err(HlbError::Domain("sliding requires a Filippov system".into()));
    }
    let fl = sys.pieces()[LEFT].eval(0.0, entry.y, mu);
    let fr = sys.pieces()[RIGHT].eval(0.0, entry.y, mu);
    if !(fl[0] > 0.0 && fr[0] < 0.0) {
        return Err(HlbError::Domain(format!(
            "(0, {}) is not an attracting sliding point (fL1 = {}, fR1 = {})",
            entry.y, fl[0], fr[0]
        )));
    }
    let mut st = entry.clone();
    st.x = 0.0;
    st.sliding = true;
    let opts = FlowOptions { stop_on_sliding_exit: true, ..FlowOptions::default() };
    flow(sys, &st, mu, t_end, &opts)
}

/// Filippov weight along a sliding sample (for diagnostics).
pub fn sliding_weight(sys: &SystemDef, y: f64, mu: f64) -> f64 {
    let fl = sys.pieces()[LEFT].eval(0.0, y, mu);
    let fr = sys.pieces()[RIGHT].eval(0.0, y, mu);
    filippov_weight(fl[0], fr[0])
}

#[cfg(test)]
mod tests;

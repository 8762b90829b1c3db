//! Reference systems: the classical Hopf normal form and twenty piecewise-
//! smooth prototypes, one per Hopf-like bifurcation type.
//!
//! Conventions shared by all entries:
//!
//! * the left piece lives on `x < 0`, the right piece on `x > 0`;
//! * the bifurcation happens at `mu = 0` at the origin, and the bifurcating
//!   cycle is stable and exists for `mu > 0`;
//! * amplitudes are measured from the origin.
//!
//! Each entry carries the exponents `(a, b)` of the scaling laws
//! `amplitude ~ mu^a`, `period ~ mu^b`, a Poincaré section, a seed point for
//! settle runs, a rough period used to size time steps, and a list of
//! qualitative checks evaluated on the computed cycle.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::cycles::{LimitCycle, Section};
use crate::error::{HlbError, Result};
use crate::integrate::EventKind;
use crate::pwsys::{
    classify_manifold_point, equilibria, Admissibility, EquilibriumKind, ImpactLaw, ImpulseMap, Line, ManifoldPoint,
    Region, Reset, Smoothness, SmoothPiece, SwitchingStructure, SystemDef, Vec2,
};

/// Exact rational exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Ratio {
    pub num: i32,
    pub den: i32,
}

impl Ratio {
    pub const fn new(num: i32, den: i32) -> Self {
        Ratio { num, den }
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Named predicates evaluated on a computed cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// Multiplier of modulus below one.
    Stable,
    /// Exactly two crossings of `x = 0` per period.
    CrossesManifoldTwice,
    /// An unstable focus of an adjacent piece, admissible or on the
    /// manifold, lies inside the cycle.
    EncirclesUnstableFocus,
    /// The cycle contains a sliding segment.
    HasSlidingSegment,
    /// Every non-sliding sample has `x < 1e-10`.
    OneSided,
    /// No attracting sliding point on `x = 0` within the cycle's extent.
    NoAttractingSliding,
    /// One impact per period.
    ImpactsOnce,
    /// The equilibrium of the impacting flow is virtual with `x > 0`.
    VirtualEquilibriumRight,
    /// One impulse per period.
    ImpulseOnce,
    /// Two hysteresis switches per period.
    SwitchesTwice,
    /// Two delayed switches per period.
    DelayedSwitchesTwice,
    /// Four crossings per period, two of each manifold.
    CrossesBothManifolds,
    /// `x_max < 0.1 * amplitude`.
    ShallowPenetration,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::Stable => "cycle is stable",
            Check::CrossesManifoldTwice => "cycle crosses x=0 twice",
            Check::EncirclesUnstableFocus => "cycle encircles unstable focus",
            Check::HasSlidingSegment => "cycle has a sliding segment",
            Check::OneSided => "cycle involves only one side of the switching manifold",
            Check::NoAttractingSliding => "no attracting sliding region",
            Check::ImpactsOnce => "one impact per period",
            Check::VirtualEquilibriumRight => "virtual equilibrium has positive x",
            Check::ImpulseOnce => "one impulse per period",
            Check::SwitchesTwice => "two hysteresis switches per period",
            Check::DelayedSwitchesTwice => "two delayed switches per period",
            Check::CrossesBothManifolds => "cycle crosses both manifolds four times",
            Check::ShallowPenetration => "x_max much smaller than amplitude",
        }
    }

    /// Evaluate on `cycle` of `sys`; returns pass flag and a short detail.
    pub fn evaluate(self, sys: &SystemDef, cycle: &LimitCycle) -> (bool, String) {
        let mu = cycle.mu;
        let crossings = |coord: Option<usize>| {
            cycle
                .events
                .iter()
                .filter(|e| e.kind == EventKind::Crossing)
                .filter(|e| match coord {
                    Some(c) => e.location[c].abs() <= 1e-10,
                    None => true,
                })
                .count()
        };
        match self {
            Check::Stable => {
                let m = cycle.multiplier;
                (m.abs() < 1.0, format!("multiplier {m:.6}"))
            }
            Check::CrossesManifoldTwice => {
                let n = crossings(None);
                (n == 2, format!("{n} crossings"))
            }
            Check::EncirclesUnstableFocus => {
                let foci: Vec<Vec2> = (0..sys.pieces().len())
                    .filter_map(|i| equilibria(sys, i, mu).ok())
                    .flatten()
                    .filter(|e| e.kind == EquilibriumKind::UnstableFocus && e.admissibility != Admissibility::Virtual)
                    .map(|e| e.location)
                    .collect();
                let inside = foci.iter().any(|&p| winding_number(cycle, p) != 0);
                (inside, format!("{} non-virtual unstable foci, enclosed: {inside}", foci.len()))
            }
            Check::HasSlidingSegment => {
                let n = cycle.count_events(EventKind::SlidingEntry);
                (n >= 1 && cycle.has_sliding(), format!("{n} sliding entries"))
            }
            Check::OneSided => {
                let worst = cycle.samples.iter().filter(|s| !s.sliding).map(|s| s.x).fold(f64::NEG_INFINITY, f64::max);
                (worst < 1e-10, format!("max x off the manifold {worst:e}"))
            }
            Check::NoAttractingSliding => {
                let (lo, hi) = y_extent(cycle);
                let bad = (0..1000)
                    .map(|k| lo + (hi - lo) * k as f64 / 999.0)
                    .filter(|&y| matches!(classify_manifold_point(sys, y, mu), Ok(ManifoldPoint::AttractingSliding)))
                    .count();
                (bad == 0, format!("{bad} attracting sliding points among 1000"))
            }
            Check::ImpactsOnce => {
                let n = cycle.count_events(EventKind::Impact);
                (n == 1, format!("{n} impacts"))
            }
            Check::VirtualEquilibriumRight => {
                let eqs = equilibria(sys, 0, mu).unwrap_or_default();
                let ok = !eqs.is_empty()
                    && eqs.iter().all(|e| e.admissibility == Admissibility::Virtual && e.location[0] > 0.0);
                (ok, format!("equilibria {:?}", eqs.iter().map(|e| e.location).collect::<Vec<_>>()))
            }
            Check::ImpulseOnce => {
                let n = cycle.count_events(EventKind::Impulse);
                (n == 1, format!("{n} impulses"))
            }
            Check::SwitchesTwice => {
                let n = cycle.count_events(EventKind::HysteresisSwitch);
                (n == 2, format!("{n} switches"))
            }
            Check::DelayedSwitchesTwice => {
                let n = cycle.count_events(EventKind::DelayedSwitch);
                (n == 2, format!("{n} delayed switches"))
            }
            Check::CrossesBothManifolds => {
                let (nx, ny) = (crossings(Some(0)), crossings(Some(1)));
                (nx == 2 && ny == 2, format!("{nx} crossings of x=0, {ny} of y=0"))
            }
            Check::ShallowPenetration => {
                let ok = cycle.x_max < 0.1 * cycle.amplitude;
                (ok, format!("x_max {:e}, amplitude {:e}", cycle.x_max, cycle.amplitude))
            }
        }
    }
}

fn y_extent(cycle: &LimitCycle) -> (f64, f64) {
    cycle
        .samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.y), hi.max(s.y)))
}

/// Winding number of the sampled cycle around `p`.
pub fn winding_number(cycle: &LimitCycle, p: Vec2) -> i32 {
    let mut total = 0.0;
    let pts: Vec<Vec2> = cycle.samples.iter().map(|s| [s.x - p[0], s.y - p[1]]).collect();
    for w in pts.windows(2) {
        let a = w[0][1].atan2(w[0][0]);
        let b = w[1][1].atan2(w[1][0]);
        let mut d = b - a;
        if d > PI {
            d -= 2.0 * PI;
        } else if d < -PI {
            d += 2.0 * PI;
        }
        total += d;
    }
    (total / (2.0 * PI)).round() as i32
}

type Builder = fn(f64) -> Result<SystemDef>;

/// One reference system.
#[derive(Clone)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub name: &'static str,
    pub expected_a: Ratio,
    pub expected_b: Ratio,
    /// Default sweep: `(mu_min, mu_max, points)`, log-spaced.
    pub mu_sweep: (f64, f64, usize),
    pub mu_range: (f64, f64),
    /// All pieces and resets linear in `(x, y)` with affine `mu` dependence.
    pub homogeneous: bool,
    pub checks: &'static [Check],
    pub notes: &'static str,
    builder: Builder,
    section: fn(f64) -> Section,
    seed: fn(f64) -> Vec2,
    period_scale: fn(f64) -> f64,
}

impl fmt::Debug for CatalogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CatalogEntry").field("id", &self.id).field("name", &self.name).finish()
    }
}

impl CatalogEntry {
    pub fn build(&self, mu: f64) -> Result<SystemDef> {
        if !(mu >= self.mu_range.0 && mu <= self.mu_range.1) || !mu.is_finite() {
            return Err(HlbError::Domain(format!(
                "mu = {mu} outside [{}, {}] for entry {}",
                self.mu_range.0, self.mu_range.1, self.id
            )));
        }
        (self.builder)(mu)
    }

    pub fn section(&self, mu: f64) -> Section {
        (self.section)(mu)
    }

    /// A point near the bifurcating cycle.
    pub fn seed_point(&self, mu: f64) -> Vec2 {
        (self.seed)(mu)
    }

    /// Rough cycle period, used to size time steps and settle runs.
    pub fn period_scale(&self, mu: f64) -> f64 {
        (self.period_scale)(mu)
    }

    /// Log-spaced default sweep grid.
    pub fn default_grid(&self) -> Vec<f64> {
        log_grid(self.mu_sweep.0, self.mu_sweep.1, self.mu_sweep.2)
    }

    pub fn info(&self) -> EntryInfo {
        EntryInfo {
            id: self.id,
            name: self.name,
            expected_a: self.expected_a,
            expected_b: self.expected_b,
            a: self.expected_a.value(),
            b: self.expected_b.value(),
            mu_sweep: self.mu_sweep,
            mu_range: self.mu_range,
            homogeneous: self.homogeneous,
            qualitative_checks: self.checks.iter().map(|c| c.name()).collect(),
            notes: self.notes,
        }
    }
}

/// Serializable entry metadata.
#[derive(Debug, Clone, Serialize)]
pub struct EntryInfo {
    pub id: &'static str,
    pub name: &'static str,
    pub expected_a: Ratio,
    pub expected_b: Ratio,
    pub a: f64,
    pub b: f64,
    pub mu_sweep: (f64, f64, usize),
    pub mu_range: (f64, f64),
    pub homogeneous: bool,
    pub qualitative_checks: Vec<&'static str>,
    pub notes: &'static str,
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let ratio = hi / lo;
    (0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => lo * ratio.powf(i as f64 / (n - 1) as f64),
        })
        .collect()
}

fn section(anchor: Vec2, direction: Vec2, orientation: f64, half_line: bool) -> Section {
    Section::new(anchor, direction, orientation, half_line).expect("catalog sections are valid")
}

/// Negative x-axis, crossed downwards.
fn neg_x_axis_down(_mu: f64) -> Section {
    section([0.0, 0.0], [-1.0, 0.0], 1.0, true)
}

/// Negative x-axis, crossed upwards.
fn neg_x_axis_up(_mu: f64) -> Section {
    section([0.0, 0.0], [-1.0, 0.0], -1.0, true)
}

/// Full line `x = 0`, crossed from right to left.
fn leftward_line(_mu: f64) -> Section {
    section([0.0, 0.0], [0.0, 1.0], 1.0, false)
}

fn left_right(name: &str, l: SmoothPiece, r: SmoothPiece, switching: SwitchingStructure) -> Result<SystemDef> {
    SystemDef::new(name, vec![l, r], switching, None, (-1.0, 1.0))
}

fn affine(name: &str, region: Region, a: [[f64; 2]; 2], b: Vec2) -> SmoothPiece {
    SmoothPiece::affine(name, region, a, b)
}

// Shared left piece of the boundary-equilibrium entries: unstable focus
// (0.25 +- 0.968i) at (-mu, -mu/2).
const FOCUS_L: [[f64; 2]; 2] = [[0.5, -1.0], [1.0, 0.0]];

fn build_hopf(_mu: f64) -> Result<SystemDef> {
    let f = |x: f64, y: f64, mu: f64| {
        let r2 = x * x + y * y;
        [mu * x - y - x * r2, x + mu * y - y * r2]
    };
    let j = |x: f64, y: f64, mu: f64| {
        let r2 = x * x + y * y;
        [[mu - r2 - 2.0 * x * x, -1.0 - 2.0 * x * y], [1.0 - 2.0 * x * y, mu - r2 - 2.0 * y * y]]
    };
    let l = SmoothPiece::new("hopf", Region::Left, Smoothness::Smooth, f).with_jacobian(j);
    let r = SmoothPiece::new("hopf", Region::Right, Smoothness::Smooth, f).with_jacobian(j);
    left_right("Hopf", l, r, SwitchingStructure::Continuous)
}

fn build_1(_mu: f64) -> Result<SystemDef> {
    left_right(
        "focus/focus BEB",
        affine("unstable focus", Region::Left, FOCUS_L, [0.0, 1.0]),
        affine("stable focus", Region::Right, [[-1.0, -1.0], [1.0, 0.0]], [0.0, 1.0]),
        SwitchingStructure::Continuous,
    )
}

/// Entry 1 with the right trace raised to -0.2, which makes the
/// criticality coefficient positive.
pub fn build_1_flipped(_mu: f64) -> Result<SystemDef> {
    left_right(
        "focus/focus BEB (alpha > 0)",
        affine("unstable focus", Region::Left, FOCUS_L, [0.0, 1.0]),
        affine("weak stable focus", Region::Right, [[-0.2, -1.0], [1.0, 0.0]], [0.0, 1.0]),
        SwitchingStructure::Continuous,
    )
}

fn build_2(_mu: f64) -> Result<SystemDef> {
    left_right(
        "focus/node BEB",
        affine("unstable focus", Region::Left, FOCUS_L, [0.0, 1.0]),
        affine("stable node", Region::Right, [[-3.0, -1.0], [1.0, 0.0]], [0.0, 1.0]),
        SwitchingStructure::Continuous,
    )
}

fn build_3(_mu: f64) -> Result<SystemDef> {
    // sliding field on x = 0 is mu - y; saddle of the right piece is virtual
    left_right(
        "generic BEB",
        affine("unstable focus", Region::Left, FOCUS_L, [0.0, 1.0]),
        affine("saddle", Region::Right, [[1.0, 2.0], [1.0, -3.0]], [-1.0, 2.0]),
        SwitchingStructure::Filippov,
    )
}

fn build_4(_mu: f64) -> Result<SystemDef> {
    left_right(
        "degenerate BEB",
        affine("unstable focus", Region::Left, FOCUS_L, [0.0, 1.0]),
        affine("stable focus", Region::Right, [[-1.5, -2.0], [1.0, 0.0]], [0.0, 2.0]),
        SwitchingStructure::Filippov,
    )
}

fn build_5(_mu: f64) -> Result<SystemDef> {
    left_right(
        "slipping foci",
        affine("unstable focus at (0, -mu)", Region::Left, FOCUS_L, [-1.0, 0.0]),
        affine("stable focus at (0, mu)", Region::Right, [[-1.5, -2.0], [1.0, 0.0]], [2.0, 0.0]),
        SwitchingStructure::Filippov,
    )
}

fn build_6(_mu: f64) -> Result<SystemDef> {
    let r = SmoothPiece::new("fold at (0, mu)", Region::Right, Smoothness::Affine, |_, y, mu| [mu - y, 1.0])
        .with_jacobian(|_, _, _| [[0.0, -1.0], [0.0, 0.0]]);
    left_right(
        "slipping focus/fold",
        affine("stable focus at (0, -mu)", Region::Left, [[-0.5, -1.0], [1.0, 0.0]], [-1.0, 0.0]),
        r,
        SwitchingStructure::Filippov,
    )
}

const FOLD_DAMPING: f64 = 0.25;

fn build_7(_mu: f64) -> Result<SystemDef> {
    let l = SmoothPiece::new("fold at (0, -mu)", Region::Left, Smoothness::Affine, |x, y, mu| {
        [-(y + mu) - FOLD_DAMPING * x, -1.0]
    })
    .with_jacobian(|_, _, _| [[-FOLD_DAMPING, -1.0], [0.0, 0.0]]);
    let r = SmoothPiece::new("fold at (0, mu)", Region::Right, Smoothness::Affine, |x, y, mu| {
        [-(y - mu) - FOLD_DAMPING * x, 1.0]
    })
    .with_jacobian(|_, _, _| [[-FOLD_DAMPING, -1.0], [0.0, 0.0]]);
    left_right("slipping folds", l, r, SwitchingStructure::Filippov)
}

const FIXED_FOCI_QUAD: f64 = 1.0;

fn build_8(_mu: f64) -> Result<SystemDef> {
    // traces chosen so that the criticality coefficient vanishes at mu = 0
    let l = SmoothPiece::new("focus at origin", Region::Left, Smoothness::Smooth, |x, y, mu| {
        [(0.2 + mu) * x - y + FIXED_FOCI_QUAD * x * x, x]
    })
    .with_jacobian(|x, _, mu| [[0.2 + mu + 2.0 * FIXED_FOCI_QUAD * x, -1.0], [1.0, 0.0]]);
    left_right(
        "fixed foci",
        l,
        affine("stable focus at origin", Region::Right, [[-0.4, -2.0], [2.0, 0.0]], [0.0, 0.0]),
        SwitchingStructure::Filippov,
    )
    .map(|s| s.with_search_box([-0.5, 0.5, -0.5, 0.5]))
}

fn build_9(_mu: f64) -> Result<SystemDef> {
    let l = SmoothPiece::new("focus at origin", Region::Left, Smoothness::Affine, |x, y, mu| [mu * x - y, x])
        .with_jacobian(|_, _, mu| [[mu, -1.0], [1.0, 0.0]]);
    let r = SmoothPiece::new("fold at origin", Region::Right, Smoothness::Affine, |x, y, _| [-y - x, 1.0])
        .with_jacobian(|_, _, _| [[-1.0, -1.0], [0.0, 0.0]]);
    left_right("fixed focus/fold", l, r, SwitchingStructure::Filippov)
}

/// Left piece of the invisible two-fold; `c` scales the linear `x` term.
fn two_fold_left(c: fn(f64) -> f64) -> SmoothPiece {
    SmoothPiece::new("invisible fold at origin", Region::Left, Smoothness::Smooth, move |x, y, mu| {
        [-y + c(mu) * x + x * x, -1.0]
    })
    .with_jacobian(move |x, _, mu| [[c(mu) + 2.0 * x, -1.0], [0.0, 0.0]])
}

fn two_fold_right() -> SmoothPiece {
    SmoothPiece::new("invisible fold at origin", Region::Right, Smoothness::Affine, |_, y, _| [-y, 1.0])
        .with_jacobian(|_, _, _| [[0.0, -1.0], [0.0, 0.0]])
}

fn build_10(_mu: f64) -> Result<SystemDef> {
    left_right("fixed folds", two_fold_left(|mu| mu), two_fold_right(), SwitchingStructure::Filippov)
}

fn impacting(name: &str, shift: f64, trace: f64, r: f64) -> Result<SystemDef> {
    // equilibrium at (shift * mu, 0)
    let piece = affine("linear oscillator", Region::Left, [[0.0, 1.0], [-1.0, trace]], [0.0, shift]);
    let law: ImpactLaw = Arc::new(move |y, _| r * y);
    SystemDef::new(name, vec![piece], SwitchingStructure::Impact, Some(Reset::Impact(law)), (-1.0, 1.0))
}

fn build_11(_mu: f64) -> Result<SystemDef> {
    impacting("impacting admissible focus", -1.0, 0.2, 0.5)
}

fn build_12(_mu: f64) -> Result<SystemDef> {
    impacting("impacting virtual focus", 1.0, -0.4, 1.5)
}

fn build_13(_mu: f64) -> Result<SystemDef> {
    impacting("impacting virtual node", 1.0, -3.0, 2.0)
}

const IMPULSE_DECAY: f64 = 0.1;
const IMPULSE_ANGLE: f64 = 7.0 * PI / 6.0;

fn build_14(_mu: f64) -> Result<SystemDef> {
    let piece = affine(
        "clockwise unstable focus",
        Region::Left,
        [[IMPULSE_DECAY, 1.0], [-1.0, IMPULSE_DECAY]],
        [0.0, 0.0],
    );
    let (c, s) = (IMPULSE_ANGLE.cos(), IMPULSE_ANGLE.sin());
    let target = Line { anchor: [0.0, 0.0], normal: [-s, c] };
    // flight from the target ray to the positive y-axis turns by
    // IMPULSE_ANGLE - pi/2 and stretches radii by exp(decay * angle)
    let gain = (-IMPULSE_DECAY * (IMPULSE_ANGLE - PI / 2.0)).exp();
    let map: ImpulseMap = Arc::new(move |z, mu| {
        let y = z[1];
        let rho = y * gain * (1.0 + mu - y);
        [rho * c, rho * s]
    });
    SystemDef::new(
        "impulsive",
        vec![piece],
        SwitchingStructure::Impulse { target },
        Some(Reset::Impulse(map)),
        (-1.0, 1.0),
    )
}

fn relay_pair() -> (SmoothPiece, SmoothPiece) {
    (
        SmoothPiece::new("relay left", Region::Left, Smoothness::Affine, |_, y, _| [1.0, -1.0 - y])
            .with_jacobian(|_, _, _| [[0.0, 0.0], [0.0, -1.0]]),
        SmoothPiece::new("relay right", Region::Right, Smoothness::Affine, |_, y, _| [-1.0, 1.0 - y])
            .with_jacobian(|_, _, _| [[0.0, 0.0], [0.0, -1.0]]),
    )
}

/// The regularised entries fall back to their Filippov base for `mu <= 0`.
fn regularised(mu: f64, kind: SwitchingStructure) -> SwitchingStructure {
    if mu > 0.0 {
        kind
    } else {
        SwitchingStructure::Filippov
    }
}

fn build_15(mu: f64) -> Result<SystemDef> {
    let (l, r) = relay_pair();
    left_right("hysteretic pseudo-equilibrium", l, r, regularised(mu, SwitchingStructure::Hysteresis))
}

fn build_16(mu: f64) -> Result<SystemDef> {
    let (l, r) = relay_pair();
    left_right("time-delayed pseudo-equilibrium", l, r, regularised(mu, SwitchingStructure::Delay))
}

/// Linear coefficient of the attracting two-fold underlying entries 17, 18.
const STABLE_TWO_FOLD: f64 = -0.5;

fn build_17(mu: f64) -> Result<SystemDef> {
    left_right(
        "hysteretic two-fold",
        two_fold_left(|_| STABLE_TWO_FOLD),
        two_fold_right(),
        regularised(mu, SwitchingStructure::Hysteresis),
    )
}

fn build_18(mu: f64) -> Result<SystemDef> {
    left_right(
        "time-delayed two-fold",
        two_fold_left(|_| STABLE_TWO_FOLD),
        two_fold_right(),
        regularised(mu, SwitchingStructure::Delay),
    )
}

fn build_19(_mu: f64) -> Result<SystemDef> {
    let q = |x_pos, y_pos| Region::Quadrant { x_pos, y_pos };
    let pieces = vec![
        SmoothPiece::new("Q1", q(true, true), Smoothness::Affine, |_, _, mu| [-1.0, 1.0 + mu])
            .with_jacobian(|_, _, _| [[0.0; 2]; 2]),
        SmoothPiece::new("Q2", q(false, true), Smoothness::Affine, |_, y, _| [-1.0, -1.0 - 0.5 * y])
            .with_jacobian(|_, _, _| [[0.0, 0.0], [0.0, -0.5]]),
        SmoothPiece::new("Q3", q(false, false), Smoothness::Affine, |_, _, _| [1.0, -1.0])
            .with_jacobian(|_, _, _| [[0.0; 2]; 2]),
        SmoothPiece::new("Q4", q(true, false), Smoothness::Affine, |_, _, _| [1.0, 1.0])
            .with_jacobian(|_, _, _| [[0.0; 2]; 2]),
    ];
    SystemDef::new("intersecting discontinuity surfaces", pieces, SwitchingStructure::TwoManifolds, None, (-1.0, 1.0))
}

fn build_20(_mu: f64) -> Result<SystemDef> {
    let r = SmoothPiece::new("square-root piece", Region::Right, Smoothness::SqrtSingular, |x, y, mu| {
        [-x - y - x.abs().sqrt(), x + mu]
    });
    left_right(
        "square-root singularity",
        affine("unstable focus", Region::Left, FOCUS_L, [0.0, 1.0]),
        r,
        SwitchingStructure::Continuous,
    )
}

const TWO_PI: f64 = 2.0 * PI;

fn unit_period(_mu: f64) -> f64 {
    TWO_PI
}

const NO_NOTES: &str = "";

macro_rules! entry {
    ($id:expr, $name:expr, ($an:expr, $ad:expr), ($bn:expr, $bd:expr), $build:expr, $sec:expr, $seed:expr, $period:expr,
     homogeneous: $hom:expr, checks: $checks:expr $(, sweep: $sweep:expr)? $(, range: $range:expr)? $(, notes: $notes:expr)?) => {{
        #[allow(unused_mut, unused_assignments)]
        let mut sweep = (1e-4, 1e-2, 8);
        $(sweep = $sweep;)?
        #[allow(unused_mut, unused_assignments)]
        let mut range = (-0.5, 0.5);
        $(range = $range;)?
        #[allow(unused_mut, unused_assignments)]
        let mut notes = NO_NOTES;
        $(notes = $notes;)?
        CatalogEntry {
            id: $id,
            name: $name,
            expected_a: Ratio::new($an, $ad),
            expected_b: Ratio::new($bn, $bd),
            mu_sweep: sweep,
            mu_range: range,
            homogeneous: $hom,
            checks: $checks,
            notes,
            builder: $build,
            section: $sec,
            seed: $seed,
            period_scale: $period,
        }
    }};
}

use Check::*;

/// All 21 entries in table order.
pub fn entries() -> Vec<CatalogEntry> {
    vec![
        entry!("H", "Hopf", (1, 2), (0, 1), build_hopf,
            |_| section([0.0, 0.0], [1.0, 0.0], 1.0, true), |mu| [1.05 * mu.sqrt(), 0.0], unit_period,
            homogeneous: false, checks: &[Stable]),
        entry!("1", "focus/focus BEB", (1, 1), (0, 1), build_1, neg_x_axis_down, |mu| [-3.0 * mu, 0.0], unit_period,
            homogeneous: true, checks: &[Stable, CrossesManifoldTwice, EncirclesUnstableFocus],
            notes: "alpha < 0; entry 1 with right trace -0.2 (alpha > 0) has no stable local cycle"),
        entry!("2", "focus/node BEB", (1, 1), (0, 1), build_2, neg_x_axis_down, |mu| [-3.0 * mu, 0.0], unit_period,
            homogeneous: true, checks: &[Stable, CrossesManifoldTwice, EncirclesUnstableFocus]),
        entry!("3", "generic BEB", (1, 1), (0, 1), build_3, neg_x_axis_down, |mu| [-2.0 * mu, 0.0], unit_period,
            homogeneous: true, checks: &[Stable, HasSlidingSegment, OneSided, EncirclesUnstableFocus]),
        entry!("4", "degenerate BEB", (1, 1), (0, 1), build_4, neg_x_axis_down, |mu| [-3.0 * mu, 0.0], unit_period,
            homogeneous: true, checks: &[Stable, CrossesManifoldTwice, EncirclesUnstableFocus, NoAttractingSliding]),
        entry!("5", "slipping foci", (1, 1), (0, 1), build_5, neg_x_axis_down, |mu| [-4.0 * mu, 0.0], unit_period,
            homogeneous: true, checks: &[Stable, CrossesManifoldTwice]),
        entry!("6", "slipping focus/fold", (1, 1), (0, 1), build_6, neg_x_axis_down, |mu| [-4.0 * mu, 0.0], unit_period,
            homogeneous: false, checks: &[Stable, CrossesManifoldTwice]),
        entry!("7", "slipping folds", (1, 2), (1, 2), build_7, neg_x_axis_down, |mu| [-3.0 * mu.sqrt(), 0.0],
            |mu| 8.0 * mu.sqrt(),
            homogeneous: false, checks: &[Stable, CrossesManifoldTwice]),
        entry!("8", "fixed foci", (1, 1), (0, 1), build_8, neg_x_axis_down, |mu| [-mu, 0.0], unit_period,
            homogeneous: false, checks: &[Stable, CrossesManifoldTwice]),
        entry!("9", "fixed focus/fold", (1, 1), (0, 1), build_9, neg_x_axis_down, |mu| [-mu, 0.0], unit_period,
            homogeneous: false, checks: &[Stable, CrossesManifoldTwice, EncirclesUnstableFocus]),
        entry!("10", "fixed folds", (1, 2), (1, 2), build_10, neg_x_axis_down, |mu| [-mu.sqrt(), 0.0],
            |mu| 4.0 * mu.sqrt(),
            homogeneous: false, checks: &[Stable, CrossesManifoldTwice]),
        entry!("11", "impacting admissible focus", (1, 1), (0, 1), build_11, neg_x_axis_up, |mu| [-2.0 * mu, 0.0],
            unit_period,
            homogeneous: true, checks: &[Stable, ImpactsOnce, EncirclesUnstableFocus]),
        entry!("12", "impacting virtual focus", (1, 1), (0, 1), build_12, neg_x_axis_up, |mu| [-mu, 0.0], unit_period,
            homogeneous: true, checks: &[Stable, ImpactsOnce, VirtualEquilibriumRight]),
        entry!("13", "impacting virtual node", (1, 1), (0, 1), build_13, neg_x_axis_up, |mu| [-mu, 0.0], unit_period,
            homogeneous: true, checks: &[Stable, ImpactsOnce, VirtualEquilibriumRight]),
        entry!("14", "impulsive", (1, 1), (0, 1), build_14, neg_x_axis_up, |mu| [-mu, 0.0], unit_period,
            homogeneous: false, checks: &[Stable, ImpulseOnce],
            notes: "impulse lands on the ray at 210 degrees; radial factor (1 + mu - y)"),
        entry!("15", "hysteretic pseudo-equilibrium", (1, 1), (1, 1), build_15, leftward_line, |mu| [0.5 * mu, 0.0],
            |mu| 4.0 * mu,
            homogeneous: false, checks: &[Stable, SwitchesTwice], range: (-0.5, 0.5),
            notes: "mu is the hysteresis half-width; mu <= 0 gives the Filippov base system"),
        entry!("16", "time-delayed pseudo-equilibrium", (1, 1), (1, 1), build_16, leftward_line, |mu| [0.5 * mu, 0.0],
            |mu| 4.0 * mu,
            homogeneous: false, checks: &[Stable, DelayedSwitchesTwice],
            notes: "mu is the switching delay; mu <= 0 gives the Filippov base system"),
        entry!("17", "hysteretic two-fold", (1, 3), (1, 3), build_17, leftward_line, |mu| [mu, 2.0 * mu.cbrt()],
            |mu| 8.0 * mu.cbrt(),
            homogeneous: false, checks: &[Stable, SwitchesTwice], sweep: (1e-6, 1e-3, 8),
            notes: "mu is the hysteresis half-width; mu <= 0 gives the Filippov base system"),
        entry!("18", "time-delayed two-fold", (1, 2), (1, 2), build_18, leftward_line, |mu| [mu, 2.0 * mu.sqrt()],
            |mu| 8.0 * mu.sqrt(),
            homogeneous: false, checks: &[Stable, DelayedSwitchesTwice],
            notes: "mu is the switching delay; mu <= 0 gives the Filippov base system"),
        entry!("19", "intersecting discontinuity surfaces", (1, 1), (1, 1), build_19, neg_x_axis_down,
            |mu| [-4.0 * mu, 0.0], |mu| 16.0 * mu,
            homogeneous: false, checks: &[Stable, CrossesBothManifolds]),
        entry!("20", "square-root singularity", (1, 1), (0, 1), build_20, neg_x_axis_down, |mu| [-3.0 * mu, 0.0],
            unit_period,
            homogeneous: false, checks: &[Stable, CrossesManifoldTwice, ShallowPenetration]),
    ]
}

/// Rows `(id, name, a, b)` in table order.
pub fn list_entries() -> Vec<(&'static str, &'static str, Ratio, Ratio)> {
    entries().into_iter().map(|e| (e.id, e.name, e.expected_a, e.expected_b)).collect()
}

pub fn entry(id: &str) -> Result<CatalogEntry> {
    entries().into_iter().find(|e| e.id.eq_ignore_ascii_case(id)).ok_or_else(|| HlbError::UnknownId(id.to_string()))
}

pub fn build_system(id: &str, mu: f64) -> Result<SystemDef> {
    entry(id)?.build(mu)
}

pub fn expected_exponents(id: &str) -> Result<(Ratio, Ratio)> {
    let e = entry(id)?;
    Ok((e.expected_a, e.expected_b))
}

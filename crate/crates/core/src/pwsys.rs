//! Piecewise-smooth planar systems and their local analysis.
//!
//! A [`SystemDef`] bundles the smooth pieces of a vector field with the
//! switching structure that glues them together (continuous, Filippov,
//! impacting, impulsive, hysteretic, time-delayed, or two intersecting
//! manifolds). Everything here is pure; systems are immutable once built
//! and cheap to clone.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{HlbError, Result};
use crate::roots::brent;

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

pub type RhsFn = Arc<dyn Fn(f64, f64, f64) -> Vec2 + Send + Sync>;
pub type JacFn = Arc<dyn Fn(f64, f64, f64) -> Mat2 + Send + Sync>;
pub type ImpactLaw = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type ImpulseMap = Arc<dyn Fn(Vec2, f64) -> Vec2 + Send + Sync>;

/// Index of the piece occupying `x < 0` in single-manifold systems.
pub const LEFT: usize = 0;
/// Index of the piece occupying `x > 0` in single-manifold systems.
pub const RIGHT: usize = 1;

/// Tolerance used to decide that a point sits on a switching manifold.
pub const MANIFOLD_TOL: f64 = 1e-12;

/// Sign condition describing where a piece applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// `x <= 0`
    Left,
    /// `x >= 0`
    Right,
    /// The whole plane.
    Whole,
    /// One quadrant cut out by `x = 0` and `y = 0`.
    Quadrant { x_pos: bool, y_pos: bool },
}

impl Region {
    /// Closure membership with slack `tol`.
    pub fn contains(&self, x: f64, y: f64, tol: f64) -> bool {
        match *self {
            Region::Left => x <= tol,
            Region::Right => x >= -tol,
            Region::Whole => true,
            Region::Quadrant { x_pos, y_pos } => {
                let ox = if x_pos { x >= -tol } else { x <= tol };
                let oy = if y_pos { y >= -tol } else { y <= tol };
                ox && oy
            }
        }
    }

    /// Strict interior membership, points within `tol` of a boundary excluded.
    pub fn interior(&self, x: f64, y: f64, tol: f64) -> bool {
        match *self {
            Region::Left => x < -tol,
            Region::Right => x > tol,
            Region::Whole => true,
            Region::Quadrant { x_pos, y_pos } => {
                let ox = if x_pos { x > tol } else { x < -tol };
                let oy = if y_pos { y > tol } else { y < -tol };
                ox && oy
            }
        }
    }

    /// Signed side of `x = 0` the region lies on (`+1`, `-1`, or `0` for the whole plane).
    pub fn x_side(&self) -> f64 {
        match *self {
            Region::Left => -1.0,
            Region::Right => 1.0,
            Region::Whole => 0.0,
            Region::Quadrant { x_pos, .. } => {
                if x_pos {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothness {
    Linear,
    Affine,
    Smooth,
    SqrtSingular,
}

/// One smooth component `F_i(x, y; mu)` of a piecewise-smooth field.
#[derive(Clone)]
pub struct SmoothPiece {
    name: String,
    rhs: RhsFn,
    jacobian: Option<JacFn>,
    region: Region,
    smoothness: Smoothness,
}

impl fmt::Debug for SmoothPiece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothPiece")
            .field("name", &self.name)
            .field("region", &self.region)
            .field("smoothness", &self.smoothness)
            .finish()
    }
}

impl SmoothPiece {
    pub fn new<F>(name: impl Into<String>, region: Region, smoothness: Smoothness, rhs: F) -> Self
    where
        F: Fn(f64, f64, f64) -> Vec2 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            rhs: Arc::new(rhs),
            jacobian: None,
            region,
            smoothness,
        }
    }

    /// Affine piece `A (x, y) + mu * b`.
    pub fn affine(name: impl Into<String>, region: Region, a: Mat2, b: Vec2) -> Self {
        let smooth = if b == [0.0, 0.0] {
            Smoothness::Linear
        } else {
            Smoothness::Affine
        };
        Self::new(name, region, smooth, move |x, y, mu| {
            [
                a[0][0] * x + a[0][1] * y + b[0] * mu,
                a[1][0] * x + a[1][1] * y + b[1] * mu,
            ]
        })
        .with_jacobian(move |_, _, _| a)
    }

    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(f64, f64, f64) -> Mat2 + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64, mu: f64) -> Vec2 {
        (self.rhs)(x, y, mu)
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    /// Analytic Jacobian when supplied, central differences otherwise.
    ///
    /// Square-root singular pieces are differenced one-sidedly into their
    /// region so the stencil never straddles `x = 0`.
    pub fn jacobian(&self, x: f64, y: f64, mu: f64) -> Mat2 {
        if let Some(j) = &self.jacobian {
            return j(x, y, mu);
        }
        self.fd_jacobian(x, y, mu)
    }

    pub fn fd_jacobian(&self, x: f64, y: f64, mu: f64) -> Mat2 {
        let hx = 1e-6 * (1.0 + x.abs());
        let hy = 1e-6 * (1.0 + y.abs());
        let mut jac = [[0.0; 2]; 2];
        let side = self.region.x_side();
        if self.smoothness == Smoothness::SqrtSingular && x.abs() < 2.0 * hx && side != 0.0 {
            // one-sided in x, pointing into the region
            let h = side * hx;
            let f0 = self.eval(x, y, mu);
            let f1 = self.eval(x + h, y, mu);
            let f2 = self.eval(x + 2.0 * h, y, mu);
            for i in 0..2 {
                jac[i][0] = (-3.0 * f0[i] + 4.0 * f1[i] - f2[i]) / (2.0 * h);
            }
        } else {
            let fp = self.eval(x + hx, y, mu);
            let fm = self.eval(x - hx, y, mu);
            for i in 0..2 {
                jac[i][0] = (fp[i] - fm[i]) / (2.0 * hx);
            }
        }
        let fp = self.eval(x, y + hy, mu);
        let fm = self.eval(x, y - hy, mu);
        for i in 0..2 {
            jac[i][1] = (fp[i] - fm[i]) / (2.0 * hy);
        }
        jac
    }
}

/// A straight line `{p : normal . (p - anchor) = 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Line {
    pub anchor: Vec2,
    pub normal: Vec2,
}

impl Line {
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        let n = (self.normal[0].hypot(self.normal[1])).max(f64::MIN_POSITIVE);
        (self.normal[0] * (p[0] - self.anchor[0]) + self.normal[1] * (p[1] - self.anchor[1])) / n
    }
}

/// How the smooth pieces are glued together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SwitchingStructure {
    /// Single manifold `x = 0`, field continuous across it.
    Continuous,
    /// Single manifold `x = 0`, discontinuous field with sliding.
    Filippov,
    /// Flow in `x <= 0`, reset `y -> -phi(y; mu)` on `x = 0`.
    Impact,
    /// Flow in `x <= 0`, planar map from `x = 0` onto `target`.
    Impulse { target: Line },
    /// Thresholds `x = -mu` (switch to left) and `x = +mu` (switch to right).
    Hysteresis,
    /// The field switches `mu` time units after each crossing of `x = 0`.
    Delay,
    /// Manifolds `x = 0` and `y = 0`, one piece per quadrant.
    TwoManifolds,
}

impl SwitchingStructure {
    pub fn label(&self) -> &'static str {
        match self {
            SwitchingStructure::Continuous => "continuous",
            SwitchingStructure::Filippov => "filippov",
            SwitchingStructure::Impact => "impact",
            SwitchingStructure::Impulse { .. } => "impulse",
            SwitchingStructure::Hysteresis => "hysteresis",
            SwitchingStructure::Delay => "delay",
            SwitchingStructure::TwoManifolds => "two_manifolds",
        }
    }

    /// True when the system is two pieces split by `x = 0`.
    pub fn is_left_right(&self) -> bool {
        matches!(
            self,
            SwitchingStructure::Continuous
                | SwitchingStructure::Filippov
                | SwitchingStructure::Hysteresis
                | SwitchingStructure::Delay
        )
    }
}

#[derive(Clone)]
pub enum Reset {
    Impact(ImpactLaw),
    Impulse(ImpulseMap),
}

impl fmt::Debug for Reset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reset::Impact(_) => f.write_str("Reset::Impact(..)"),
            Reset::Impulse(_) => f.write_str("Reset::Impulse(..)"),
        }
    }
}

/// Quadrant piece index for [`SwitchingStructure::TwoManifolds`]
/// (0: x>0,y>0; 1: x<0,y>0; 2: x<0,y<0; 3: x>0,y<0).
pub fn quadrant_index(x_pos: bool, y_pos: bool) -> usize {
    match (x_pos, y_pos) {
        (true, true) => 0,
        (false, true) => 1,
        (false, false) => 2,
        (true, false) => 3,
    }
}

/// A complete piecewise-smooth planar system.
#[derive(Clone, Debug)]
pub struct SystemDef {
    inner: Arc<SystemInner>,
}

#[derive(Debug)]
struct SystemInner {
    name: String,
    pieces: Vec<SmoothPiece>,
    switching: SwitchingStructure,
    reset: Option<Reset>,
    mu_range: (f64, f64),
    search_box: [f64; 4],
}

impl SystemDef {
    /// Validates the piece layout against the switching structure.
    pub fn new(
        name: impl Into<String>,
        pieces: Vec<SmoothPiece>,
        switching: SwitchingStructure,
        reset: Option<Reset>,
        mu_range: (f64, f64),
    ) -> Result<Self> {
        let name = name.into();
        match switching {
            s if s.is_left_right() => {
                if pieces.len() != 2
                    || pieces[LEFT].region != Region::Left
                    || pieces[RIGHT].region != Region::Right
                {
                    return Err(HlbError::Domain(format!(
                        "{name}: {} systems need a Left and a Right piece",
                        s.label()
                    )));
                }
            }
            SwitchingStructure::Impact => {
                if pieces.len() != 1 || pieces[0].region != Region::Left {
                    return Err(HlbError::Domain(format!("{name}: impact systems have one piece on x <= 0")));
                }
                if !matches!(reset, Some(Reset::Impact(_))) {
                    return Err(HlbError::Domain(format!("{name}: impact systems need an impact law")));
                }
            }
            SwitchingStructure::Impulse { .. } => {
                if pieces.len() != 1 || pieces[0].region != Region::Left {
                    return Err(HlbError::Domain(format!("{name}: impulse systems have one piece on x <= 0")));
                }
                if !matches!(reset, Some(Reset::Impulse(_))) {
                    return Err(HlbError::Domain(format!("{name}: impulse systems need an impulse map")));
                }
            }
            SwitchingStructure::TwoManifolds => {
                let ok = pieces.len() == 4
                    && pieces.iter().enumerate().all(|(i, p)| match p.region {
                        Region::Quadrant { x_pos, y_pos } => quadrant_index(x_pos, y_pos) == i,
                        _ => false,
                    });
                if !ok {
                    return Err(HlbError::Domain(format!(
                        "{name}: two-manifold systems need four quadrant pieces in order"
                    )));
                }
            }
            _ => unreachable!(),
        }
        if !(mu_range.0 <= mu_range.1) {
            return Err(HlbError::Domain(format!("{name}: empty mu range")));
        }
        Ok(Self {
            inner: Arc::new(SystemInner {
                name,
                pieces,
                switching,
                reset,
                mu_range,
                search_box: [-1.0, 1.0, -1.0, 1.0],
            }),
        })
    }

    /// Bounding box `[xmin, xmax, ymin, ymax]` used to seed equilibrium searches.
    pub fn with_search_box(self, bbox: [f64; 4]) -> Self {
        let inner = &self.inner;
        Self {
            inner: Arc::new(SystemInner {
                name: inner.name.clone(),
                pieces: inner.pieces.clone(),
                switching: inner.switching,
                reset: inner.reset.clone(),
                mu_range: inner.mu_range,
                search_box: bbox,
            }),
        }
    }

    pub fn name(&self) -> &str {
        &self.inner.name
    }

    pub fn pieces(&self) -> &[SmoothPiece] {
        &self.inner.pieces
    }

    pub fn piece(&self, id: usize) -> Result<&SmoothPiece> {
        self.inner
            .pieces
            .get(id)
            .ok_or_else(|| HlbError::Domain(format!("{}: no piece {id}", self.inner.name)))
    }

    pub fn switching(&self) -> SwitchingStructure {
        self.inner.switching
    }

    pub fn reset(&self) -> Option<&Reset> {
        self.inner.reset.as_ref()
    }

    pub fn mu_range(&self) -> (f64, f64) {
        self.inner.mu_range
    }

    pub fn search_box(&self) -> [f64; 4] {
        self.inner.search_box
    }

    pub fn check_mu(&self, mu: f64) -> Result<()> {
        let (lo, hi) = self.inner.mu_range;
        if !mu.is_finite() || mu < lo || mu > hi {
            return Err(HlbError::Domain(format!(
                "{}: mu = {mu} outside [{lo}, {hi}]",
                self.inner.name
            )));
        }
        Ok(())
    }

    /// Piece whose region contains `(x, y)` (ties on a manifold go to the
    /// lower index).
    pub fn piece_at(&self, x: f64, y: f64) -> usize {
        match self.inner.switching {
            SwitchingStructure::TwoManifolds => quadrant_index(x > 0.0, y > 0.0),
            SwitchingStructure::Impact | SwitchingStructure::Impulse { .. } => 0,
            _ => {
                if x > 0.0 {
                    RIGHT
                } else {
                    LEFT
                }
            }
        }
    }

    /// Structural invariants at one parameter value.
    pub fn check_invariants(&self, mu: f64) -> Result<()> {
        self.check_mu(mu)?;
        let ys: Vec<f64> = (0..41).map(|i| -1.0 + 0.05 * i as f64).collect();
        match self.inner.switching {
            SwitchingStructure::Continuous => {
                for &y in &ys {
                    let fl = self.inner.pieces[LEFT].eval(0.0, y, mu);
                    let fr = self.inner.pieces[RIGHT].eval(0.0, y, mu);
                    let d = (fl[0] - fr[0]).abs().max((fl[1] - fr[1]).abs());
                    if d > 1e-12 * (1.0 + fl[0].abs().max(fl[1].abs())) {
                        return Err(HlbError::ModelInconsistency(format!(
                            "{}: field discontinuous at (0, {y}): {fl:?} vs {fr:?}",
                            self.inner.name
                        )));
                    }
                }
            }
            SwitchingStructure::Impact => {
                if let Some(Reset::Impact(phi)) = &self.inner.reset {
                    if phi(0.0, mu).abs() > 1e-14 {
                        return Err(HlbError::ModelInconsistency(format!(
                            "{}: phi(0) = {} != 0",
                            self.inner.name,
                            phi(0.0, mu)
                        )));
                    }
                    for &y in ys.iter().filter(|&&y| y > 0.0) {
                        if phi(y, mu) <= 0.0 {
                            return Err(HlbError::ModelInconsistency(format!(
                                "{}: phi({y}) <= 0",
                                self.inner.name
                            )));
                        }
                    }
                }
            }
            SwitchingStructure::Hysteresis | SwitchingStructure::Delay if mu <= 0.0 => {
                return Err(HlbError::Domain(format!(
                    "{}: hysteresis/delay regularisation needs mu > 0",
                    self.inner.name
                )));
            }
            _ => {}
        }
        for p in &self.inner.pieces {
            for &y in &ys {
                let x = 0.5 * p.region.x_side();
                let f = p.eval(x, y, mu);
                if !f[0].is_finite() || !f[1].is_finite() {
                    return Err(HlbError::Numeric(format!(
                        "{}: piece {} non-finite at ({x}, {y})",
                        self.inner.name, p.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Evaluate one piece at a point of its region closure.
pub fn evaluate_field(sys: &SystemDef, piece_id: usize, x: f64, y: f64, mu: f64) -> Result<Vec2> {
    sys.check_mu(mu)?;
    let piece = sys.piece(piece_id)?;
    if !piece.region.contains(x, y, MANIFOLD_TOL) {
        return Err(HlbError::Domain(format!(
            "({x}, {y}) outside the region of piece {}",
            piece.name
        )));
    }
    let f = piece.eval(x, y, mu);
    if !f[0].is_finite() || !f[1].is_finite() {
        return Err(HlbError::Numeric(format!("non-finite field {f:?} at ({x}, {y})")));
    }
    Ok(f)
}

/// Filippov weight `lambda = fL1 / (fL1 - fR1)` of the right field.
pub fn filippov_weight(fl1: f64, fr1: f64) -> f64 {
    fl1 / (fl1 - fr1)
}

/// Sliding vector on `x = 0`: the convex combination of `fl` and `fr`
/// tangent to the manifold.
pub fn sliding_field(fl: Vec2, fr: Vec2) -> Result<Vec2> {
    if fl[0] == fr[0] {
        return Err(HlbError::DegenerateSliding(fl[0]));
    }
    if fl[0] * fr[0] > 0.0 || (fl[0] == 0.0 && fr[0] == 0.0) {
        return Err(HlbError::NotSliding { y: f64::NAN, fl1: fl[0], fr1: fr[0] });
    }
    let ys = (fr[0] * fl[1] - fl[0] * fr[1]) / (fr[0] - fl[0]);
    Ok([0.0, ys])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldPoint {
    CrossingUp,
    CrossingDown,
    AttractingSliding,
    RepellingSliding,
    Tangency,
}

pub fn tangency_tol(fl: Vec2, fr: Vec2) -> f64 {
    let mag = fl[0].hypot(fl[1]).max(fr[0].hypot(fr[1]));
    1e-9 * (1.0 + mag)
}

/// Classify by the normal components of the two adjacent fields.
pub fn classify_normal_components(fl: Vec2, fr: Vec2) -> ManifoldPoint {
    let tol = tangency_tol(fl, fr);
    if fl[0].abs().min(fr[0].abs()) <= tol {
        ManifoldPoint::Tangency
    } else if fl[0] > 0.0 && fr[0] < 0.0 {
        ManifoldPoint::AttractingSliding
    } else if fl[0] < 0.0 && fr[0] > 0.0 {
        ManifoldPoint::RepellingSliding
    } else if fl[0] > 0.0 {
        ManifoldPoint::CrossingUp
    } else {
        ManifoldPoint::CrossingDown
    }
}

/// Classify the manifold point `(0, y)` of a two-piece system.
pub fn classify_manifold_point(sys: &SystemDef, y: f64, mu: f64) -> Result<ManifoldPoint> {
    if !sys.switching().is_left_right() {
        return Err(HlbError::Domain(format!(
            "classification needs a two-piece system, got {}",
            sys.switching().label()
        )));
    }
    let fl = evaluate_field(sys, LEFT, 0.0, y, mu)?;
    let fr = evaluate_field(sys, RIGHT, 0.0, y, mu)?;
    Ok(classify_normal_components(fl, fr))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    Visible,
    Invisible,
}

#[derive(Debug, Clone, Serialize)]
pub struct FoldInfo {
    pub location: Vec2,
    pub piece_id: usize,
    pub visibility: Visibility,
    /// Time derivative of the normal component along the flow at the fold.
    pub curvature: f64,
    /// Set when the root looked non-simple (tangential).
    pub degenerate: bool,
}

/// Visibility from the sign of the curvature relative to the piece's side.
pub fn fold_visibility(region: Region, curvature: f64) -> Visibility {
    if curvature * region.x_side() > 0.0 {
        Visibility::Visible
    } else {
        Visibility::Invisible
    }
}

const FOLD_SCAN: usize = 2000;

/// Golden-section minimum of `|g|` on `[a, b]`.
fn minimise_abs(g: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs()) {
            break;
        }
        if g(c).abs() < g(d).abs() {
            b = d;
        } else {
            a = c;
        }
        c = b - r * (b - a);
        d = a + r * (b - a);
    }
    let m = 0.5 * (a + b);
    (m, g(m).abs())
}

/// Folds of one piece along `x = 0` within `y_window`.
pub fn fold_points(sys: &SystemDef, piece_id: usize, mu: f64, y_window: (f64, f64)) -> Result<Vec<FoldInfo>> {
    sys.check_mu(mu)?;
    let piece = sys.piece(piece_id)?;
    if piece.region == Region::Whole {
        return Err(HlbError::Domain("piece is not adjacent to a manifold".into()));
    }
    let (a, b) = y_window;
    if !(a < b) {
        return Err(HlbError::Domain(format!("empty window [{a}, {b}]")));
    }
    let normal = |y: f64| piece.eval(0.0, y, mu)[0];
    let mut out: Vec<FoldInfo> = Vec::new();
    let dy = (b - a) / FOLD_SCAN as f64;
    let mut y0 = a;
    let mut g0 = normal(y0);
    let push = |y: f64, out: &mut Vec<FoldInfo>| {
        if out.iter().any(|f| (f.location[1] - y).abs() < 1e-12 * (1.0 + y.abs())) {
            return;
        }
        let f = piece.eval(0.0, y, mu);
        let h = 1e-7 * (1.0 + y.abs());
        let dfdy = (normal(y + h) - normal(y - h)) / (2.0 * h);
        let j = piece.jacobian(0.0, y, mu);
        let curvature = j[0][0] * f[0] + j[0][1] * f[1];
        out.push(FoldInfo {
            location: [0.0, y],
            piece_id,
            visibility: fold_visibility(piece.region, curvature),
            curvature,
            degenerate: dfdy.abs() <= 1e-8,
        });
    };
    let mut g_prev = f64::NAN;
    for i in 1..=FOLD_SCAN {
        let y1 = if i == FOLD_SCAN { b } else { a + dy * i as f64 };
        let g1 = normal(y1);
        if g0 == 0.0 {
            push(y0, &mut out);
        } else if g0 * g1 < 0.0 {
            let root = brent(normal, y0, y1, 1e-15, 200)?;
            push(root, &mut out);
        } else if g0 * g_prev > 0.0 && g0.abs() < g_prev.abs() && g0.abs() <= g1.abs() {
            // local minimum of |g| without a sign change: a touching root?
            let (ym, gm) = minimise_abs(&normal, y0 - dy, y1);
            if gm <= 1e-10 {
                push(ym, &mut out);
            }
        }
        g_prev = g0;
        y0 = y1;
        g0 = g1;
    }
    if g0 == 0.0 {
        push(y0, &mut out);
    }
    out.sort_by(|p, q| p.location[1].total_cmp(&q.location[1]));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Eigen {
    Complex { re: f64, im: f64 },
    Real { l1: f64, l2: f64 },
}

impl Eigen {
    pub fn of(m: Mat2) -> Eigen {
        let tr = m[0][0] + m[1][1];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let disc = tr * tr - 4.0 * det;
        if disc < 0.0 {
            Eigen::Complex { re: 0.5 * tr, im: 0.5 * (-disc).sqrt() }
        } else {
            // roots of l^2 - tr l + det, without cancellation
            let s = disc.sqrt();
            let b = -tr;
            let q = -0.5 * (b + if b >= 0.0 { s } else { -s });
            let (r1, r2) = if q != 0.0 { (q, det / q) } else { (0.0, 0.0) };
            Eigen::Real { l1: r1.max(r2), l2: r1.min(r2) }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    StableFocus,
    UnstableFocus,
    StableNode,
    UnstableNode,
    Saddle,
    Center,
}

impl EquilibriumKind {
    pub fn from_eigen(e: Eigen) -> Self {
        match e {
            Eigen::Complex { re, .. } => {
                if re < 0.0 {
                    EquilibriumKind::StableFocus
                } else if re > 0.0 {
                    EquilibriumKind::UnstableFocus
                } else {
                    EquilibriumKind::Center
                }
            }
            Eigen::Real { l1, l2 } => {
                if l1 * l2 < 0.0 {
                    EquilibriumKind::Saddle
                } else if l1 <= 0.0 && l2 <= 0.0 {
                    EquilibriumKind::StableNode
                } else {
                    EquilibriumKind::UnstableNode
                }
            }
        }
    }

    pub fn is_stable(&self) -> bool {
        matches!(self, EquilibriumKind::StableFocus | EquilibriumKind::StableNode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Admissibility {
    Admissible,
    Virtual,
    Boundary,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumInfo {
    pub location: Vec2,
    pub piece_id: usize,
    pub eigen: Eigen,
    pub kind: EquilibriumKind,
    pub admissibility: Admissibility,
}

fn admissibility(region: Region, p: Vec2) -> Admissibility {
    let on_x = p[0].abs() <= MANIFOLD_TOL;
    let on_y = p[1].abs() <= MANIFOLD_TOL;
    match region {
        Region::Whole => Admissibility::Admissible,
        Region::Left | Region::Right => {
            if on_x {
                Admissibility::Boundary
            } else if region.interior(p[0], p[1], 0.0) {
                Admissibility::Admissible
            } else {
                Admissibility::Virtual
            }
        }
        Region::Quadrant { .. } => {
            if region.contains(p[0], p[1], MANIFOLD_TOL) && (on_x || on_y) {
                Admissibility::Boundary
            } else if region.interior(p[0], p[1], 0.0) {
                Admissibility::Admissible
            } else {
                Admissibility::Virtual
            }
        }
    }
}

fn solve2(m: Mat2, r: Vec2) -> Option<Vec2> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = m.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs()));
    if det.abs() <= 1e-14 * scale * scale || !det.is_finite() {
        return None;
    }
    Some([
        (r[0] * m[1][1] - m[0][1] * r[1]) / det,
        (m[0][0] * r[1] - m[1][0] * r[0]) / det,
    ])
}

fn info(piece: &SmoothPiece, piece_id: usize, p: Vec2, mu: f64) -> EquilibriumInfo {
    let eigen = Eigen::of(piece.jacobian(p[0], p[1], mu));
    EquilibriumInfo {
        location: p,
        piece_id,
        eigen,
        kind: EquilibriumKind::from_eigen(eigen),
        admissibility: admissibility(piece.region, p),
    }
}

/// Equilibria of one piece (admissible or virtual).
///
/// Linear and affine pieces are solved exactly; other pieces use damped
/// Newton iterations from a 21 x 21 grid over the system's search box.
pub fn equilibria(sys: &SystemDef, piece_id: usize, mu: f64) -> Result<Vec<EquilibriumInfo>> {
    sys.check_mu(mu)?;
    let piece = sys.piece(piece_id)?;
    match piece.smoothness {
        Smoothness::Linear | Smoothness::Affine => {
            let b = piece.eval(0.0, 0.0, mu);
            let c0 = piece.eval(1.0, 0.0, mu);
            let c1 = piece.eval(0.0, 1.0, mu);
            let a = [[c0[0] - b[0], c1[0] - b[0]], [c0[1] - b[1], c1[1] - b[1]]];
            Ok(solve2(a, [-b[0], -b[1]])
                .map(|p| vec![info(piece, piece_id, p, mu)])
                .unwrap_or_default())
        }
        Smoothness::Smooth | Smoothness::SqrtSingular => Ok(newton_search(sys, piece, piece_id, mu)),
    }
}

fn newton_search(sys: &SystemDef, piece: &SmoothPiece, piece_id: usize, mu: f64) -> Vec<EquilibriumInfo> {
    let [x0, x1, y0, y1] = sys.search_box();
    let sqrt_side = if piece.smoothness == Smoothness::SqrtSingular {
        piece.region.x_side()
    } else {
        0.0
    };
    let allowed = |p: Vec2| sqrt_side == 0.0 || p[0] * sqrt_side > 1e-12;
    let scale = (x1 - x0).abs().max((y1 - y0).abs()).max(1e-300);
    let mut found: Vec<Vec2> = Vec::new();
    for i in 0..21 {
        for j in 0..21 {
            let mut p = [x0 + (x1 - x0) * i as f64 / 20.0, y0 + (y1 - y0) * j as f64 / 20.0];
            if !allowed(p) {
                continue;
            }
            let mut converged = false;
            for _ in 0..100 {
                let f = piece.eval(p[0], p[1], mu);
                let fnorm = f[0].hypot(f[1]);
                if !fnorm.is_finite() {
                    break;
                }
                if fnorm <= 1e-14 * (1.0 + scale) {
                    converged = true;
                    break;
                }
                let Some(step) = solve2(piece.jacobian(p[0], p[1], mu), [-f[0], -f[1]]) else {
                    break;
                };
                let mut t = 1.0;
                let mut accepted = false;
                while t > 1e-6 {
                    let q = [p[0] + t * step[0], p[1] + t * step[1]];
                    if allowed(q) {
                        let fq = piece.eval(q[0], q[1], mu);
                        if fq[0].hypot(fq[1]) < fnorm {
                            p = q;
                            accepted = true;
                            break;
                        }
                    }
                    t *= 0.5;
                }
                if !accepted {
                    break;
                }
                if step[0].hypot(step[1]) * t <= 1e-15 * (1.0 + p[0].hypot(p[1])) {
                    let f = piece.eval(p[0], p[1], mu);
                    converged = f[0].hypot(f[1]) <= 1e-10 * (1.0 + scale);
                    break;
                }
            }
            if converged
                && !found
                    .iter()
                    .any(|q| (q[0] - p[0]).hypot(q[1] - p[1]) <= 1e-8 * (1.0 + scale))
            {
                found.push(p);
            }
        }
    }
    found.into_iter().map(|p| info(piece, piece_id, p, mu)).collect()
}

/// Criticality coefficient of a focus/focus boundary equilibrium.
pub fn alpha_criticality(lambda_l: f64, omega_l: f64, lambda_r: f64, omega_r: f64) -> Result<f64> {
    if !(omega_l > 0.0) || !(omega_r > 0.0) {
        return Err(HlbError::Domain(format!(
            "rotation frequencies must be positive (got {omega_l}, {omega_r})"
        )));
    }
    Ok(lambda_l / omega_l + lambda_r / omega_r)
}

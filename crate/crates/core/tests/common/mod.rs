//! Fixed-step RK4 reference integrator with bisection event location.
//!
//! Shares only the model definitions with the library: mode logic, event
//! location and sliding are implemented from scratch here.

#![allow(dead_code)]

use hlb::pwsys::{Reset, SwitchingStructure, SystemDef, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    /// Active piece index.
    Piece(usize),
    /// Filippov sliding on `x = 0`.
    Sliding,
}

fn rk4<F: Fn(Vec2) -> Vec2>(f: &F, z: Vec2, h: f64) -> Vec2 {
    let k1 = f(z);
    let k2 = f([z[0] + 0.5 * h * k1[0], z[1] + 0.5 * h * k1[1]]);
    let k3 = f([z[0] + 0.5 * h * k2[0], z[1] + 0.5 * h * k2[1]]);
    let k4 = f([z[0] + h * k3[0], z[1] + h * k3[1]]);
    [
        z[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        z[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Smallest `tau` in `(0, h]` where `g(rk4(z, tau))` has left the sign it
/// has at `tau = 0`, assuming `g(rk4(z, h))` already has.
fn bisect<F: Fn(Vec2) -> Vec2, G: Fn(Vec2) -> bool>(f: &F, z: Vec2, h: f64, outside: G) -> f64 {
    let (mut lo, mut hi) = (0.0, h);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if outside(rk4(f, z, mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

pub struct Reference<'a> {
    sys: &'a SystemDef,
    mu: f64,
    pub t: f64,
    pub z: Vec2,
    mode: Mode,
    /// Hysteresis memory: `true` while the right piece is active.
    right_branch: bool,
    /// Delay queue of `(time, piece)`.
    pending: Vec<(f64, usize)>,
    /// Side of `x = 0` last seen, for delay bookkeeping.
    side: usize,
    pub events: Vec<(f64, &'static str)>,
    pub samples: Vec<(f64, Vec2, usize)>,
    pub sample_every: Option<usize>,
}

fn side_of(x: f64) -> usize {
    if x > 0.0 {
        1
    } else {
        0
    }
}

fn quadrant(z: Vec2) -> usize {
    match (z[0] > 0.0, z[1] > 0.0) {
        (true, true) => 0,
        (false, true) => 1,
        (false, false) => 2,
        (true, false) => 3,
    }
}

impl<'a> Reference<'a> {
    pub fn new(sys: &'a SystemDef, mu: f64, z0: Vec2) -> Self {
        let piece = match sys.switching() {
            SwitchingStructure::TwoManifolds => quadrant(z0),
            SwitchingStructure::Impact | SwitchingStructure::Impulse { .. } => 0,
            _ => side_of(z0[0]),
        };
        Reference {
            sys,
            mu,
            t: 0.0,
            z: z0,
            mode: Mode::Piece(piece),
            right_branch: z0[0] > 0.0,
            pending: Vec::new(),
            side: side_of(z0[0]),
            events: Vec::new(),
            samples: Vec::new(),
            sample_every: None,
        }
    }

    pub fn piece(&self) -> Option<usize> {
        match self.mode {
            Mode::Piece(p) => Some(p),
            Mode::Sliding => None,
        }
    }

    fn field(&self, p: usize, z: Vec2) -> Vec2 {
        self.sys.pieces()[p].eval(z[0], z[1], self.mu)
    }

    fn sliding_rhs(&self, z: Vec2) -> Vec2 {
        let fl = self.field(0, [0.0, z[1]]);
        let fr = self.field(1, [0.0, z[1]]);
        let d = fr[0] - fl[0];
        [0.0, (fr[0] * fl[1] - fl[0] * fr[1]) / d]
    }

    /// Filippov weight of the right field while sliding at `y`.
    pub fn lambda(&self, y: f64) -> f64 {
        let fl = self.field(0, [0.0, y]);
        let fr = self.field(1, [0.0, y]);
        fl[0] / (fl[0] - fr[0])
    }

    /// Integrate to `t_end` with step `h`.
    pub fn run(&mut self, t_end: f64, h: f64) {
        let mut n = 0usize;
        while self.t < t_end - 1e-15 {
            let mut hh = h.min(t_end - self.t);
            if let Some(&(ts, _)) = self.pending.first() {
                if ts - self.t <= hh {
                    hh = ts - self.t;
                }
            }
            self.step(hh);
            n += 1;
            if let Some(k) = self.sample_every {
                if n.is_multiple_of(k) {
                    let p = self.piece().unwrap_or(usize::MAX);
                    self.samples.push((self.t, self.z, p));
                }
            }
        }
    }

    fn fire_pending(&mut self) {
        while let Some(&(ts, p)) = self.pending.first() {
            if ts <= self.t + 1e-15 {
                self.pending.remove(0);
                self.mode = Mode::Piece(p);
                self.events.push((self.t, "delayed_switch"));
            } else {
                break;
            }
        }
    }

    fn step(&mut self, h: f64) {
        if h <= 0.0 {
            self.fire_pending();
            return;
        }
        match self.mode {
            Mode::Sliding => self.slide_step(h),
            Mode::Piece(p) => self.piece_step(p, h),
        }
        self.fire_pending();
    }

    fn slide_step(&mut self, h: f64) {
        let f = |z: Vec2| self.sliding_rhs(z);
        let z1 = rk4(&f, self.z, h);
        let leaving = |z: Vec2| {
            let fl = self.field(0, [0.0, z[1]]);
            let fr = self.field(1, [0.0, z[1]]);
            fl[0] <= 0.0 || fr[0] >= 0.0
        };
        if !leaving(z1) {
            self.t += h;
            self.z = z1;
            return;
        }
        let tau = bisect(&f, self.z, h, leaving);
        let z = rk4(&f, self.z, tau);
        self.t += tau;
        self.z = [0.0, z[1]];
        let fl = self.field(0, self.z);
        self.mode = Mode::Piece(if fl[0] <= 0.0 { 0 } else { 1 });
        self.events.push((self.t, "sliding_exit"));
    }

    fn piece_step(&mut self, p: usize, h: f64) {
        let f = |z: Vec2| self.field(p, z);
        let z1 = rk4(&f, self.z, h);
        let mu = self.mu;
        let outside: Box<dyn Fn(Vec2) -> bool> = match self.sys.switching() {
            SwitchingStructure::Continuous | SwitchingStructure::Filippov => {
                if p == 0 {
                    Box::new(|z: Vec2| z[0] > 0.0)
                } else {
                    Box::new(|z: Vec2| z[0] < 0.0)
                }
            }
            SwitchingStructure::Impact | SwitchingStructure::Impulse { .. } => Box::new(|z: Vec2| z[0] > 0.0),
            SwitchingStructure::Hysteresis => {
                if self.right_branch {
                    Box::new(move |z: Vec2| z[0] < -mu)
                } else {
                    Box::new(move |z: Vec2| z[0] > mu)
                }
            }
            SwitchingStructure::Delay => {
                let side = self.side;
                Box::new(move |z: Vec2| side_of(z[0]) != side && z[0] != 0.0)
            }
            SwitchingStructure::TwoManifolds => Box::new(move |z: Vec2| quadrant(z) != p),
        };
        if !outside(z1) {
            self.t += h;
            self.z = z1;
            return;
        }
        let tau = bisect(&f, self.z, h, &outside);
        self.z = rk4(&f, self.z, tau);
        self.t += tau;
        self.on_event(p);
    }

    fn on_event(&mut self, p: usize) {
        let mu = self.mu;
        match self.sys.switching() {
            SwitchingStructure::Continuous => {
                self.mode = Mode::Piece(1 - p);
                self.events.push((self.t, "crossing"));
            }
            SwitchingStructure::Filippov => {
                let y = self.z[1];
                let fl = self.field(0, [0.0, y]);
                let fr = self.field(1, [0.0, y]);
                if fl[0] > 0.0 && fr[0] < 0.0 {
                    self.z = [0.0, y];
                    self.mode = Mode::Sliding;
                    self.events.push((self.t, "sliding_entry"));
                } else {
                    self.mode = Mode::Piece(1 - p);
                    self.events.push((self.t, "crossing"));
                }
            }
            SwitchingStructure::Impact => {
                let Some(Reset::Impact(phi)) = self.sys.reset() else { unreachable!() };
                let y = self.z[1].max(0.0);
                self.z = [0.0, -phi(y, mu)];
                self.events.push((self.t, "impact"));
            }
            SwitchingStructure::Impulse { .. } => {
                let Some(Reset::Impulse(map)) = self.sys.reset() else { unreachable!() };
                self.z = map([0.0, self.z[1]], mu);
                self.events.push((self.t, "impulse"));
            }
            SwitchingStructure::Hysteresis => {
                self.right_branch = !self.right_branch;
                self.mode = Mode::Piece(if self.right_branch { 1 } else { 0 });
                self.events.push((self.t, "hysteresis_switch"));
            }
            SwitchingStructure::Delay => {
                self.side = 1 - self.side;
                self.pending.push((self.t + mu, self.side));
                self.events.push((self.t, "crossing"));
            }
            SwitchingStructure::TwoManifolds => {
                self.mode = Mode::Piece(quadrant(self.z));
                self.events.push((self.t, "crossing"));
            }
        }
    }
}

/// Final state of the reference run from `z0` over `[0, t_end]`.
pub fn reference_final(sys: &SystemDef, mu: f64, z0: Vec2, t_end: f64, h: f64) -> Vec2 {
    let mut r = Reference::new(sys, mu, z0);
    r.run(t_end, h);
    r.z
}

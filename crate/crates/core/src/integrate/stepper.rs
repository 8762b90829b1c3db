//! Dormand–Prince 5(4) step with its continuous extension.

use crate::pwsys::Vec2;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[inline]
fn axpy(y: Vec2, h: f64, terms: &[(f64, Vec2)]) -> Vec2 {
    let mut out = y;
    for &(c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// One attempted step, kept around for dense output.
#[derive(Debug, Clone)]
pub struct Step {
    pub t0: f64,
    pub h: f64,
    pub y0: Vec2,
    pub y1: Vec2,
    /// Scaled error estimate (accept when <= 1).
    pub err: f64,
    rcont: [Vec2; 5],
}

impl Step {
    /// Take a step of size `h` from `(t0, y0)`, `k1 = f(y0)`.
    pub fn take<F: Fn(Vec2) -> Vec2>(f: &F, t0: f64, y0: Vec2, k1: Vec2, h: f64, rtol: f64, atol: f64) -> Step {
        let k2 = f(axpy(y0, h, &[(A21, k1)]));
        let k3 = f(axpy(y0, h, &[(A31, k1), (A32, k2)]));
        let k4 = f(axpy(y0, h, &[(A41, k1), (A42, k2), (A43, k3)]));
        let k5 = f(axpy(y0, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]));
        let k6 = f(axpy(y0, h, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]));
        let y1 = axpy(y0, h, &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)]);
        let k7 = f(y1);
        let mut err = 0.0;
        for i in 0..2 {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = atol + rtol * y0[i].abs().max(y1[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (0.5 * err).sqrt();
        let mut rcont = [[0.0; 2]; 5];
        for i in 0..2 {
            let ydiff = y1[i] - y0[i];
            let bspl = h * k1[i] - ydiff;
            rcont[0][i] = y0[i];
            rcont[1][i] = ydiff;
            rcont[2][i] = bspl;
            rcont[3][i] = ydiff - h * k7[i] - bspl;
            rcont[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        Step { t0, h, y0, y1, err, rcont }
    }

    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Continuous extension at time `t` in `[t0, t0 + h]`.
    pub fn dense(&self, t: f64) -> Vec2 {
        if t == self.t0 {
            return self.y0;
        }
        if t == self.t1() {
            return self.y1;
        }
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let r = &self.rcont;
        let mut out = [0.0; 2];
        for i in 0..2 {
            out[i] = r[0][i] + s * (r[1][i] + s1 * (r[2][i] + s * (r[3][i] + s1 * r[4][i])));
        }
        out
    }
}

/// Plain Dormand–Prince update without error estimate or dense output.
pub fn advance<F: Fn(Vec2) -> Vec2>(f: &F, y0: Vec2, k1: Vec2, h: f64) -> Vec2 {
    Step::take(f, 0.0, y0, k1, h, 1.0, 1.0).y1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rot(y: Vec2) -> Vec2 {
        [-y[1], y[0]]
    }

    #[test]
    fn fifth_order_convergence() {
        let errs: Vec<f64> = [0.1, 0.05]
            .iter()
            .map(|&h| {
                let mut y = [1.0, 0.0];
                let n = (1.0_f64 / h).round() as usize;
                for _ in 0..n {
                    y = advance(&rot, y, rot(y), h);
                }
                (y[0] - 1f64.cos()).hypot(y[1] - 1f64.sin())
            })
            .collect();
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 4.5, "observed order {order}");
    }

    #[test]
    fn dense_output_is_accurate_inside_step() {
        let h = 0.02;
        let st = Step::take(&rot, 0.0, [1.0, 0.0], [0.0, 1.0], h, 1e-10, 1e-12);
        for j in 0..=10 {
            let t = h * j as f64 / 10.0;
            let y = st.dense(t);
            let err = (y[0] - t.cos()).abs().max((y[1] - t.sin()).abs());
            assert!(err < 1e-12, "t = {t}: {err:e}");
        }
    }
}

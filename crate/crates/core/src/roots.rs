//! Scalar root finding on a bracket.

use crate::error::{HlbError, Result};

/// Brent's method on `[a, b]`; `f(a)` and `f(b)` must not share a sign.
///
/// Stops when the bracket is narrower than `xtol` (plus a few ulps) or a
/// point with `f == 0` is found.
pub fn brent<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, xtol: f64, max_iter: usize) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 || !fa.is_finite() || !fb.is_finite() {
        return Err(HlbError::Bracket { t0: a, t1: b });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(HlbError::Numeric(format!("non-finite function value at {b}")));
        }
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_and_quadratic_roots() {
        let r = brent(|t| -1.0 + t, 0.0, 2.0, 1e-15, 200).unwrap();
        assert!((r - 1.0).abs() < 1e-14);
        let r = brent(|t| t * t - 1e-4, 0.0, 1.0, 1e-16, 200).unwrap();
        assert!((r - 0.01).abs() < 1e-14);
    }

    #[test]
    fn no_sign_change_is_error() {
        assert!(matches!(brent(|t| t * t + 1.0, -1.0, 1.0, 1e-12, 100), Err(HlbError::Bracket { .. })));
    }
}

use crate::error::{HlbError, Result};
use crate::pwsys::{Reset, SwitchingStructure, SystemDef, LEFT, MANIFOLD_TOL};

use super::ModeState;

/// Apply the reset law of an impact or impulsive system at the manifold.
///
/// Impact: `(0, y) -> (0, -phi(y))` for `y >= 0`; the image must point back
/// into `x < 0`. Impulse: the landing point must lie on the target line.
pub fn apply_reset(sys: &SystemDef, state: &ModeState, mu: f64) -> Result<ModeState> {
    if state.x.abs() > 1e-9 {
        return Err(HlbError::Domain(format!("reset applied off the manifold at x = {}", state.x)));
    }
    let mut out = state.clone();
    match (sys.switching(), sys.reset()) {
        (SwitchingStructure::Impact, Some(Reset::Impact(phi))) => {
            if state.y < -MANIFOLD_TOL {
                return Err(HlbError::Domain(format!("impact with incoming velocity y = {} < 0", state.y)));
            }
            let y = state.y.max(0.0);
            let yp = -phi(y, mu);
            let back = sys.pieces()[LEFT].eval(0.0, yp, mu)[0];
            if yp != 0.0 && back >= 0.0 {
                return Err(HlbError::ModelInconsistency(format!(
                    "impact image (0, {yp}) does not re-enter x < 0 (x' = {back})"
                )));
            }
            out.x = 0.0;
            out.y = yp;
            out.piece = LEFT;
        }
        (SwitchingStructure::Impulse { target }, Some(Reset::Impulse(map))) => {
            let z = map(state.point(), mu);
            if !z[0].is_finite() || !z[1].is_finite() {
                return Err(HlbError::Numeric("impulse image is not finite".into()));
            }
            let d = target.signed_distance(z);
            if d.abs() > 1e-12 * (1.0 + z[0].abs().max(z[1].abs())) {
                return Err(HlbError::ModelInconsistency(format!(
                    "impulse image ({}, {}) misses the target line by {d:e}",
                    z[0], z[1]
                )));
            }
            out.x = z[0];
            out.y = z[1];
            out.piece = sys.piece_at(z[0], z[1]);
        }
        _ => return Err(HlbError::Domain(format!("{} has no reset law", sys.name()))),
    }
    Ok(out)
}

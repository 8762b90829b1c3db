use std::f64::consts::PI;
use std::sync::Arc;

use super::*;
use crate::pwsys::{Line, Region, Reset, Smoothness, SmoothPiece};

fn two_piece(
    switching: SwitchingStructure,
    fl: fn(f64, f64, f64) -> Vec2,
    fr: fn(f64, f64, f64) -> Vec2,
) -> SystemDef {
    let l = SmoothPiece::new("left", Region::Left, Smoothness::Affine, fl);
    let r = SmoothPiece::new("right", Region::Right, Smoothness::Affine, fr);
    SystemDef::new("test", vec![l, r], switching, None, (-1.0, 1.0)).unwrap()
}

fn harmonic() -> SystemDef {
    two_piece(SwitchingStructure::Continuous, |x, y, _| [-y, x], |x, y, _| [-y, x])
}

fn slide_pair() -> SystemDef {
    two_piece(SwitchingStructure::Filippov, |_, y, _| [1.0, -1.0 - y], |_, y, _| [-1.0, 1.0 - y])
}

fn impact(r: f64) -> SystemDef {
    let piece = SmoothPiece::new("left", Region::Left, Smoothness::Linear, |x, y, _| [y, -x]);
    let law: crate::pwsys::ImpactLaw = Arc::new(move |y, _| r * y);
    SystemDef::new("impact", vec![piece], SwitchingStructure::Impact, Some(Reset::Impact(law)), (-1.0, 1.0)).unwrap()
}

#[test]
fn harmonic_oscillator_returns_after_full_turn() {
    let sys = harmonic();
    let init = ModeState::initial(&sys, 1.0, 0.0, 0.0).unwrap();
    let opts = FlowOptions { section: None, ..FlowOptions::default() };
    let tr = flow(&sys, &init, 0.0, 2.0 * PI, &opts).unwrap();
    let z = tr.final_state.point();
    assert!((z[0] - 1.0).abs() < 1e-8 && z[1].abs() < 1e-8, "{z:?}");
    assert_eq!(tr.status, Status::Completed);
    // the continuous system crosses x = 0 twice but no discrete jumps occur
    assert!(tr.events.iter().all(|e| e.kind == EventKind::Crossing));
    assert_eq!(tr.events.len(), 2);
    assert!(tr.samples.windows(2).all(|w| w[0].t < w[1].t));
}

#[test]
fn locate_event_examples() {
    assert!((locate_event(|t| -1.0 + t, 0.0, 2.0).unwrap() - 1.0).abs() < 1e-14);
    assert!((locate_event(|t| t * t - 1e-4, 0.0, 1.0).unwrap() - 0.01).abs() < 1e-14);
    assert!(matches!(locate_event(|t| 1.0 + t, 0.0, 1.0), Err(HlbError::Bracket { .. })));
}

#[test]
fn dense_segment_crossing_matches_quarter_turn() {
    let f = |z: Vec2| [-z[1], z[0]];
    let t0: f64 = 1.56;
    let y0 = [t0.cos(), t0.sin()];
    let seg = Step::take(&f, t0, y0, f(y0), 0.02, 1e-12, 1e-14);
    let t = locate_on_segment(&seg, |_, z| z[0], t0, t0 + 0.02).unwrap();
    assert!((t - PI / 2.0).abs() < 1e-10, "{t}");
}

#[test]
fn first_crossing_time_is_quarter_period() {
    let sys = harmonic();
    let init = ModeState::initial(&sys, 1.0, 0.0, 0.0).unwrap();
    let tr = flow(&sys, &init, 0.0, 2.0, &FlowOptions::default()).unwrap();
    let ev = &tr.events[0];
    assert!((ev.t - PI / 2.0).abs() < 1e-10, "{}", ev.t - PI / 2.0);
    assert!(ev.location[0].abs() <= 1e-10);
    assert_eq!((ev.piece_before, ev.piece_after), (RIGHT, LEFT));
}

#[test]
fn impact_reset_examples() {
    let sys = impact(0.8);
    let mut st = ModeState::initial(&sys, 0.0, 2.0, 0.0).unwrap();
    st.x = 0.0;
    let out = apply_reset(&sys, &st, 0.0).unwrap();
    assert_eq!(out.y, -1.6);
    st.y = 0.0;
    assert_eq!(apply_reset(&sys, &st, 0.0).unwrap().y, 0.0);
    st.y = -1.0;
    assert!(matches!(apply_reset(&sys, &st, 0.0), Err(HlbError::Domain(_))));
}

#[test]
fn impact_orbit_applies_restitution() {
    let sys = impact(0.9);
    let init = ModeState::initial(&sys, -1.0, 0.0, 0.0).unwrap();
    let tr = flow(&sys, &init, 0.0, 4.0, &FlowOptions::default()).unwrap();
    let ev = tr.events.iter().find(|e| e.kind == EventKind::Impact).expect("one impact");
    assert!(ev.before[1] > 0.0);
    assert!((ev.location[1] + 0.9 * ev.before[1]).abs() < 1e-15);
    // x = -cos t reaches 0 at t = pi/2 with y = 1
    assert!((ev.t - PI / 2.0).abs() < 1e-11 && (ev.before[1] - 1.0).abs() < 1e-10);
}

#[test]
fn non_reentrant_impact_is_inconsistent() {
    // flow pushes towards x = 0 everywhere, so the reset image cannot re-enter
    let piece = SmoothPiece::new("left", Region::Left, Smoothness::Linear, |_, _, _| [1.0, 0.0]);
    let law: crate::pwsys::ImpactLaw = Arc::new(|y, _| 0.5 * y);
    let sys =
        SystemDef::new("bad", vec![piece], SwitchingStructure::Impact, Some(Reset::Impact(law)), (-1.0, 1.0)).unwrap();
    let st = ModeState { x: 0.0, y: 1.0, ..ModeState::initial(&sys, -1.0, 1.0, 0.0).unwrap() };
    assert!(matches!(apply_reset(&sys, &st, 0.0), Err(HlbError::ModelInconsistency(_))));
}

#[test]
fn impulse_lands_on_target_line() {
    let piece = SmoothPiece::new("left", Region::Left, Smoothness::Linear, |x, y, _| [y, -x]);
    let target = Line { anchor: [-0.5, 0.0], normal: [1.0, 0.0] };
    let map: crate::pwsys::ImpulseMap = Arc::new(|z, _| [-0.5, -z[1]]);
    let sys = SystemDef::new(
        "impulse",
        vec![piece],
        SwitchingStructure::Impulse { target },
        Some(Reset::Impulse(map)),
        (-1.0, 1.0),
    )
    .unwrap();
    let st = ModeState { x: 0.0, y: 0.3, ..ModeState::initial(&sys, -0.1, 0.3, 0.0).unwrap() };
    let out = apply_reset(&sys, &st, 0.0).unwrap();
    assert!(target.signed_distance(out.point()).abs() <= 1e-12);
    let missing: crate::pwsys::ImpulseMap = Arc::new(|z, _| [-0.4, -z[1]]);
    let bad = SystemDef::new(
        "impulse",
        vec![SmoothPiece::new("left", Region::Left, Smoothness::Linear, |x, y, _| [y, -x])],
        SwitchingStructure::Impulse { target },
        Some(Reset::Impulse(missing)),
        (-1.0, 1.0),
    )
    .unwrap();
    assert!(matches!(apply_reset(&bad, &st, 0.0), Err(HlbError::ModelInconsistency(_))));
}

#[test]
fn sliding_converges_to_pseudo_equilibrium() {
    let sys = slide_pair();
    let entry = ModeState::initial(&sys, 0.0, 1.0, 0.0).unwrap();
    assert!(entry.sliding);
    let tr = slide_segment(&sys, &entry, 0.0, 40.0).unwrap();
    for s in &tr.samples {
        assert!(s.sliding && s.x.abs() <= 1e-10);
        // closed form y = exp(-t)
        assert!((s.y - (-s.t).exp()).abs() < 1e-9, "t = {} y = {}", s.t, s.y);
        let lam = sliding_weight(&sys, s.y, 0.0);
        assert!((0.0..=1.0).contains(&lam));
    }
    assert!(tr.final_state.y.abs() < 1e-9);
    assert!(tr.events.iter().any(|e| e.kind == EventKind::PseudoEquilibrium));
}

#[test]
fn sliding_exit_at_fold_leaves_into_right_piece() {
    // fR = (y, 1): visible fold at y = 0; sliding region y < 0 flows up to it
    let sys = two_piece(SwitchingStructure::Filippov, |_, _, _| [1.0, 0.0], |_, y, _| [y, 1.0]);
    let entry = ModeState::initial(&sys, 0.0, -1.0, 0.0).unwrap();
    let tr = slide_segment(&sys, &entry, 0.0, 10.0).unwrap();
    assert_eq!(tr.status, Status::SlidingEnded);
    let exit = tr.events.last().unwrap();
    assert_eq!(exit.kind, EventKind::SlidingExit);
    assert_eq!(exit.piece_after, RIGHT);
    assert!(exit.location[1].abs() < 1e-10);
    // lambda rises monotonically to 1 along the slide
    let lams: Vec<f64> = (0..=1000).map(|k| sliding_weight(&sys, -1.0 + k as f64 * 1e-3, 0.0)).collect();
    assert!(lams.windows(2).all(|w| w[1] >= w[0]));
    assert!((lams[1000] - 1.0).abs() < 1e-12);
}

#[test]
fn repelling_entry_is_rejected() {
    let sys = two_piece(SwitchingStructure::Filippov, |_, _, _| [-1.0, 0.0], |_, _, _| [1.0, 0.0]);
    let st = ModeState::initial(&sys, 0.0, 0.5, 0.0).unwrap();
    assert!(matches!(slide_segment(&sys, &st, 0.0, 1.0), Err(HlbError::Domain(_))));
}

#[test]
fn filippov_orbit_enters_sliding_from_left() {
    let sys = slide_pair();
    let init = ModeState::initial(&sys, -0.5, 2.0, 0.0).unwrap();
    let tr = flow(&sys, &init, 0.0, 5.0, &FlowOptions::default()).unwrap();
    assert_eq!(tr.events[0].kind, EventKind::SlidingEntry);
    assert!((tr.events[0].t - 0.5).abs() < 1e-12);
    assert!(tr.samples.iter().filter(|s| s.sliding).all(|s| s.x == 0.0));
}

#[test]
fn hysteresis_switches_only_at_thresholds() {
    let sys = two_piece(SwitchingStructure::Hysteresis, |_, y, _| [1.0, -1.0 - y], |_, y, _| [-1.0, 1.0 - y]);
    let mu = 0.05;
    let init = ModeState::initial(&sys, -0.01, 0.0, mu).unwrap();
    let tr = flow(&sys, &init, mu, 2.0, &FlowOptions::default()).unwrap();
    let switches: Vec<&Event> = tr.events.iter().filter(|e| e.kind == EventKind::HysteresisSwitch).collect();
    assert!(switches.len() > 10);
    for e in switches {
        match (e.piece_before, e.piece_after) {
            (LEFT, RIGHT) => assert!((e.location[0] - mu).abs() <= 1e-10),
            (RIGHT, LEFT) => assert!((e.location[0] + mu).abs() <= 1e-10),
            other => panic!("unexpected switch {other:?}"),
        }
    }
    assert!(tr.samples.iter().all(|s| s.x.abs() <= mu + 1e-10));
}

#[test]
fn delayed_switch_fires_one_lag_after_crossing() {
    let sys = two_piece(SwitchingStructure::Delay, |_, y, _| [1.0, -1.0 - y], |_, y, _| [-1.0, 1.0 - y]);
    let mu = 0.05;
    let init = ModeState::initial(&sys, -0.01, 0.0, mu).unwrap();
    let tr = flow(&sys, &init, mu, 1.0, &FlowOptions::default()).unwrap();
    let crossings: Vec<f64> = tr.events.iter().filter(|e| e.kind == EventKind::Crossing).map(|e| e.t).collect();
    let delayed: Vec<f64> = tr.events.iter().filter(|e| e.kind == EventKind::DelayedSwitch).map(|e| e.t).collect();
    assert!(delayed.len() > 5);
    for (c, d) in crossings.iter().zip(&delayed) {
        assert!((d - c - mu).abs() < 1e-12);
    }
    assert!(tr.final_state.pending.iter().all(|p| p.at > tr.final_state.t));
}

#[test]
fn zeno_chattering_is_detected() {
    // bouncing ball with restitution 0.5: x is the height below the wall
    // and gravity pushes towards it, so impacts accumulate in finite time
    let sys = SystemDef::new(
        "bouncing",
        vec![SmoothPiece::new("left", Region::Left, Smoothness::Affine, |_, y, _| [y, 1.0])],
        SwitchingStructure::Impact,
        Some(Reset::Impact(Arc::new(|y, _| 0.5 * y))),
        (-1.0, 1.0),
    )
    .unwrap();
    let init = ModeState::initial(&sys, -1.0, 0.0, 0.0).unwrap();
    let opts = FlowOptions { zeno_count: 20, zeno_span: 1e-4, ..FlowOptions::default() };
    let err = flow(&sys, &init, 0.0, 10.0, &opts).unwrap_err();
    assert!(matches!(err, HlbError::Zeno { .. }), "{err}");
}

#[test]
fn blow_up_is_reported() {
    let sys = two_piece(SwitchingStructure::Continuous, |x, y, _| [x, y], |x, y, _| [x, y]);
    let init = ModeState::initial(&sys, 1.0, 1.0, 0.0).unwrap();
    let tr = flow(&sys, &init, 0.0, 100.0, &FlowOptions::default()).unwrap();
    assert_eq!(tr.status, Status::BlowUp);
}

#[test]
fn invalid_initial_state_is_rejected() {
    let sys = slide_pair();
    let mut st = ModeState::initial(&sys, -1.0, 0.0, 0.0).unwrap();
    st.pending.push(PendingSwitch { at: -1.0, piece: RIGHT });
    assert!(matches!(flow(&sys, &st, 0.0, 1.0, &FlowOptions::default()), Err(HlbError::Domain(_))));
}

mod common;

use hlb::catalog::entries;
use hlb::integrate::{flow, FlowOptions, ModeState};

fn library_final(id: &str, mu: f64, t_end: f64) -> ([f64; 2], [f64; 2]) {
    let e = hlb::catalog::entry(id).unwrap();
    let sys = e.build(mu).unwrap();
    let z0 = e.seed_point(mu);
    let init = ModeState::initial(&sys, z0[0], z0[1], mu).unwrap();
    let opts = FlowOptions { rtol: 1e-12, atol: 1e-15, h_max: 1e-2, record_samples: false, ..Default::default() };
    let tr = flow(&sys, &init, mu, t_end, &opts).unwrap();
    let lib = tr.final_state.point();
    let oracle = common::reference_final(&sys, mu, z0, t_end, 1e-5);
    (lib, oracle)
}

#[test]
fn library_matches_rk4_reference_on_every_entry() {
    let mut bad = Vec::new();
    for e in entries() {
        let mu = 1e-3;
        let (lib, oracle) = library_final(e.id, mu, 20.0);
        let err = (lib[0] - oracle[0]).hypot(lib[1] - oracle[1]);
        eprintln!("{:>2}: err {err:.3e} lib {lib:?} ref {oracle:?}", e.id);
        if err > 1e-6 {
            bad.push((e.id, err));
        }
    }
    assert!(bad.is_empty(), "{bad:?}");
}

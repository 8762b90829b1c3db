use hlb::cli::{run, validate_portrait, VerifyFile};
use hlb::scaling::read_csv;
use std::fs;
use std::path::Path;

fn hlb(args: &[&str]) -> i32 {
    run(std::iter::once("hlb").chain(args.iter().copied()))
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(hlb(&["verify", "--id", "99"]), 2);
    assert_eq!(hlb(&["sweep", "--id", "nope"]), 2);
    assert_eq!(hlb(&["frobnicate"]), 2);
    assert_eq!(hlb(&["verify"]), 2);
    assert_eq!(hlb(&["--help"]), 0);
}

#[test]
fn sweep_csv_is_deterministic_and_six_columns() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(dir.path(), "a.csv"), path(dir.path(), "b.csv"));
    for out in [&a, &b] {
        assert_eq!(hlb(&["sweep", "--id", "2", "--points", "5", "--seed", "7", "--out", out]), 0);
    }
    let (ta, tb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let text = String::from_utf8(ta).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# schema_version="));
    assert_eq!(lines.next().unwrap(), "mu,amplitude,period,x_max,multiplier,converged");
    assert!(lines.all(|l| l.split(',').count() == 6));
    let rows = read_csv(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.converged));
}

#[test]
fn verify_writes_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "v.json");
    assert_eq!(hlb(&["verify", "--id", "17", "--id", "H", "--out", &out]), 0);
    let v: VerifyFile = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert!(v.pass);
    assert_eq!(v.reports.len(), 2);
    assert_eq!(v.reports[0].expected.a, 0.3333);
    assert!(v.reports.iter().all(|r| r.criteria.iter().all(|c| c.pass)));
}

#[test]
fn loose_failure_exits_one() {
    // the fitted exponents of entry 18 are off by a few thousandths
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "v.json");
    assert_eq!(hlb(&["verify", "--id", "18", "--tol", "1e-6", "--out", &out]), 1);
}

#[test]
fn portrait_round_trips_through_validator() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "p.json");
    assert_eq!(hlb(&["export-portrait", "--id", "3", "--mu", "-0.01", "0.01", "--out", &out]), 0);
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    let p = validate_portrait(&v).unwrap();
    assert_eq!(p.records.len(), 2);
    let plus = &p.records[1];
    assert!(!plus.sliding_regions.is_empty());
    let c = plus.cycle.as_ref().expect("cycle at mu > 0");
    assert!(c.sliding_segment && c.stable);
    assert!(plus.trajectories.iter().all(|t| !t.is_ragged()));
    assert_eq!(serde_json::to_value(&p).unwrap(), v);
}

#[test]
fn portrait_of_entry_11_has_focus_and_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "p.json");
    assert_eq!(hlb(&["export-portrait", "--id", "11", "--mu", "0.01", "--out", &out]), 0);
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    let p = validate_portrait(&v).unwrap();
    let r = &p.records[0];
    assert!(r.cycle.is_some());
    assert!(r.equilibria.iter().any(|e| e.kind == "unstable_focus" && e.admissibility == "admissible"));
}

#[test]
fn simulate_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let j = path(dir.path(), "s.json");
    let c = path(dir.path(), "s.csv");
    assert_eq!(hlb(&["simulate", "--id", "1", "--mu", "-0.01", "--t-end", "5", "--out", &j]), 0);
    assert_eq!(hlb(&["simulate", "--id", "1", "--mu", "0.01", "--t-end", "5", "--format", "csv", "--out", &c]), 0);
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&j).unwrap()).unwrap();
    assert_eq!(v["entry"], "1");
    assert!(fs::read_to_string(&c).unwrap().starts_with("# schema_version="));
    assert_eq!(hlb(&["simulate", "--id", "15", "--mu", "5"]), 2);
}

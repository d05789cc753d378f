use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn shadowlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shadowlab")).args(args).env_remove("SHADOWLAB_THREADS").output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json_file(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const ROTATION: &str = r#"{"kind":"linear","matrix":[[0,-1],[1,0]]}"#;

#[test]
fn xstar_verify_reports_four_rest_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("xstar.json");
    let o = shadowlab(&["xstar", "verify", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json_file(&out);
    assert_eq!(r["report"]["rest_points"].as_array().unwrap().len(), 4);
    assert_eq!(r["report"]["eigenvalues_p"].as_array().unwrap().len(), 4);
    assert!(r["report"]["seam_defect"].as_f64().unwrap() <= 1e-8);
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn xstar_build_lists_the_saddles() {
    let o = shadowlab(&["xstar", "build"]);
    assert_eq!(code(&o), 0);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["report"]["rest_points"]["p_star"]["kind"], "saddle");
    assert_eq!(r["report"]["rest_points"]["s_star"]["kind"], "attracting");
    assert_eq!(r["report"]["field"]["kind"], "xstar");
}

#[test]
fn rest_drift_experiment_from_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rest.json");
    let csv = dir.path().join("rest.csv");
    let o = shadowlab(&["experiment", "lemma1-rest", "--eps", "0.1", "--m", "1000", "--out", s(&out), "--csv", s(&csv)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json_file(&out);
    assert!(r["report"]["defect"]["sup_defect"].as_f64().unwrap() <= 2e-3);
    assert!(r["report"]["orbital"]["distance"].as_f64().unwrap() >= 0.195);
    assert_eq!(r["config"]["params"]["m"], 1000.0);
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("name,value,relation,bound,passed\n"));
    assert_eq!(table.lines().count(), 4);
}

#[test]
fn exact_orbit_is_shadowed_with_identity() {
    let dir = tempfile::tempdir().unwrap();
    let pseudo = dir.path().join("orbit.json");
    let o = shadowlab(&["pseudo", "gen", "orbit", "--field", ROTATION, "--x", "1,0", "--window", "0,5", "--out", s(&pseudo)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("shadow.json");
    let csv = dir.path().join("h.csv");
    let o = shadowlab(&["shadow", "check", s(&pseudo), "--mode", "oriented", "--eps", "0.01", "--seed-grid", "3", "--out", s(&out), "--csv", s(&csv)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json_file(&out);
    assert_eq!(r["report"]["found"], true);
    assert!(r["report"]["distance"].as_f64().unwrap() < 1e-6);
    let table = std::fs::read_to_string(&csv).unwrap();
    for line in table.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[0] - v[1]).abs() < 1e-9, "{line}");
    }
}

#[test]
fn unshadowed_pseudo_exits_with_budget_code() {
    let dir = tempfile::tempdir().unwrap();
    let pseudo = dir.path().join("rest.json");
    assert_eq!(code(&shadowlab(&["pseudo", "gen", "rest-drift", "--eps", "0.1", "--m", "20", "--out", s(&pseudo)])), 0);
    let o = shadowlab(&["shadow", "check", s(&pseudo), "--mode", "oriented", "--eps", "0.05", "--seed-grid", "3", "--nm-evals", "20"]);
    assert_eq!(code(&o), 3);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["outcome"], "budget_exhausted");
}

#[test]
fn pseudo_check_defect_and_violation() {
    let dir = tempfile::tempdir().unwrap();
    let pseudo = dir.path().join("rest.json");
    assert_eq!(code(&shadowlab(&["pseudo", "gen", "rest-drift", "--eps", "0.1", "--m", "100", "--out", s(&pseudo)])), 0);
    let o = shadowlab(&["pseudo", "check", s(&pseudo), "--bound", "0.02"]);
    assert_eq!(code(&o), 0);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((r["report"]["sup_defect"].as_f64().unwrap() - 0.01).abs() < 1e-3);
    assert_eq!(code(&shadowlab(&["pseudo", "check", s(&pseudo), "--bound", "1e-4"])), 2);
}

#[test]
fn failed_check_exits_with_violation_code() {
    let o = shadowlab(&["experiment", "lemma1-rest", "--m", "100", "--set", "defect_bound=1e-5", "--set", "seed_grid=5"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sup defect"));
}

#[test]
fn config_errors_exit_four_and_list_fields() {
    let o = shadowlab(&["experiment", "lemma1-rest", "--set", "epsilon=1", "--set", "mm=2"]);
    assert_eq!(code(&o), 4);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("epsilon") && err.contains("mm"), "{err}");
    let o = shadowlab(&["experiment", "lemma1-rest", "--eps", "-1", "--m", "0"]);
    assert_eq!(code(&o), 4);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("eps") && err.contains("m:"), "{err}");
    assert_eq!(code(&shadowlab(&["experiment"])), 4);
    assert_eq!(code(&shadowlab(&["no-such-command"])), 4);
    let o = Command::new(env!("CARGO_BIN_EXE_shadowlab")).args(["experiment", "lemma3-table"]).env("SHADOWLAB_THREADS", "zero").output().unwrap();
    assert_eq!(code(&o), 4);
}

#[test]
fn thread_cap_is_honoured() {
    let o = Command::new(env!("CARGO_BIN_EXE_shadowlab")).args(["experiment", "matcher-oracle"]).env("SHADOWLAB_THREADS", "1").output().unwrap();
    assert_eq!(code(&o), 0);
}

#[test]
fn identical_config_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, args: &[&str]| {
        let p = dir.path().join(name);
        let mut all: Vec<&str> = args.to_vec();
        all.extend(["--out", s(&p)]);
        assert_eq!(code(&shadowlab(&all)), 0);
        std::fs::read(&p).unwrap()
    };
    let args = ["experiment", "saddle-noise", "--set", "defects=[1e-3]"];
    assert_eq!(run("a.json", &args), run("b.json", &args));
    let args = ["experiment", "lemma1-orbit", "--n", "20", "--set", "probe_returns=10"];
    assert_eq!(run("c.json", &args), run("d.json", &args));
}

#[test]
fn printed_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = shadowlab(&["experiment", "case-b1", "--set", "big_t=8", "--print-config"]);
    assert_eq!(code(&o), 0);
    let cfg_path = dir.path().join("case.json");
    std::fs::write(&cfg_path, &o.stdout).unwrap();
    // the file reads back to the same bytes
    let again = shadowlab(&["experiment", "--config", s(&cfg_path), "--print-config"]);
    assert_eq!(again.stdout, o.stdout);

    let from_file = shadowlab(&["experiment", "--config", s(&cfg_path)]);
    let from_flags = shadowlab(&["experiment", "case-b1", "--set", "big_t=8"]);
    assert_eq!(code(&from_file), 0);
    assert_eq!(from_file.stdout, from_flags.stdout);
    assert_eq!(code(&shadowlab(&["experiment", "ps-delta", "--config", s(&cfg_path)])), 4);
}

#[test]
fn simulate_writes_a_trajectory_table() {
    let o = shadowlab(&["simulate", "--field", ROTATION, "--x", "1,0", "--t", "3.141592653589793", "--dt", "0.7853981633974483"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,chart,c0,c1,e0,e1");
    assert_eq!(lines.len(), 6);
    let last: Vec<&str> = lines[5].split(',').collect();
    assert!((last[2].parse::<f64>().unwrap() + 1.0).abs() < 1e-7);
    let o = shadowlab(&["simulate", "--field", r#"{"kind":"x2"}"#, "--x", "0.1,0.2", "--t", "-1"]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().next().unwrap(), "t,chart,c0,c1,e0,e1,e2");
    assert_eq!(code(&shadowlab(&["simulate", "--field", r#"{"kind":"nope"}"#, "--x", "0", "--t", "1"])), 4);
}

#[test]
fn poincare_map_of_a_rotation_is_the_identity() {
    let o = shadowlab(&["poincare", "map", "--field", ROTATION, "--base", "1,0", "--normal", "0,1", "--radius", "0.9", "--u", "0.3", "--returns", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<f64>> = text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 4);
    for (k, r) in rows.iter().enumerate() {
        assert!((r[1] - k as f64 * std::f64::consts::TAU).abs() < 1e-6, "{r:?}");
        assert!((r[2] - 0.3).abs() < 1e-7);
    }
}

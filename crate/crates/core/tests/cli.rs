use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use tinregion::proper_pure::RateProfile;
use tinregion::region::preset_scenario;
use tinregion::timesharing::solve_time_sharing;

fn tinregion(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tinregion"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn malformed_scenario_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ \"h11\": [[1.0, 0.0]], ").unwrap();
    let out = tinregion(&["region", "--scenario", path_str(&bad), "--method", "proper-pure"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("malformed JSON"), "{err}");
}

#[test]
fn missing_file_and_bad_flags_exit_2() {
    assert_eq!(tinregion(&["region", "--scenario", "/nonexistent/x.json"]).status.code(), Some(2));
    assert_eq!(tinregion(&["region", "--scenario", "fig1", "--frobnicate"]).status.code(), Some(2));
    assert_eq!(tinregion(&["region", "--scenario", "fig1", "--format", "xml"]).status.code(), Some(2));
    assert_eq!(tinregion(&["region", "--scenario", "fig1", "--betas", "0,2"]).status.code(), Some(2));
    assert_eq!(tinregion(&["reproduce", "fig7"]).status.code(), Some(2));
}

#[test]
fn improper_sweep_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: Option<&str>| {
        let path = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_tinregion"));
        cmd.args(["region", "--scenario", "fig3", "--method", "improper", "--seed", "7", "--starts", "20"])
            .args(["--betas", "5", "--out", path_str(&path)]);
        if let Some(t) = threads {
            cmd.env("TINREGION_THREADS", t);
        }
        let out = cmd.output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(path).unwrap()
    };
    let a = run("a.csv", None);
    let b = run("b.csv", None);
    let c = run("c.csv", Some("1"));
    assert_eq!(a, b);
    assert_eq!(a, c);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("method,beta,r1,r2\n"));
    assert_eq!(text.lines().count(), 1 + 5 * 20);
}

#[test]
fn bad_thread_count_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_tinregion"))
        .args(["region", "--scenario", "fig1"])
        .env("TINREGION_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn timesharing_csv_has_balanced_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let out = tinregion(&[
        "region", "--scenario", "fig1", "--method", "proper-timesharing", "--betas", "21", "--out", path_str(&path),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let summary = String::from_utf8_lossy(&out.stderr);
    assert!(summary.contains("balanced") && summary.contains(" s"), "{summary}");

    let text = std::fs::read_to_string(&path).unwrap();
    let row = text
        .lines()
        .find(|l| l.starts_with("proper-timesharing,0.5,"))
        .expect("row for beta 0.5");
    let f: Vec<f64> = row.split(',').skip(2).map(|v| v.parse().unwrap()).collect();
    let ch = preset_scenario("fig1").unwrap();
    let (_, sol) = solve_time_sharing(&ch, &RateProfile::balanced(), 1e-2).unwrap();
    assert!((f[0] - sol.rates[0]).abs() < 1e-9 && (f[1] - sol.rates[1]).abs() < 1e-9);
    assert!((f[0] - f[1]).abs() < 1e-9);
    for b in (0..=20).map(|i| i as f64 / 20.0) {
        let prefix = format!("proper-timesharing,{},", tinregion::region::fmt_sig(b));
        assert!(text.lines().any(|l| l.starts_with(&prefix)), "missing beta {b}");
    }
}

#[test]
fn json_export_mirrors_curve() {
    let out = tinregion(&["region", "--scenario", "fig2", "--method", "hull", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["method"], "convex-hull");
    let samples = v["samples"].as_array().unwrap();
    assert!(samples.len() >= 2);
    assert_eq!(samples[0]["point"]["r1"], 0.0);
}

#[test]
fn verify_fig2_nesting_holds() {
    let out = tinregion(&["verify", "--scenario", "fig2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], true);
    let names: Vec<&str> = v["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"nesting-pure-in-hull"));
    assert!(names.contains(&"nesting-hull-in-timesharing"));
}

#[test]
fn verify_fig1_passes() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = tinregion(&["verify", "--scenario", "fig1", "--out", path_str(&report)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn verify_random_channel_file() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut vecs = Vec::new();
    for n in [3, 3, 2, 2] {
        let v: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)]).collect();
        vecs.push(v);
    }
    let scenario = serde_json::json!({
        "h11": vecs[0], "h12": vecs[1], "h21": vecs[2], "h22": vecs[3], "p1": 5.0, "p2": 8.0
    });
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("random.json");
    std::fs::write(&path, scenario.to_string()).unwrap();
    let out = tinregion(&["verify", "--scenario", path_str(&path), "--skip-nesting", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let check = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "transform-rate-invariance")
        .unwrap();
    assert_eq!(check["pass"], true);
    assert!(check["measured"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn reproduce_fig3_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out = tinregion(&["reproduce", "fig3", "--out", path_str(dir.path())]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    for m in ["proper-pure", "proper-timesharing", "improper-heuristic", "convex-hull"] {
        let csv = std::fs::read_to_string(dir.path().join(format!("fig3_{m}.csv"))).unwrap();
        assert!(csv.starts_with("method,beta,r1,r2\n"));
        assert!(csv.lines().skip(1).all(|l| l.starts_with(m)));
    }
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fig3_report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert!(stdout.contains("PASS fig3 improper point"));
}

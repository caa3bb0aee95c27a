use std::path::PathBuf;
use std::process::Command;

use geoequiv::cli::run;
use serde_json::Value;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("geoequiv").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn generate_then_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("dini.json");
    let model = model.to_str().unwrap();
    let (code, _, err) = call(&["generate", "dini", "--params", &fixture("dini_params.json"), "--out", model]);
    assert_eq!(code, 0, "{err}");
    let (code, out, _) = call(&["verify", "--model", model, "--samples", "12", "--seed", "7", "--format", "json"]);
    assert_eq!(code, 0);
    let report: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["schema"], "geoequiv-report/1");
    assert_eq!(report["command"], "verify");
    assert_eq!(report["result"]["verdict"], "pass");
    assert_eq!(report["config"]["verify"]["seed"], 7);
}

#[test]
fn conformal_heisenberg_fails_with_exit_2() {
    let (code, out, _) = call(&[
        "verify",
        "--model",
        &fixture("heisenberg_conformal.json"),
        "--samples",
        "10",
        "--seed",
        "7",
    ]);
    assert_eq!(code, 2);
    assert!(out.contains("verdict: \"fail\""), "{out}");
}

#[test]
fn proportional_heisenberg_passes() {
    let (code, _, _) = call(&["verify", "--model", &fixture("heisenberg_proportional.json"), "--samples", "10"]);
    assert_eq!(code, 0);
}

#[test]
fn malformed_manifest_exits_4() {
    let (code, _, err) = call(&["analyze", "--model", &fixture("malformed_expression.json"), "--at", "0,0,0"]);
    assert_eq!(code, 4);
    assert!(err.contains("gram2"), "{err}");
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\"coords\": [").unwrap();
    let (code, _, _) = call(&["verify", "--model", broken.to_str().unwrap()]);
    assert_eq!(code, 4);
}

#[test]
fn usage_and_io_errors_exit_1() {
    assert_eq!(call(&["verify", "--model", "/nonexistent/model.json"]).0, 1);
    assert_eq!(call(&["frobnicate"]).0, 1);
    assert_eq!(call(&["generate", "no-such-kind"]).0, 1);
    assert_eq!(call(&["verify", "--model", &fixture("heisenberg_proportional.json"), "--T", "-1"]).0, 1);
    let (code, out, _) = call(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("check-relations"));
}

#[test]
fn constructor_hypothesis_violation_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("p.json");
    // β1 < β2 fails on part of the domain
    std::fs::write(&params, r#"{"beta1": "2 + x1", "beta2": "2"}"#).unwrap();
    let (code, _, err) = call(&["generate", "dini", "--params", params.to_str().unwrap()]);
    assert_eq!(code, 4, "{err}");
}

#[test]
fn generate_without_out_prints_a_loadable_manifest() {
    let (code, out, _) = call(&["generate", "quasi-contact"]);
    assert_eq!(code, 0);
    let model = geoequiv::geometry::GeometryModel::from_json_str(&out).unwrap();
    assert_eq!((model.dim(), model.rank()), (4, 3));
}

#[test]
fn analyze_reports_spectrum_and_divisibility() {
    let (code, out, err) = call(&[
        "analyze",
        "--model",
        &fixture("heisenberg_conformal.json"),
        "--at",
        "0.3,-0.2,0.1",
        "--format",
        "json",
    ]);
    assert_eq!(code, 0, "{err}");
    let v: Value = serde_json::from_str(&out).unwrap();
    let r = &v["result"];
    assert_eq!(r["distribution"], "contact");
    let ev = r["spectrum"]["eigenvalues"].as_array().unwrap();
    assert!(ev.iter().all(|x| (x.as_f64().unwrap() - 1.13).abs() < 1e-12));
    assert_eq!(r["first_divisibility"]["holds"], true);
    assert!(r["relations_max"].as_f64().unwrap() > 1e-3);
}

#[test]
fn check_relations_counts_probe_points() {
    let (code, out, _) = call(&[
        "check-relations",
        "--model",
        &fixture("heisenberg_proportional.json"),
        "--format",
        "json",
    ]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    let r = &v["result"];
    assert_eq!(r["points"], r["evaluated"]);
    assert_eq!(r["first_holds"], r["points"]);
    assert!(r["max_relations_residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn geodesic_csv_and_json() {
    let model = fixture("heisenberg_proportional.json");
    let (code, out, _) = call(&["geodesic", "--model", &model, "--q", "0,0,0", "--p", "1,0,0", "--T", "0.1"]);
    assert_eq!(code, 0);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "t,q_1,q_2,q_3,p_1,p_2,p_3,h");
    assert!(lines.count() >= 10);
    let (code, out, _) = call(&[
        "geodesic", "--model", &model, "--metric", "2", "--q", "0,0,0", "--p", "1,0,0", "--T", "0.1", "--format", "json",
    ]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    let end = v["result"]["end"]["q"][0].as_f64().unwrap();
    // h2 = h1/2, so the second metric moves at half speed along x
    assert!((end - 0.05).abs() < 1e-9, "{end}");
    assert_eq!(call(&["geodesic", "--model", &model, "--q", "0,0", "--p", "1,0,0"]).0, 1);
}

#[test]
fn json_reports_are_deterministic() {
    let args = [
        "verify",
        "--model",
        &fixture("heisenberg_proportional.json"),
        "--samples",
        "8",
        "--seed",
        "3",
        "--format",
        "json",
    ];
    assert_eq!(call(&args).1, call(&args).1);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_geoequiv");
    let status = Command::new(bin)
        .args(["verify", "--model", &fixture("heisenberg_conformal.json"), "--samples", "5"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    let status = Command::new(bin)
        .args(["check-relations", "--model", &fixture("malformed_expression.json")])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(4));
}

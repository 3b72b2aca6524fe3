//! End-to-end runs of the command-line front end.

use std::path::Path;

use serde_json::Value;
use streamdec::cli;

fn run(args: &[&str]) -> (i32, Value) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(std::iter::once("streamdec").chain(args.iter().copied()), &mut out, &mut err);
    let text = String::from_utf8(out).unwrap();
    let v = serde_json::from_str(&text).unwrap_or(Value::String(text));
    (code, v)
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

#[test]
fn sector_field_violates_the_chain_rule() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().display().to_string();
    let (code, v) = run(&["gen", "nelson", "--out", &d, "--n", "128"]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["files"].as_array().unwrap().len(), 4);
    let (code, v) = run(&["chain-rule", "--field", &p(dir.path(), "f.json"), "--rho", &p(dir.path(), "rho.json"), "--velocity", &p(dir.path(), "v.json")]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "chain-rule");
    assert_eq!(v["verdict"], "violated");
    assert_eq!(v["premise_holds"], true);
    assert!(v["witness_test"].is_object());
}

#[test]
fn decompose_two_bumps_writes_two_components() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().display().to_string();
    run(&["gen", "two-bumps", "--out", &d, "--n", "96"]);
    let out = p(dir.path(), "dec");
    let (code, v) = run(&["decompose", "--field", &p(dir.path(), "f.json"), "--out", &out]);
    assert_eq!(code, 0, "{v}");
    let comps = v["components"].as_array().unwrap();
    assert_eq!(comps.len(), 2);
    assert_eq!(v["verification"]["disjoint_supports"], true);
    for c in comps {
        let file = c["file"].as_str().unwrap();
        assert!(Path::new(file).exists());
        assert_eq!(c["monotone"], true);
    }
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().display().to_string();
    run(&["gen", "radial-bump", "--out", &d, "--n", "64"]);
    let f = p(dir.path(), "f.json");
    for args in [vec!["coarea", "--field", &f], vec!["sard", "--field", &f], vec!["trace", "--field", &f, "--levels", "4"]] {
        let (c1, a) = run(&args);
        let (c2, b) = run(&args);
        assert_eq!((c1, c2), (0, 0));
        assert_eq!(a, b);
    }
}

#[test]
fn trace_and_constancy_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().display().to_string();
    run(&["gen", "smooth-bump", "--out", &d, "--n", "64"]);
    let f = p(dir.path(), "f.json");
    let (code, v) = run(&["trace", "--field", &f, "--levels", "6", "--out", &d, "--svg"]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["levels"].as_array().unwrap().len(), 6);
    assert!(dir.path().join("curves.csv").exists() && dir.path().join("curves.svg").exists());
    let (code, v) = run(&["constancy", "--field", &f, "--rho", &f, "--levels", "6", "--out", &d]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["constant_by_variance"], true);
    assert!(dir.path().join("constancy.csv").exists());
}

#[test]
fn transport_and_nonuniq() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().display().to_string();
    run(&["gen", "smooth-bump", "--out", &d, "--n", "64"]);
    let f = p(dir.path(), "f.json");
    let (code, v) = run(&["transport", "--field", &f, "--rho", &f, "--t", "0.25", "--levels", "8", "--out", &d]);
    assert_eq!(code, 0, "{v}");
    assert!(v["max_relative_mass_change"].as_f64().unwrap() < 1e-2);
    assert!(dir.path().join("rho_t.json").exists());
    let (code, v) = run(&["nonuniq", "--n", "512", "--tests", "20", "--out", &d]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["residual_a"], 0.0);
    assert!(v["residual_b"].as_f64().unwrap() < 1e-4);
    assert_eq!(v["trajectories_differ"], true);
    let text = std::fs::read_to_string(dir.path().join("trajectory_b.csv")).unwrap();
    assert!(text.starts_with("t,s,value,kind"));
}

#[test]
fn contract_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = p(dir.path(), "bad.json");
    std::fs::write(&bad, "[]").unwrap();
    let (code, v) = run(&["coarea", "--field", &bad]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["kind"], "io");
    let d = dir.path().display().to_string();
    run(&["gen", "two-bumps", "--out", &d, "--n", "48"]);
    let f = p(dir.path(), "f.json");
    let (code, v) = run(&["transport", "--field", &f, "--rho", &f, "--t", "0.1", "--out", &d]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["kind"], "contract");
    let (code, _) = run(&["nonuniq", "--T", "2"]);
    assert_eq!(code, 2);
    let (code, _) = run(&["no-such-command"]);
    assert_eq!(code, 2);
    let (code, _) = run(&["--help"]);
    assert_eq!(code, 0);
}

#[test]
fn verify_all_runs_selected_criteria() {
    let (code, v) = run(&["verify-all", "--only", "1,7"]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["criteria"].as_array().unwrap().len(), 2);
    assert_eq!(v["passed"], true);
    let (code, _) = run(&["verify-all", "--only", "42"]);
    assert_eq!(code, 2);
}

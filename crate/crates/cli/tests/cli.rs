use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn mmspace(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmspace")).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn report(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).expect("report written")).expect("report is JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

#[test]
fn flat_square_is_two_dimensional() {
    let tmp = TempDir::new().unwrap();
    let out = mmspace(tmp.path(), &["--seed", "3", "--out", "r", "theorem1", "--fixture", "square"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(tmp.path().join("r/report.json"));
    assert_eq!(r["result"]["affine_dimension"], 2);
    assert_eq!(r["pass"], true);
    assert!(tmp.path().join("r/singularity_scores.csv").exists());
    assert!(!tmp.path().join("r/witness.json").exists());
}

#[test]
fn circle_fails_with_witness() {
    let tmp = TempDir::new().unwrap();
    let out = mmspace(tmp.path(), &["--out", "r", "theorem1", "--fixture", "circle", "--particles", "2000"]);
    assert_eq!(code(&out), 1);
    let w = report(tmp.path().join("r/witness.json"));
    assert!(w["witness"]["failed"].as_array().unwrap().iter().any(|f| f == "nondegeneracy"));
}

#[test]
fn heisenberg_exponent_four_fails_reproducibly() {
    let tmp = TempDir::new().unwrap();
    let args = |dir: &'static str| vec!["--seed", "7", "--out", dir, "mcp", "--space", "heis1", "--N", "4", "--trials", "500"];
    assert_eq!(code(&mmspace(tmp.path(), &args("a"))), 1);
    assert_eq!(code(&mmspace(tmp.path(), &args("b"))), 1);
    let a = std::fs::read(tmp.path().join("a/report.json")).unwrap();
    let b = std::fs::read(tmp.path().join("b/report.json")).unwrap();
    assert_eq!(a, b);
    let w = report(tmp.path().join("a/witness.json"));
    let worst = &w["witness"]["worst"];
    assert!(worst["t"].as_f64().unwrap() >= 0.8);
    assert!(worst["confirmed_ratio"].as_f64().unwrap() < worst["bound"].as_f64().unwrap());

    let five = mmspace(tmp.path(), &["--seed", "7", "--out", "c", "mcp", "--N", "5", "--trials", "500"]);
    assert_eq!(code(&five), 0);
}

#[test]
fn plans_verify() {
    let tmp = TempDir::new().unwrap();
    for build in ["convex", "heisenberg", "sphere"] {
        let out = mmspace(tmp.path(), &["--out", build, "plan", "--build", build, "--verify"]);
        assert_eq!(code(&out), 0, "{build}: {}", String::from_utf8_lossy(&out.stderr));
        let r = report(tmp.path().join(build).join("report.json"));
        assert!(r["result"]["diagnostics"]["uniformity_constant"].is_number());
        assert!(tmp.path().join(build).join("plan.json").exists());
    }
    let cone = mmspace(tmp.path(), &["--out", "cone", "plan", "--build", "cone-apex", "--verify"]);
    assert_eq!(code(&cone), 1);
    assert_eq!(report(tmp.path().join("cone/witness.json"))["witness"]["ac_ok"], false);
}

#[test]
fn saved_plan_verifies_again() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&mmspace(tmp.path(), &["--out", "a", "plan", "--particles", "3000"])), 0);
    let out = mmspace(tmp.path(), &["--out", "b", "plan", "--verify", "a/plan.json", "--cell-size", "0.2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let a = std::fs::read(tmp.path().join("a/plan.json")).unwrap();
    let b = std::fs::read(tmp.path().join("b/plan.json")).unwrap();
    let (a, b): (Value, Value) = (serde_json::from_slice(&a).unwrap(), serde_json::from_slice(&b).unwrap());
    assert_eq!(a["coupling"], b["coupling"]);
}

#[test]
fn rescaled_and_extended_plans() {
    let tmp = TempDir::new().unwrap();
    let out = mmspace(tmp.path(), &["--out", "r", "plan", "--rescale", "if(x0 < 0.5, 3, 0.5)", "--verify", "--cell-size", "0.2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = mmspace(tmp.path(), &["--out", "e", "plan", "--extend", "--center", "0.5,0.5", "--verify"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let bad = mmspace(tmp.path(), &["--out", "x", "plan", "--rescale", "x0 +"]);
    assert_eq!(code(&bad), 2);
    let negative = mmspace(tmp.path(), &["--out", "x", "plan", "--rescale=-1"]);
    assert_eq!(code(&negative), 7);
}

#[test]
fn transport_fixtures() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&mmspace(tmp.path(), &["--out", "t", "transport", "--fixture", "two-pair"])), 0);
    let r = report(tmp.path().join("t/report.json"));
    assert_eq!(r["result"]["w2_squared"].as_f64(), Some(1.0));
    assert_eq!(code(&mmspace(tmp.path(), &["--out", "h", "transport", "--space", "heis1", "--atoms", "12"])), 0);
}

#[test]
fn stability_and_suite() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&mmspace(tmp.path(), &["--out", "s", "stability"])), 0);
    assert_eq!(code(&mmspace(tmp.path(), &["--out", "h", "heis-suite", "--samples", "2000", "--pairs", "5000"])), 0);
    let csv = std::fs::read_to_string(tmp.path().join("h/checks.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn identical_seeds_give_identical_reports() {
    let tmp = TempDir::new().unwrap();
    for dir in ["a", "b"] {
        assert_eq!(code(&mmspace(tmp.path(), &["--seed", "11", "--out", dir, "stability"])), 0);
    }
    for file in ["report.json", "stability.csv"] {
        assert_eq!(std::fs::read(tmp.path().join("a").join(file)).unwrap(), std::fs::read(tmp.path().join("b").join(file)).unwrap());
    }
    assert_eq!(code(&mmspace(tmp.path(), &["--seed", "12", "--out", "c", "stability"])), 0);
    assert_ne!(std::fs::read(tmp.path().join("a/report.json")).unwrap(), std::fs::read(tmp.path().join("c/report.json")).unwrap());
}

#[test]
fn config_files() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let ok = write(dir, "ok.json", r#"{"experiment": "transport", "seed": 4, "out": "cfg", "atoms": 8}"#);
    assert_eq!(code(&mmspace(dir, &["--config", &ok])), 0);
    let r = report(dir.join("cfg/report.json"));
    assert_eq!(r["seed"], 4);
    assert_eq!(r["config"]["atoms"], 8);
    // flags override the file
    assert_eq!(code(&mmspace(dir, &["--config", &ok, "--seed", "5", "--out", "flag", "transport", "--atoms", "6"])), 0);
    let r = report(dir.join("flag/report.json"));
    assert_eq!((r["seed"].as_u64(), r["config"]["atoms"].as_u64()), (Some(5), Some(6)));

    let cases = [
        (r#"{"experiment": "transport", "seed": 1, "atomz": 3}"#, 2),
        (r#"{"experiment": "mcp", "seed": 1, "trials": -5}"#, 2),
        (r#"{"experiment": "mcp", "seed": 1, "trials": 0}"#, 2),
        (r#"{"experiment": "mcp", "seed": 1, "t_grid": [0.5, 1.5]}"#, 2),
        (r#"{"experiment": "transport", "seed": 1,"#, 3),
        (r#"{"experiment": "transport"}"#, 4),
        (r#"{"seed": 1}"#, 4),
        (r#"{"experiment": "curvature", "seed": 1}"#, 5),
    ];
    for (k, (text, expect)) in cases.iter().enumerate() {
        let name = write(dir, &format!("c{k}.json"), text);
        let out = mmspace(dir, &["--config", &name]);
        assert_eq!(code(&out), *expect, "{text}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let plan = write(dir, "p.json", r#"{"experiment": "plan", "seed": 1}"#);
    assert_eq!(code(&mmspace(dir, &["--config", &plan, "mcp"])), 2);
    assert_eq!(code(&mmspace(dir, &["--config", "absent.json"])), 6);
}

#[test]
fn usage_errors() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&mmspace(tmp.path(), &[])), 2);
    assert_eq!(code(&mmspace(tmp.path(), &["curvature"])), 2);
    assert_eq!(code(&mmspace(tmp.path(), &["mcp", "--trials", "many"])), 2);
    assert_eq!(code(&mmspace(tmp.path(), &["mcp", "--space", "hyperbolic"])), 2);
    assert_eq!(code(&mmspace(tmp.path(), &["--help"])), 0);
    let blocked = write(tmp.path(), "file", "not a directory");
    assert_eq!(code(&mmspace(tmp.path(), &["--out", &blocked, "heis-suite", "--samples", "10", "--pairs", "10"])), 6);
}

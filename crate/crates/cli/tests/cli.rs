use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ricci-transport"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, value: Value) {
    fs::write(dir.join(name), value.to_string()).unwrap();
}

fn cycle(n: usize, length: f64) -> Value {
    let vertices: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    let edges: Vec<Value> = (0..n).map(|i| json!([i.to_string(), ((i + 1) % n).to_string(), length])).collect();
    json!({ "vertices": vertices, "edges": edges })
}

fn fixtures() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "path3.json", json!({ "vertices": ["a", "b", "c"], "edges": [["a", "b", 1.0], ["b", "c", 1.0]] }));
    write(d, "a.json", json!({ "a": 1.0 }));
    write(d, "b.json", json!({ "c": 1.0 }));
    write(d, "cycle16.json", cycle(16, 1.0 / 16.0));
    write(
        d,
        "gauss.json",
        json!({ "topology": "interval", "a": -5.0, "b": 5.0, "psi": "quadratic:1", "grid_n": 1024 }),
    );
    write(d, "quad.json", json!({ "kind": "sine", "amplitude": 1.0, "frequency": 1.0 }));
    dir
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn w2_reports_distance_and_plan() {
    let dir = fixtures();
    let out =
        run(dir.path(), &["w2", "--space", "path3.json", "--mu0", "a.json", "--mu1", "b.json", "--csv", "plan.csv"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["result"]["distance"], 2.0);
    assert_eq!(r["csv"], "plan.csv");
    let plan = fs::read_to_string(dir.path().join("plan.csv")).unwrap();
    assert_eq!(plan, "source_id,target_id,mass\na,c,1e0\n");
}

#[test]
fn seeded_probe_is_byte_identical() {
    let dir = fixtures();
    let args =
        ["probe-nricci", "--space", "cycle16.json", "--N", "1", "--depth", "3", "--pairs", "auto:4", "--seed", "7"];
    let first = run(dir.path(), &args);
    let second = bin().current_dir(dir.path()).env("RICCI_TRANSPORT_THREADS", "1").args(args).output().unwrap();
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
    let r = report(&first);
    assert_eq!(r["result"]["pairs"].as_array().unwrap().len(), 4);
    assert!(r["budget"]["factor"].is_number());
    let other = run(
        dir.path(),
        &["probe-nricci", "--space", "cycle16.json", "--N", "1", "--depth", "3", "--pairs", "auto:4", "--seed", "8"],
    );
    assert_ne!(first.stdout, other.stdout);
}

#[test]
fn report_file_matches_stdout() {
    let dir = fixtures();
    let args = ["bishop-gromov", "--space", "cycle16.json", "--N", "1"];
    let printed = run(dir.path(), &args);
    let mut with_out = args.to_vec();
    with_out.extend(["--out", "bg.json"]);
    let silent = run(dir.path(), &with_out);
    assert!(silent.stdout.is_empty());
    assert_eq!(fs::read(dir.path().join("bg.json")).unwrap(), printed.stdout);
}

#[test]
fn hessian_dispatch() {
    let dir = fixtures();
    let out = run(dir.path(), &["smooth1d", "hessian", "--line", "gauss.json", "--U", "shannon", "--phi", "quad.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    for key in ["formula", "finite_diff"] {
        assert!(r["result"][key].is_number());
    }
    assert_eq!(r["budget"]["difference"], 1e-3);
}

#[test]
fn violations_exit_one() {
    let dir = fixtures();
    let out = run(dir.path(), &["bonnet-myers", "--space", "cycle16.json", "--N", "1", "--K", "1000"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["pass"], false);
    let out = run(dir.path(), &["dc-check", "--U", "uN:2", "--N", "3"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn input_errors_exit_two() {
    let dir = fixtures();
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        run(dir.path(), &["w2", "--space", "missing.json", "--mu0", "a.json", "--mu1", "b.json"]).status.code(),
        Some(2)
    );
    assert_eq!(run(dir.path(), &["dc-check", "--U", "shannon", "--N", "0.5"]).status.code(), Some(2));
    assert_eq!(
        run(dir.path(), &["mollify", "--space", "path3.json", "--mu", "a.json", "--delta", "-1"]).status.code(),
        Some(2)
    );
    let bad_threads = bin()
        .current_dir(dir.path())
        .env("RICCI_TRANSPORT_THREADS", "0")
        .args(["dc-check", "--U", "shannon", "--N", "2"])
        .output()
        .unwrap();
    assert_eq!(bad_threads.status.code(), Some(2));
    let out = run(dir.path(), &["w2", "--space", "path3.json", "--mu0", "a.json", "--mu1", "unknown.json"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown.json"));
}

#[test]
fn quotient_isometry() {
    let dir = fixtures();
    write(dir.path(), "inv0.json", json!({ "0": 0.5, "8": 0.5 }));
    write(dir.path(), "inv1.json", json!({ "3": 0.5, "11": 0.5 }));
    let out = run(
        dir.path(),
        &["quotient", "--space", "cycle16.json", "--rotation", "8", "--mu0", "inv0.json", "--mu1", "inv1.json"],
    );
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["result"]["orbits"].as_array().unwrap().len(), 8);
    assert!((r["result"]["w2_space"].as_f64().unwrap() - 3.0 / 16.0).abs() < 1e-12);
    write(dir.path(), "skew.json", json!({ "0": 1.0 }));
    let out = run(
        dir.path(),
        &["quotient", "--space", "cycle16.json", "--rotation", "8", "--mu0", "skew.json", "--mu1", "inv1.json"],
    );
    assert_eq!(out.status.code(), Some(2));
}

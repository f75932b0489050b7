use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn elomix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elomix"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok_json(args: &[&str]) -> serde_json::Value {
    let out = elomix(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn gap_of_a_path() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "p3.txt", "# path\n0 1\n1 2\n");
    let v = ok_json(&["gap", "--graph", &g]);
    assert_eq!(v["n"], 3);
    assert_eq!(v["edges"], 2);
    assert_eq!(v["normalization"], "sequential");
    assert!((v["gap"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(v["within_four_over_n"], true);
}

#[test]
fn gap_with_weight_file() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "p3.txt", "0 1\n1 2\n");
    let w = write(dir.path(), "w.txt", "0 1 0.25\n1 2 0.75\n");
    let v = ok_json(&["gap", "--graph", &g, "--weights", &w]);
    assert!(v["gap"].as_f64().unwrap() < 0.5);
}

#[test]
fn design_then_gap_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "k4.txt", "0 1\n0 2\n0 3\n1 2\n1 3\n2 3\n");
    let w = dir.path().join("w.csv");
    let m = dir.path().join("m.json");
    let v = ok_json(&[
        "design", "--graph", &g, "--regime", "par",
        "--out", w.to_str().unwrap(), "--matchings", m.to_str().unwrap(),
    ]);
    assert!((v["gap"].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-3);
    assert!((v["mean_matching_size"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-3);
    let weights = fs::read_to_string(&w).unwrap();
    assert!(weights.starts_with("# n = 4\ni,j,q\n"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&m).unwrap()).unwrap();
    assert_eq!(report["n"], 4);

    let gap = ok_json(&["gap", "--graph", &g, "--weights", w.to_str().unwrap()]);
    assert_eq!(gap["normalization"], "substochastic");
    assert!((gap["gap"].as_f64().unwrap() - v["gap"].as_f64().unwrap()).abs() < 1e-9);
}

#[test]
fn simulate_writes_csv_and_centers_skills() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "k3.txt", "0 1\n0 2\n1 2\n");
    let s = write(dir.path(), "s.txt", "# skills\n1.5\n1.0\n0.5\n");
    let out_csv = dir.path().join("t.csv");
    let out = elomix(&[
        "simulate", "--graph", &g, "--skills", &s, "--eta", "0.1", "--steps", "2000",
        "--replications", "2", "--record", "error,maxabs", "--out", out_csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("centering"));
    let csv = fs::read_to_string(&out_csv).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("replication,step,metric,value"));
    let rows: Vec<&str> = lines.collect();
    assert!(rows.iter().any(|r| r.starts_with("1,") && r.contains(",maxabs,")));
    assert!(rows.iter().any(|r| r.starts_with("0,2000,error,")));
}

#[test]
fn simulate_rejects_zero_steps() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "p2.txt", "0 1\n");
    let s = write(dir.path(), "s.txt", "0.5\n-0.5\n");
    let out = elomix(&[
        "simulate", "--graph", &g, "--skills", &s, "--eta", "0.1", "--steps", "0",
        "--out", dir.path().join("x.csv").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
}

#[test]
fn bench_from_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "spec.json",
        r#"{"graph": {"kind": "star", "n": 6},
            "skills": {"kind": "uniform", "lo": -1, "hi": 1},
            "schedule": ["uniform", "design_par"], "eta": 0.1, "steps": 1000,
            "replications": 2, "seed": 3, "metrics": ["error", "games_vs_rounds"]}"#,
    );
    let out_dir = dir.path().join("out");
    let out = elomix(&["bench", "--spec", &spec, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["trajectory.csv", "summary.json", "graph.edgelist"] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }
}

//! Drives the `cdi` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cdi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdi")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = cdi(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_detect_optimise_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("g.edges");
    let found = dir.path().join("cdi.json");
    let opt = dir.path().join("opt.json");
    let traj = dir.path().join("traj.csv");
    ok(&["generate", "--family", "knnr", "--n", "40", "--k", "5", "--seed", "3", "--out", p(&edges)]);
    let text = fs::read_to_string(&edges).unwrap();
    assert!(text.starts_with("# config: {\"command\":\"generate\""));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 200);
    assert!(edges.with_extension("edges.pos").exists());

    ok(&["cdi", "--in", p(&edges), "--vectors", "3", "--matrix", "laplacian", "--out", p(&found)]);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&found).unwrap()).unwrap();
    assert_eq!(doc["y"], 3);
    assert_eq!(doc["matrix"], "laplacian");
    let first = &doc["communities"][0];
    assert_eq!(first["rank"], 1);
    assert!(first["leader"].as_u64().unwrap() >= 1);
    assert!(doc["unassigned"].is_array());

    ok(&["optimize", "--in", p(&edges), "--vectors", "2", "--out", p(&opt)]);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&opt).unwrap()).unwrap();
    let sum: f64 = doc["c"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
    assert!((sum - 1.0).abs() < 1e-9);

    ok(&["simulate", "--in", p(&edges), "--perturbation", p(&opt), "--dt", "1", "--t-end", "20", "--out", p(&traj)]);
    let text = fs::read_to_string(&traj).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config:"));
    assert!(lines.next().unwrap().starts_with("t,x0,x1,"));
    assert_eq!(lines.count(), 21);
}

#[test]
fn replaying_a_config_reproduces_outputs_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp.csv");
    ok(&[
        "compare", "--family", "knnr-variable", "--sizes", "20,30", "--per-size", "2", "--kmin", "2", "--kmax", "5",
        "--methods", "cdi,kmeans,direct", "--vectors", "2", "--multistart", "1", "--out", p(&out),
    ]);
    let first = fs::read(&out).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 2 * 2 * 3);
    assert!(rows.iter().filter(|r| r.contains(",direct,")).all(|r| r.split(',').nth(5) == Some("1")));

    let config = dir.path().join("cmp.csv.config.json");
    fs::remove_file(&out).unwrap();
    ok(&["--config", p(&config)]);
    assert_eq!(fs::read(&out).unwrap(), first);
}

#[test]
fn flock_sweep_reports_a_power_law_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("flock.csv");
    ok(&["optimize", "--flock", "120", "--thickness", "0.2", "--k", "6,10,16", "--fit", "powerlaw", "--vectors", "3", "--out", p(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[1], "k,lambda1,communities,active_communities,evaluations,converged");
    assert_eq!(lines.len(), 2 + 3 + 1);
    assert!(lines[5].starts_with("# fit: lambda1 = a k^b, a="));
}

#[test]
fn bisect_and_match_write_their_reports() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("g.edges");
    let parts = dir.path().join("parts.json");
    ok(&["generate", "--family", "knnr", "--n", "64", "--k", "6", "--dims", "3", "--out", p(&edges)]);
    ok(&["bisect", "--in", p(&edges), "--parts", "4", "--threshold", "0", "--out", p(&parts)]);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&parts).unwrap()).unwrap();
    let total: usize = doc["communities"].as_array().unwrap().iter().map(|c| c.as_array().unwrap().len()).sum();
    assert_eq!(total, 64);

    let report = dir.path().join("report.json");
    ok(&["match", "--a", p(&edges), "--b", p(&edges), "--vectors", "3", "--out", p(&report)]);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let per: Vec<&serde_json::Value> = doc["perThreshold"].as_array().unwrap().iter().collect();
    assert_eq!(per.len(), 5);
    assert_eq!(doc["meanMatches"].as_f64().unwrap(), doc["pairs"].as_array().unwrap().len() as f64);
}

#[test]
fn bad_input_fails_with_a_diagnostic() {
    let out = cdi(&["cdi", "--in", "/nonexistent.edges", "--out", "/tmp/x.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));

    let out = cdi(&["cdi", "--vectors", "three"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid value"));

    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("g.edges");
    ok(&["generate", "--n", "10", "--k", "3", "--out", p(&edges)]);
    let out = cdi(&["bisect", "--in", p(&edges), "--parts", "3", "--out", p(&dir.path().join("b.json"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("power of two"));
}

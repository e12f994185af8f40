//! End-to-end runs of the `privdiff` binary.

use std::path::Path;
use std::process::{Command, Output};

use privdiff::io::read_vector;

fn privdiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_privdiff")).args(args).output().expect("binary should start")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout should be JSON")
}

fn write_graph(dir: &Path) -> String {
    let path = dir.join("g.txt");
    let mut text = String::from("# toy graph\n");
    for i in 0..30 {
        text.push_str(&format!("{} {}\n", i, (i + 1) % 30));
        text.push_str(&format!("{} {}\n", i, (i + 7) % 30));
    }
    text.push_str("40 41\n");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn ingest_reports_and_keeps_largest_component() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path());
    let out_path = dir.path().join("canon.txt");
    let v = json(&privdiff(&["ingest", "--graph", &g, "--lcc", "--output", out_path.to_str().unwrap()]));
    assert_eq!(v["nodes"], 30);
    assert_eq!(v["edges"], 60);
    assert_eq!(std::fs::read_to_string(out_path).unwrap().lines().count(), 60);
}

#[test]
fn diffuse_writes_scores_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path());
    let exact = dir.path().join("exact.bin");
    json(&privdiff(&["diffuse", "--graph", &g, "--lcc", "--seed-node", "0", "--exact", "--output", exact.to_str().unwrap()]));
    let exact = read_vector(&exact).unwrap();
    assert!((exact.iter().sum::<f64>() - 1.0).abs() < 1e-9);

    let noisy = dir.path().join("noisy.json");
    let v = json(&privdiff(&[
        "diffuse", "--graph", &g, "--lcc", "--seed-node", "0", "--epsilon", "1", "--delta", "1e-4", "--output",
        noisy.to_str().unwrap(),
    ]));
    assert!(v["run"]["sigma"].as_f64().unwrap() > 0.0);
    assert_eq!(read_vector(&noisy).unwrap().len(), exact.len());
}

#[test]
fn account_and_calibrate_agree() {
    let cal = json(&privdiff(&["calibrate", "--epsilon", "0.5", "--delta", "1e-6", "--eta", "1e-6"]));
    let sigma = cal["calibration"]["sigma"].as_f64().unwrap();
    let acc = json(&privdiff(&["account", "--sigma", &sigma.to_string(), "--eta", "1e-6", "--delta", "1e-6"]));
    let eps = acc["dp"]["epsilon_dp"].as_f64().unwrap();
    assert!((0.495..=0.5).contains(&eps), "{eps}");
}

#[test]
fn infeasible_calibration_exits_with_two() {
    let out = privdiff(&["calibrate", "--epsilon", "1e-9", "--delta", "1e-300"]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn verify_passes() {
    let out = privdiff(&["verify"]);
    assert!(out.status.success());
    let lines: Vec<serde_json::Value> =
        out.stdout.split(|&b| b == b'\n').filter(|l| !l.is_empty()).map(|l| serde_json::from_slice(l).unwrap()).collect();
    assert!(lines.len() > 5);
    assert!(lines.iter().all(|r| r["pass"] == true));
}

#[test]
fn sweep_writes_csv_and_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path());
    let csv = dir.path().join("agg.csv");
    let jsonl = dir.path().join("trials.jsonl");
    let out = privdiff(&[
        "sweep", "--dataset", &g, "--epsilon", "1,4", "--eta", "1e-4,1e-2", "--trials", "3", "--cutoff", "10", "--out",
        csv.to_str().unwrap(), "--trials-out", jsonl.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(&csv).unwrap();
    assert_eq!(rdr.records().count(), 4 + 2);
    assert_eq!(std::fs::read_to_string(&jsonl).unwrap().lines().count(), 6 * 3);
}

#[test]
fn curves_write_three_tables() {
    let dir = tempfile::tempdir().unwrap();
    json(&privdiff(&["curves", "--out-dir", dir.path().to_str().unwrap(), "--max-steps", "50"]));
    for f in ["bounds_by_steps.csv", "w_tau_vs_diameter.csv", "sigma_by_epsilon.csv"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
}

#[test]
fn flip_baseline_releases_graph_and_scores() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path());
    let out = dir.path().join("flipped.txt");
    let scores = dir.path().join("scores.json");
    let v = json(&privdiff(&[
        "flip-baseline", "--graph", &g, "--lcc", "--epsilon", "2", "--seed-node", "3", "--output", out.to_str().unwrap(),
        "--scores", scores.to_str().unwrap(),
    ]));
    let p = v["p"].as_f64().unwrap();
    assert!(p > 0.0 && p <= 1.0);
    assert_eq!(read_vector(&scores).unwrap().len(), 30);
}

#[test]
fn malformed_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "0 1\n1 x\n").unwrap();
    let out = privdiff(&["ingest", "--graph", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

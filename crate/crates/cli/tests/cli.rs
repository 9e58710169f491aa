use std::path::Path;
use std::process::{Command, Output};

use vineshuffle::dataset::{Dataset, DirDataset};
use vineshuffle::grid::FieldFormat;
use vineshuffle::shuffle::read_ensemble;

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vineshuffle"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) {
    let out = run(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn simulate(dir: &Path, name: &str, hours: &str) {
    ok(
        &["simulate", "--data-dir", name, "--hours", hours, "--rows", "9", "--cols", "9", "--reference-members", "2", "--seed", "4"],
        dir,
    );
}

#[test]
fn missing_input_is_a_data_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["fit", "--data-dir", "no_such_dir", "--model-path", "m.json"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_dir"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"membrs": 3}"#).unwrap();
    let out = run(&["--config", "c.json", "simulate", "--data-dir", "d"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["fit", "--data-dir", "d", "--model-path", "m.json", "--members", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    // Validation happens before any data is read.
    assert!(!dir.path().join("d").exists());
    let out = run(&["fit", "--data-dir", "d"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model_path"));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"seed": 9, "data_dir": "from_config", "simulation": {"hours": 5, "n_rows": 4, "n_cols": 4, "reference_members": 0}}"#,
    )
    .unwrap();
    ok(&["--config", "c.json", "simulate"], dir.path());
    let from_config = DirDataset::open(&dir.path().join("from_config")).unwrap();
    assert_eq!(from_config.observations().len(), 5);
    ok(&["--config", "c.json", "simulate", "--hours", "7", "--data-dir", "from_flag"], dir.path());
    let from_flag = DirDataset::open(&dir.path().join("from_flag")).unwrap();
    assert_eq!(from_flag.observations().len(), 7);
    assert_eq!(from_flag.manifest().provenance["seed"], 9);
}

#[test]
fn simulate_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "a", "6");
    simulate(dir.path(), "b", "6");
    for rel in ["manifest.json", "forecasts/fc_1656637200_1.csv", "reference/ref_1656637200_1_1.bin"] {
        let a = std::fs::read(dir.path().join("a").join(rel)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(rel)).unwrap();
        assert_eq!(a, b, "{rel} differs");
    }
}

#[test]
fn fit_shuffle_predict_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "data", "48");
    ok(&["fit", "--data-dir", "data", "--model-path", "model.json", "--seed", "4"], d);
    ok(&["shuffle", "--data-dir", "data", "--model-path", "model.json", "--out-dir", "ens", "--seed", "4"], d);
    let files: Vec<_> = std::fs::read_dir(d.join("ens"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "bin"))
        .collect();
    assert_eq!(files.len(), 1);
    let (x, meta) = read_ensemble(&files[0], FieldFormat::Bin).unwrap();
    assert_eq!((x.m(), x.n_members()), (81, 19));
    assert!(meta.final_ll >= meta.initial_ll);
    ok(&["predict-area", "--ensembles", "ens", "--out", "pred.csv"], d);
    let csv = std::fs::read_to_string(d.join("pred.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "timestamp,lead_time,area_id,threshold,probability,n_members");
    assert_eq!(lines.len(), 1 + 4);
    assert!(lines[1..].iter().all(|l| l.ends_with(",19")));
}

#[test]
fn verify_writes_records_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "data", "40");
    ok(
        &[
            "verify", "--data-dir", "data", "--out-dir", "out", "--min-train-days", "1", "--validate-every", "8",
            "--models", "copula,random,reference", "--thresholds", "0.62,1.23", "--members", "5", "--truncation", "2", "--workers", "2", "--side", "4",
        ],
        d,
    );
    for f in ["records.ndjson", "quality.ndjson", "scores.csv", "reliability.csv", "pit.csv", "report.json", "summary.json"] {
        assert!(d.join("out").join(f).exists(), "{f} missing");
    }
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("out/summary.json")).unwrap()).unwrap();
    // Origins at hours 23, 31; lead times 2..6 are not in the dataset.
    assert_eq!(summary["origins"], 2);
    let records = std::fs::read_to_string(d.join("out/records.ndjson")).unwrap();
    let areas = summary["area_forecasts"].as_u64().unwrap() as usize;
    assert!(areas >= 2);
    assert_eq!(records.lines().count(), areas * 3 * 2);
}

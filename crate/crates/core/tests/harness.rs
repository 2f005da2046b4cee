//! Harness integration tests: artifact round trips and aggregation.

use std::fmt::Write as _;
use std::fs;

use cilbench::harness::{
    cmd_eval, cmd_report, cmd_run, cmd_split_verify, predictions_from_csv, predictions_to_csv,
    ExperimentConfig, RunOptions,
};
use cilbench::hierarchy::{ClassId, Hierarchy};
use cilbench::metrics::PredictionRecord;

fn tiny_tsv() -> String {
    let mut tsv = String::new();
    for s in 0..2 {
        for c in 0..2 {
            writeln!(tsv, "s{s}c{c}\ttop{s}").unwrap();
        }
    }
    writeln!(tsv, "solo").unwrap();
    tsv
}

fn tiny_config(dir: &std::path::Path) -> ExperimentConfig {
    let tsv_path = dir.join("h.tsv");
    fs::write(&tsv_path, tiny_tsv()).unwrap();
    ExperimentConfig {
        hierarchy: Some(tsv_path),
        dim: 8,
        train_per_subclass: 50,
        test_per_subclass: 20,
        n0: 2,
        k: 3,
        hidden: vec![16],
        epochs: 2,
        learners: vec!["er".into()],
        seeds: vec![3],
        out: dir.join("out"),
        ..ExperimentConfig::default()
    }
}

#[test]
fn predictions_csv_round_trip() {
    let h = Hierarchy::parse_tsv(&tiny_tsv()).unwrap();
    let records = vec![
        PredictionRecord::new(7, [ClassId(0), ClassId(1)], [ClassId(1)]),
        PredictionRecord::new(9, [ClassId(4)], []),
    ];
    let csv = predictions_to_csv(&records, &h);
    let parsed = predictions_from_csv(&csv).unwrap();
    assert_eq!(parsed.len(), 2);
    for (a, b) in records.iter().zip(&parsed) {
        assert_eq!(a.sample_id, b.sample_id);
        assert_eq!(a.truth.len(), b.truth.len());
        assert_eq!(a.predicted.len(), b.predicted.len());
        assert_eq!(a.pw_jaccard(), b.pw_jaccard());
        assert_eq!(a.jaccard(), b.jaccard());
    }
}

#[test]
fn predictions_csv_rejects_malformed_rows() {
    assert!(predictions_from_csv("1,a;b\n").is_err());
    assert!(predictions_from_csv("x,a,b\n").is_err());
}

#[test]
fn run_report_and_eval_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    cmd_run(&cfg, &RunOptions::default()).unwrap();

    let seed_dir = cfg.out.join("er").join("seed_3");
    for file in ["tasks.json", "r_matrix.csv", "confusion.csv", "summary.json", "task_0.json"] {
        assert!(seed_dir.join(file).exists(), "missing {file}");
    }

    // aggregation identity: one seed, mean equals the curve, stdev zero
    let aggregate = fs::read_to_string(cfg.out.join("aggregate_er.csv")).unwrap();
    for line in aggregate.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[2].parse::<f64>().unwrap(), 0.0);
        assert_eq!(fields[3], "1");
    }

    // report over the run directory reproduces the aggregate
    let report = cmd_report(&[cfg.out.join("er")]).unwrap();
    assert_eq!(report, aggregate);

    // eval on an emitted predictions file yields metrics in [0, 1]
    let json = cmd_eval(&seed_dir.join("preds_test_after_0.csv")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    for key in ["MR", "JS", "pwJS"] {
        let x = v[key].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&x), "{key} = {x}");
    }
}

#[test]
fn checkpoint_save_and_warm_start() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(tmp.path());
    cmd_run(&cfg, &RunOptions { save: true, load: None }).unwrap();
    let ckpt = cfg.out.join("er").join("seed_3").join("model");
    assert!(ckpt.with_extension("bin").exists());
    assert!(ckpt.with_extension("json").exists());

    // a trained checkpoint has head rows, so warm-starting from it fails
    cfg.out = tmp.path().join("out2");
    let err = cmd_run(&cfg, &RunOptions { save: false, load: Some(ckpt) }).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn split_verify_reports_expected_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let report = cmd_split_verify(&cfg, 3).unwrap();
    assert!(report.starts_with("split,with_duplicates,without_duplicates\n"));
    // 5 classes x 50, 10%/10% split: 40 train, 5 + 5 validation each
    assert!(report.contains("train,"), "{report}");
    let train_line = report.lines().find(|l| l.starts_with("train,")).unwrap();
    let without: usize = train_line.split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(without, 200);
}

#[test]
fn config_file_errors_are_data_errors() {
    let err = ExperimentConfig::from_path(std::path::Path::new("/nonexistent.json")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(ExperimentConfig::from_path(&bad).unwrap_err().exit_code(), 2);
    let unknown = tmp.path().join("unknown.json");
    fs::write(&unknown, "{\"no_such_field\": 1}").unwrap();
    assert_eq!(ExperimentConfig::from_path(&unknown).unwrap_err().exit_code(), 2);
}

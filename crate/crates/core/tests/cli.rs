use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use vessel_bench::harness::{ExperimentConfig, ExperimentReport};

fn vessel_bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vessel-bench"))
        .args(args)
        .env_remove("VESSEL_BENCH_CACHE")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(tree(&p));
        } else {
            out.push((
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            ));
        }
    }
    out.sort();
    out
}

#[test]
fn no_arguments_prints_usage_and_exits_1() {
    let out = vessel_bench(&[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_flags_and_values_are_usage_errors() {
    assert_eq!(
        vessel_bench(&["generate", "--bogus"]).status.code(),
        Some(1)
    );
    assert_eq!(
        vessel_bench(&["report", "--runs", "x.csv", "--format", "xml"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(vessel_bench(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_failures_exit_2() {
    let out = vessel_bench(&["report", "--runs", "/nonexistent/runs.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/runs.csv"));
}

#[test]
fn generate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = vessel_bench(&[
            "generate",
            "--per-class",
            "2",
            "--seed",
            "7",
            "--size",
            "64",
            "--out",
            path(d),
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let files = tree(&a);
    assert_eq!(files.iter().filter(|(n, _)| n.ends_with(".png")).count(), 8);
    assert!(files.iter().any(|(n, _)| n == "manifest.csv"));
    assert!(files.iter().any(|(n, _)| n == "provenance.json"));
    assert_eq!(files, tree(&b));
}

#[test]
fn train_then_eval_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let model = dir.path().join("model");
    let manifest = data.join("manifest.csv");
    assert!(vessel_bench(&[
        "generate",
        "--per-class",
        "3",
        "--seed",
        "2",
        "--size",
        "64",
        "--out",
        path(&data)
    ])
    .status
    .success());

    let out = vessel_bench(&[
        "train",
        "--manifest",
        path(&manifest),
        "--method",
        "hog+svm",
        "--out",
        path(&model),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = vessel_bench(&[
        "eval",
        "--manifest",
        path(&manifest),
        "--model",
        path(&model),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["samples"], 12);
    assert_eq!(summary["method"], "HOG+SVM");

    let feats = dir.path().join("features");
    assert!(vessel_bench(&[
        "extract",
        "--manifest",
        path(&manifest),
        "--method",
        "hmlbp+svm",
        "--out",
        path(&feats)
    ])
    .status
    .success());
    let text = fs::read_to_string(feats.join("features.csv")).unwrap();
    assert_eq!(text.lines().count(), 13);
    assert_eq!(
        text.lines().next().unwrap().split(',').count(),
        2 + 58 * 3 + 1
    );

    let pre = dir.path().join("pre");
    assert!(vessel_bench(&[
        "preprocess",
        "--manifest",
        path(&manifest),
        "--size",
        "64",
        "--out",
        path(&pre)
    ])
    .status
    .success());
    assert_eq!(
        tree(&pre)
            .iter()
            .filter(|(n, _)| n.ends_with(".png"))
            .count(),
        12
    );
}

#[test]
fn experiment_output_does_not_depend_on_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default_grid(9);
    cfg.resize(Some(10), Some(64));
    cfg.splits = vec![0.8, 0.5];
    cfg.shuffles = 2;
    if let Some(a) = cfg.adaptation.as_mut() {
        a.splits = vec![0.8, 0.2];
    }
    let config = dir.path().join("config.json");
    fs::write(&config, cfg.to_json()).unwrap();

    let mut runs = Vec::new();
    for jobs in ["1", "3"] {
        let out_dir = dir.path().join(format!("jobs{jobs}"));
        let out = vessel_bench(&[
            "experiment",
            "--config",
            path(&config),
            "--jobs",
            jobs,
            "--out",
            path(&out_dir),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(String::from_utf8_lossy(&out.stdout).contains("| Data Split % (Training / Test) |"));
        assert!(out_dir.join("report.md").exists());
        let prov: serde_json::Value =
            serde_json::from_slice(&fs::read(out_dir.join("provenance.json")).unwrap()).unwrap();
        assert_eq!(prov["master_seed"], 9);
        assert_eq!(prov["config_hash"], cfg.hash());
        runs.push(fs::read(out_dir.join("runs.csv")).unwrap());
    }
    assert_eq!(runs[0], runs[1]);

    let runs_path = dir.path().join("jobs1").join("runs.csv");
    let report = ExperimentReport::load_csv(&runs_path).unwrap();
    assert_eq!(report.runs.len(), 3 * 2 * 2 + 2 * 2 * 3);
    let csv = vessel_bench(&["report", "--runs", path(&runs_path), "--format", "csv"]);
    assert_eq!(csv.stdout, runs[0]);
    let md = vessel_bench(&["report", "--runs", path(&runs_path)]);
    assert_eq!(String::from_utf8(md.stdout).unwrap(), report.to_markdown());
}

#[test]
fn shipped_config_is_the_default_grid() {
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/bench.json");
    assert_eq!(
        ExperimentConfig::load(&shipped).unwrap(),
        ExperimentConfig::default_grid(42)
    );
}

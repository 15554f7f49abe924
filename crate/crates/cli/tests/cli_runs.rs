use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gampinn_cli::metrics::Table;
use gampinn_core::oracle_solvers::read_field;

const SMALL_BURGERS: [&str; 4] = ["--burgers-nx", "256", "--burgers-nt", "100"];

fn gampinn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gampinn"))
        .args(args)
        .env_remove("GAMPINN_OUT")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = gampinn(args);
    assert!(
        out.status.success(),
        "gampinn {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn rows_without_timing(path: &Path) -> Vec<Vec<String>> {
    Table::read(path).unwrap().without_timing().rows
}

fn meta_train(dir: &Path, extra: &[&str]) {
    let mut args = vec![
        "meta-train",
        "--out-dir",
        path_str(dir),
        "--epochs",
        "10",
        "--log-every",
        "5",
        "--seed",
        "3",
        "--epsilon",
        "0",
    ];
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn meta_train_writes_snapshots_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    meta_train(dir.path(), &[]);
    for arm in ["maml", "gampinn"] {
        assert!(dir.path().join(format!("meta-{arm}-sincos-s3.params")).is_file());
    }
    let trace = Table::read(&dir.path().join("meta_trace.csv")).unwrap();
    let arm = trace.column("arm").unwrap();
    for name in ["maml", "gampinn"] {
        assert_eq!(trace.rows.iter().filter(|r| r[arm] == name).count(), 10);
    }
    let support = trace.column("gam_calls_support").unwrap();
    let query = trace.column("gam_calls_query").unwrap();
    for r in &trace.rows {
        assert_eq!(r[query], "0");
        let expected = if r[arm] == "gampinn" { "5" } else { "0" };
        assert_eq!(r[support], expected);
    }
    let metrics = Table::read(&dir.path().join("metrics.csv")).unwrap();
    let epoch = metrics.column("epoch").unwrap();
    let mut epochs: Vec<&str> = metrics.rows.iter().map(|r| r[epoch].as_str()).collect();
    epochs.dedup();
    assert_eq!(epochs.first(), Some(&"0"));
    assert_eq!(epochs.last(), Some(&"9"));
}

#[test]
fn runs_are_reproducible_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    meta_train(a.path(), &["--threads", "1"]);
    meta_train(b.path(), &["--threads", "3"]);
    for file in ["metrics.csv", "meta_trace.csv"] {
        assert_eq!(
            rows_without_timing(&a.path().join(file)),
            rows_without_timing(&b.path().join(file)),
            "{file}"
        );
    }
    for arm in ["maml", "gampinn"] {
        let name = format!("meta-{arm}-sincos-s3.params");
        assert_eq!(
            fs::read(a.path().join(&name)).unwrap(),
            fs::read(b.path().join(&name)).unwrap()
        );
    }
}

#[test]
fn fine_tune_with_zero_epochs_logs_the_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    meta_train(dir.path(), &[]);
    let d = path_str(dir.path());
    let mut args = vec![
        "fine-tune",
        "--out-dir",
        d,
        "--seed",
        "3",
        "--theta-list",
        "0",
        "--epochs",
        "0",
        "--random-nf",
        "200",
        "--random-nib",
        "50",
    ];
    args.extend_from_slice(&SMALL_BURGERS);
    ok(&args);
    let t = Table::read(&dir.path().join("metrics.csv")).unwrap();
    let (arm, phase, epoch, mse) = (
        t.column("arm").unwrap(),
        t.column("phase").unwrap(),
        t.column("epoch").unwrap(),
        t.column("field_mse").unwrap(),
    );
    let tuned: Vec<_> = t.rows.iter().filter(|r| r[phase] == "finetune").collect();
    assert_eq!(tuned.len(), 3);
    for r in &tuned {
        assert_eq!(r[epoch], "0");
        assert!(r[mse].parse::<f64>().unwrap().is_finite());
    }
    let arms: Vec<&str> = tuned.iter().map(|r| r[arm].as_str()).collect();
    assert_eq!(arms, ["random", "maml", "gampinn"]);
}

#[test]
fn missing_snapshot_fails_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = gampinn(&["fine-tune", "--out-dir", path_str(dir.path()), "--theta-list", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("snapshot"));
    assert!(!dir.path().join("metrics.csv").exists());
}

#[test]
fn denoise_without_noise_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = gampinn(&["denoise", "--out-dir", path_str(&out_dir), "--noise-p", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists());
}

#[test]
fn denoise_writes_both_arms_and_fields() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "denoise",
        "--out-dir",
        path_str(dir.path()),
        "--noise-p",
        "0.1",
        "--epochs",
        "20",
        "--log-every",
        "10",
        "--random-nf",
        "200",
        "--random-nib",
        "50",
    ];
    args.extend_from_slice(&SMALL_BURGERS);
    ok(&args);
    for kind in ["clean", "noisy", "corrected"] {
        let f = read_field(&dir.path().join(format!("denoise-s1-{kind}.field"))).unwrap();
        assert_eq!(f.shape(), vec![101, 257]);
    }
    let t = Table::read(&dir.path().join("summary.csv")).unwrap();
    let phase = t.column("phase").unwrap();
    let phases: Vec<&str> = t.rows.iter().map(|r| r[phase].as_str()).collect();
    assert!(phases.contains(&"denoise-noisy"));
    assert!(phases.contains(&"denoise-corrected"));
}

#[test]
fn burgers_oracle_has_zero_walls_and_is_bitwise_stable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let mut args = vec!["solve-oracle", "--out-dir", path_str(d.path()), "--task-params", "0.4"];
        args.extend_from_slice(&SMALL_BURGERS);
        ok(&args);
    }
    let name = "oracle-sincos-0.4.field";
    let bytes = fs::read(a.path().join(name)).unwrap();
    assert_eq!(bytes, fs::read(b.path().join(name)).unwrap());
    let f = read_field(&a.path().join(name)).unwrap();
    let [nt, nx] = f.shape()[..] else {
        panic!("burgers field is 2-d")
    };
    for k in 0..nt {
        assert_eq!(f.get(&[k, 0]), 0.0);
        assert_eq!(f.get(&[k, nx - 1]), 0.0);
    }
}

#[test]
fn heat_oracle_top_edge_carries_the_boundary_profile() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "solve-oracle",
        "--equation",
        "heat",
        "--task-params",
        "1,0.5",
        "--out-dir",
        path_str(dir.path()),
        "--heat-n",
        "64",
        "--heat-nt",
        "20",
    ]);
    let f = read_field(&dir.path().join("oracle-amplitude-1.0_0.5.field")).unwrap();
    let [nt, ny, nx] = f.shape()[..] else {
        panic!("heat field is 3-d")
    };
    let xs = &f.axis("x").unwrap().coords;
    for k in 0..nt {
        for (i, &x) in xs.iter().enumerate().take(nx) {
            let want = (std::f64::consts::PI * x).sin();
            assert!((f.get(&[k, ny - 1, i]) - want).abs() < 1e-12);
        }
    }
}

fn manifest_of(dir: &Path) -> PathBuf {
    dir.join("manifest.txt")
}

#[test]
fn manifest_reproduces_the_run() {
    let a = tempfile::tempdir().unwrap();
    meta_train(a.path(), &["--arm", "gampinn", "--tasks", "2"]);
    let b = tempfile::tempdir().unwrap();
    ok(&[
        "meta-train",
        "--config",
        path_str(&manifest_of(a.path())),
        "--out-dir",
        path_str(b.path()),
    ]);
    assert_eq!(
        rows_without_timing(&a.path().join("meta_trace.csv")),
        rows_without_timing(&b.path().join("meta_trace.csv"))
    );
    let text = fs::read_to_string(manifest_of(a.path())).unwrap();
    let digest_lines = text.lines().filter(|l| l.starts_with("# sha256 ")).count();
    assert!(digest_lines >= 3);
}

#[test]
fn export_aggregates_fine_tune_rows() {
    let dir = tempfile::tempdir().unwrap();
    meta_train(dir.path(), &[]);
    let d = path_str(dir.path());
    let mut args = vec![
        "fine-tune",
        "--out-dir",
        d,
        "--seed",
        "3",
        "--theta-list",
        "0,0.5",
        "--epochs",
        "1000",
        "--log-every",
        "500",
        "--random-nf",
        "100",
        "--random-nib",
        "40",
    ];
    args.extend_from_slice(&SMALL_BURGERS);
    ok(&args);
    ok(&["export-figures-data", "--out-dir", d]);
    let conv = Table::read(&dir.path().join("convergence.csv")).unwrap();
    let (arm, epoch, n) = (
        conv.column("arm").unwrap(),
        conv.column("epoch").unwrap(),
        conv.column("n").unwrap(),
    );
    assert_eq!(conv.rows.len(), 3 * 3);
    assert!(conv.rows.iter().all(|r| r[n] == "2"));
    assert!(conv.rows.iter().any(|r| r[arm] == "random" && r[epoch] == "1000"));
    let table = Table::read(&dir.path().join("table.csv")).unwrap();
    let task = table.column("task").unwrap();
    assert_eq!(table.rows.iter().filter(|r| r[task] == "mean").count(), 3);
    assert_eq!(table.rows.len(), 3 * 3);
}

#[test]
fn help_exits_cleanly() {
    let out = gampinn(&["--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("meta-train"));
    assert_eq!(gampinn(&["meta-train", "--epochs", "many"]).status.code(), Some(2));
}

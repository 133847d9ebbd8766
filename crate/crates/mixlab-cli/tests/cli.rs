//! End-to-end tests of the binary: exit codes, output files, thread
//! determinism, and the plotdata projection.

use std::path::Path;
use std::process::{Command, Output};

fn mixlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixlab"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn verify_suite_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mixlab(&["verify"], tmp.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains(", 0 failed"));
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn kernels_run_writes_all_pass_rows() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "k.cfg", "[experiment]\nkind = kernels\n");
    let out = mixlab(&["run", "k.cfg", "--out", "res"], tmp.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("res/results.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert!(rows.len() > 50);
    assert!(rows.iter().all(|r| r.ends_with(",pass")), "some identity failed:\n{csv}");
    assert!(tmp.path().join("res/manifest.json").exists());
}

#[test]
fn unknown_key_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "bad.cfg", "[experiment]\nkind = decay\n[decay]\nt_values = 1\nradiuss = 0.4\n");
    let out = mixlab(&["run", "bad.cfg", "--out", "res"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("radiuss"));
}

#[test]
fn unknown_experiment_kind_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "bad.cfg", "[experiment]\nkind = frobnicate\n");
    let out = mixlab(&["run", "bad.cfg"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("frobnicate"));
}

#[test]
fn decay_results_are_thread_count_independent() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "d.cfg",
        "[experiment]\nkind = decay\nseed = 5\nsamples = 4000\n[decay]\nt_values = 0.5, 1.0, 1.5\n",
    );
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let dir = format!("res{threads}");
        let out = mixlab(&["run", "d.cfg", "--threads", threads, "--out", &dir], tmp.path());
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
        outputs.push(std::fs::read_to_string(tmp.path().join(dir).join("results.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "results depend on the worker count");
}

#[test]
fn decay_plotdata_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "d.cfg",
        "[experiment]\nkind = decay\nseed = 5\nsamples = 20000\n[decay]\nt_values = 0.5, 1.0, 1.5\n",
    );
    let out = mixlab(&["run", "d.cfg", "--out", "res"], tmp.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let out = mixlab(
        &["plotdata", "res/results.csv", "decay", "--out", "res/decay.plot"],
        tmp.path(),
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let plot = std::fs::read_to_string(tmp.path().join("res/decay.plot")).unwrap();
    let mut lines = plot.lines();
    assert_eq!(lines.next(), Some("# log_M_hat log_abs_error"));
    for line in lines {
        let cols: Vec<f64> = line.split_whitespace().map(|v| v.parse().unwrap()).collect();
        assert_eq!(cols.len(), 2);
    }
}

#[test]
fn plotdata_rejects_unknown_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let results = write(tmp.path(), "results.csv", "a,b\n1,2\n");
    let out = mixlab(&["plotdata", results.to_str().unwrap(), "histogram"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("histogram"));
}

#[test]
fn scheduler_run_and_plotdata() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "s.cfg",
        "[experiment]\nkind = scheduler\n[scheduler]\nw = 1.0, 0.3, 0.001\nq = 1000\n",
    );
    let out = mixlab(&["run", "s.cfg", "--out", "res"], tmp.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("res/results.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("result,")));
    let out = mixlab(&["plotdata", "res/results.csv", "scheduler"], tmp.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("res/results.scheduler.plot").exists());
}

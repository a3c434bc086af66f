//! End-to-end behavior of the `nfsense` binary.

use std::path::Path;
use std::process::{Command, Output};

use nfsense::tcn::{load_model, TcnModel};

fn nfsense(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nfsense"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("NFSENSE_THREADS", "1")
        .output()
        .expect("spawn nfsense")
}

fn ok(args: &[&str], out: &Path) {
    let o = nfsense(args, out);
    assert!(o.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&o.stderr));
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn bad_flag_prints_usage_and_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nfsense(&["capacity", "--no-such-flag"], tmp.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn missing_input_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nowhere.tcn");
    let o = nfsense(&["recover", "--model", missing.to_str().unwrap(), "--input", "x.csv"], tmp.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("nowhere.tcn"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nfsense(&["capacity", "--set", "capacity.bogus=3"], tmp.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("capacity.bogus"), "{}", stderr(&o));

    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "# comment\nseed = 4\ntrain.nonsense = 1\n").unwrap();
    let o = nfsense(&["capacity", "--config", cfg.to_str().unwrap()], tmp.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("train.nonsense"), "{}", stderr(&o));
}

#[test]
fn capacity_table_peaks_at_51() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["capacity"], tmp.path());
    let text = std::fs::read_to_string(tmp.path().join("capacity.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "n_max_fit").expect("n_max_fit column");
    let best = lines
        .filter_map(|l| l.split(',').nth(col)?.parse::<f64>().ok())
        .fold(0.0f64, f64::max);
    assert_eq!(best, 51.0);
}

#[test]
fn pipeline_runs_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let d = |s: &str| tmp.path().join(s);
    let p = |s: &str| d(s).display().to_string();
    ok(&["simulate", "--duration", "120", "--seed", "3"], &d("sim"));
    assert!(d("sim/ue0.csv").exists() && d("sim/scene.txt").exists());
    ok(&["build-dataset", "--input", &p("sim"), "--seed", "3"], &d("ds"));
    ok(&["train", "--data", &p("ds"), "--epochs", "1", "--channels", "8"], &d("model"));
    let model = p("model/model.tcn");
    ok(&["recover", "--model", &model, "--input", &p("sim/ue0.csv")], &d("rec"));
    assert!(d("rec/ue0.recovered.spec").exists());
    ok(&["eval", "--input", &p("sim"), "--model", &model, "--data", &p("ds")], &d("eval"));
    let metrics = std::fs::read_to_string(d("eval/metrics.csv")).unwrap();
    assert!(metrics.contains("near_field_median_error_bpm"));
    assert!(!metrics.contains("NaN") && !metrics.contains("inf"));
}

#[test]
fn zero_epochs_keeps_initial_weights() {
    let tmp = tempfile::tempdir().unwrap();
    let d = |s: &str| tmp.path().join(s);
    let p = |s: &str| d(s).display().to_string();
    ok(&["simulate", "--duration", "120"], &d("sim"));
    ok(&["build-dataset", "--input", &p("sim")], &d("ds"));
    ok(&["train", "--data", &p("ds"), "--epochs", "0", "--channels", "8"], &d("model"));
    let trained = load_model(&d("model/model.tcn")).unwrap();
    let fresh = TcnModel::new(trained.config().clone()).unwrap();
    assert_eq!(trained.params(), fresh.params());
}

#[test]
fn register_sim_rejects_then_admits_intruder() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["register-sim"], tmp.path());
    let text = std::fs::read_to_string(tmp.path().join("admission.csv")).unwrap();
    let rejected = text.find(",x,rejected").expect("intruder rejected");
    let admitted = text.find(",x,admitted").expect("intruder admitted");
    assert!(rejected < admitted, "{text}");
}

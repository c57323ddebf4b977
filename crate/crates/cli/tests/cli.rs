use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mnlab(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mnlab"));
    cmd.args(args).env_remove("MNLAB_SEED");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const CERT: &[&str] = &["certificate", "--model", "m1", "--n", "512", "--c", "5", "--seed", "3"];

#[test]
fn passing_run_exits_zero_with_envelope() {
    let out = run(&mut mnlab(CERT));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["command"], "certificate");
    assert_eq!(v["pass"], true);
    assert_eq!(v["config"]["n"], 512);
    assert_eq!(v["config_hash"].as_str().map(str::len), Some(64));
    assert!(String::from_utf8_lossy(&out.stderr).contains("PASS"));
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        &["certificate", "--model", "m7"][..],
        &["certificate", "--q", "1"],
        &["verify-spectral", "--tau", "1"],
        &["certificate", "--alpha", "3"],
        &["no-such-command"],
    ] {
        let out = run(&mut mnlab(args));
        assert_eq!(out.status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn failed_invariant_exits_two_and_names_it() {
    let out = run(&mut mnlab(&["verify-model3-structure", "--n", "64"]));
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["pass"], false);
    assert!(!v["failures"].as_array().unwrap().is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL"));
}

#[test]
fn help_exits_zero() {
    assert_eq!(run(&mut mnlab(&["--help"])).status.code(), Some(0));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let out = run(mnlab(CERT).arg("--out").arg(p));
        assert_eq!(out.status.code(), Some(0));
        assert!(out.stdout.is_empty());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn worker_count_does_not_change_output() {
    let one = run(mnlab(CERT).args(["--workers", "1"]));
    let three = run(mnlab(CERT).args(["--workers", "3"]));
    assert_eq!(one.stdout, three.stdout);
    let sim = ["simulate-rate", "--ns", "256,512", "--reps", "40", "--seed", "9"];
    let one = run(mnlab(&sim).args(["--workers", "1"]));
    let three = run(mnlab(&sim).args(["--workers", "3"]));
    assert_eq!(one.stdout, three.stdout);
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let p = dir.join("run.conf");
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn flags_override_config_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "# certificate run\nmodel = m2\nn = 256\nc = 6\nseed = 4\n");
    let out = run(mnlab(&["certificate", "--n", "512"]).arg("--config").arg(&conf));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["config"]["model"], "m2");
    assert_eq!(v["config"]["n"], 512);
    assert_eq!(v["config"]["seed"], 4);
}

#[test]
fn seed_falls_back_to_environment() {
    let out = run(mnlab(CERT.iter().take(7).copied().collect::<Vec<_>>().as_slice()).env("MNLAB_SEED", "41"));
    assert_eq!(json(&out)["config"]["seed"], 41);
    let out = run(mnlab(CERT).env("MNLAB_SEED", "41"));
    assert_eq!(json(&out)["config"]["seed"], 3);
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "seed = 12\n");
    let out = run(mnlab(&["certificate", "--n", "512"]).arg("--config").arg(&conf).env("MNLAB_SEED", "41"));
    assert_eq!(json(&out)["config"]["seed"], 12);
}

#[test]
fn config_file_keys_are_checked() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "n = 256\nbogus = 1\n");
    let out = run(mnlab(&["certificate"]).arg("--config").arg(&conf));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2"));
    let conf = write_config(dir.path(), "reps = 10\n");
    let out = run(mnlab(&["certificate"]).arg("--config").arg(&conf));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn flags_unused_by_command_are_rejected() {
    let out = run(&mut mnlab(&["rate-table", "--n", "64"]));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn failed_run_leaves_no_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("out.json");
    let out = run(mnlab(&["certificate", "--alpha", "3"]).arg("--out").arg(&target));
    assert_eq!(out.status.code(), Some(1));
    assert!(!target.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn rate_table_is_csv() {
    let out = run(&mut mnlab(&["rate-table", "--alphas", "1,2", "--qs", "0,1"]));
    assert_eq!(out.status.code(), Some(0));
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    // three fixed models plus one Mq row per q, for each alpha
    assert_eq!(rows.len(), 10);
    let m1: f64 = rows[0][3].parse().unwrap();
    assert!((m1 + 1.0 / 6.0).abs() < 1e-15);
    let out = run(&mut mnlab(&["rate-table", "--format", "json"]));
    assert_eq!(json(&out)["command"], "rate-table");
}

#[test]
fn csv_is_refused_without_a_table() {
    let out = run(&mut mnlab(&["verify-kl", "--n", "10", "--reps", "5", "--format", "csv"]));
    assert_eq!(out.status.code(), Some(1));
}

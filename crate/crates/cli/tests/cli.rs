use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[experiment]
name = "fig4-ratio"
trials = 20
n = [16, 32]
b = [1, "inf"]
"#;

fn ris_lab(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ris-lab"));
    cmd.args(args).env_remove("RIS_LAB_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn validate_ok_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.toml", SMALL);
    let out = ris_lab(&["validate", "--config", &good], &[]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("fig4-ratio"));

    let bad = write(dir.path(), "bad.toml", "[experiment]\nfoo = 1\n");
    let out = ris_lab(&["validate", "--config", &bad], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("foo"));

    let neg = write(dir.path(), "neg.toml", "[experiment]\nn = [-1]\n");
    assert_eq!(ris_lab(&["validate", "--config", &neg], &[]).status.code(), Some(1));

    let missing = dir.path().join("missing.toml");
    let out = ris_lab(&["validate", "--config", missing.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_arguments_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.toml", SMALL);
    assert_eq!(ris_lab(&["frobnicate"], &[]).status.code(), Some(1));
    let out = ris_lab(&["run", "--config", &good, "--experiment", "fig99"], &[]);
    assert_eq!(out.status.code(), Some(1));
    let out = ris_lab(&["run", "--config", &good, "--trials", "0"], &[]);
    assert_eq!(out.status.code(), Some(1));
    let out = ris_lab(&["run", "--config", &good, "--threads", "0"], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(ris_lab(&["--help"], &[]).status.code(), Some(0));
}

#[test]
fn run_writes_csv_and_is_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out = ris_lab(&["run", "--config", &cfg, "--out", a.to_str().unwrap(), "--threads", "1"], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = ris_lab(&["run", "--config", &cfg, "--out", b.to_str().unwrap()], &[("RIS_LAB_THREADS", "3")]);
    assert_eq!(out.status.code(), Some(0));
    let csv_a = std::fs::read_to_string(a.join("fig4-ratio.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read_to_string(b.join("fig4-ratio.csv")).unwrap());
    assert!(csv_a.starts_with("experiment,n,b,metric,value,ci_low,ci_high,trials,seed\n"));
    // 2 N values x 2 b values x 3 metrics
    assert_eq!(csv_a.lines().count(), 1 + 12);
}

#[test]
fn overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let out_dir = dir.path().join("o");
    let out = ris_lab(
        &[
            "run", "--config", &cfg, "--experiment", "custom", "--seed", "77", "--trials", "5", "--out",
            out_dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(out_dir.join("custom.csv")).unwrap();
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("custom,16,1,"));
    assert!(row.ends_with(",5,77"), "{row}");
    assert!(!out_dir.join("fig4-ratio.csv").exists());
}

#[test]
fn unwritable_output_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    // a regular file where the output directory should be
    let blocker = write(dir.path(), "blocker", "");
    let out = ris_lab(&["run", "--config", &cfg, "--out", &blocker], &[]);
    assert_eq!(out.status.code(), Some(2));
}

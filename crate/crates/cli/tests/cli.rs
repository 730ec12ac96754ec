use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lyaflight(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lyaflight")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_then_metrics_then_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = lyaflight(&["run", "--seed", "4", "--duration", "1", "--window", "0-1", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("1000 steps"));
    assert!(stdout(&o).contains("run [0-1]"), "{}", stdout(&o));

    let metrics = dir.path().join("m.csv");
    let o = lyaflight(&[
        "metrics",
        "--steps",
        path(&out.join("steps.csv")),
        "--window",
        "0-0.5",
        "--out",
        path(&metrics),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_to_string(&metrics).unwrap().lines().count(), 2);

    let check = dir.path().join("check.csv");
    let o = lyaflight(&[
        "check",
        "--weights",
        path(&out.join("weights.json")),
        "--loop",
        "lower",
        "--tau",
        "0.01",
        "--extent",
        "1",
        "--out",
        path(&check),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("grid points satisfy"));
    assert_eq!(fs::read_to_string(&check).unwrap().lines().count(), 102);
}

#[test]
fn compare_with_named_variants() {
    let dir = tempfile::tempdir().unwrap();
    let o = lyaflight(&[
        "compare",
        "--duration",
        "0.5",
        "--window",
        "0-0.5",
        "--variant",
        "a:0:0",
        "--variant",
        "b:500:0.1",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("a/steps.csv").is_file());
    assert!(dir.path().join("b/manifest.txt").is_file());
    assert!(fs::read_to_string(dir.path().join("comparison.csv")).unwrap().starts_with("window,metric,a,b"));
}

#[test]
fn selftest_reports_each_oracle() {
    let o = lyaflight(&["selftest"]);
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]")).count(), 4, "{text}");
    // the forward-Euler vs RK4 tolerance cannot be met at dt = 1e-3
    assert!(text.contains("[FAIL]"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_config_exits_with_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "seed = 1\nhigher.gamma = fast\n").unwrap();
    let o = lyaflight(&["run", "--config", path(&cfg), "--out", path(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("gamma"), "{err}");
}

#[test]
fn divergence_exits_nonzero_with_partial_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.cfg");
    fs::write(&cfg, "duration = 5\ndivergence_limit = 0.5\n").unwrap();
    let out = dir.path().join("run");
    let o = lyaflight(&["run", "--config", path(&cfg), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    let rows = fs::read_to_string(out.join("steps.csv")).unwrap().lines().count() - 1;
    assert!(rows > 0 && rows < 5000);
    assert!(fs::read_to_string(out.join("manifest.txt")).unwrap().contains("status = diverged"));
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adascal"))
}

fn scenario2() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/scenario2.toml")
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn small_simulation(dir: &Path) -> Output {
    run(bin()
        .arg("simulate")
        .arg("--config")
        .arg(scenario2())
        .args([
            "--set",
            "runs=4",
            "--set",
            "rounds=1000",
            "--set",
            "window=200",
        ])
        .args(["--set", "block_len=100", "--set", "save_histories=1"])
        .arg("--out")
        .arg(dir))
}

#[test]
fn simulate_then_report_and_audit() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_simulation(dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "outcomes.csv",
        "histogram.json",
        "config.resolved.json",
        "history_0.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }

    let out = run(bin().arg("report").arg("--in").arg(dir.path()));
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"matches_stored\": true"));

    let report = dir.path().join("audit.json");
    let out = run(bin()
        .arg("audit")
        .arg("--history")
        .arg(dir.path().join("history_0.json"))
        .arg("--out")
        .arg(&report));
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(v["violations"], 0);
    assert_eq!(v["log_integrity"], true);
}

#[test]
fn audit_violation_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(small_simulation(dir.path()).status.code(), Some(0));
    let path = dir.path().join("history_0.json");
    let mut h: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    // shrinking the declared payoff bound shrinks every bound below the
    // observed regret
    h["payoff_bound"] = serde_json::json!(1e-9);
    std::fs::write(&path, serde_json::to_vec(&h).unwrap()).unwrap();
    let out = run(bin()
        .arg("audit")
        .arg("--history")
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("audit.json")));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validation_errors_exit_with_one_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin()
        .arg("simulate")
        .arg("--config")
        .arg(scenario2())
        .args(["--set", "window=20000", "--out"])
        .arg(dir.path()));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`window`"));

    let out = run(bin()
        .arg("nash")
        .arg("--config")
        .arg(scenario2())
        .args(["--set", "weights.candidates=[[0.0,0.0,0.0,0.0]]"]));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("weights.candidates[0]"));
}

#[test]
fn nash_lists_equilibria() {
    let out = run(bin().arg("nash").arg("--config").arg(scenario2()));
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().next().unwrap().ends_with("{BB, SS}"), "{text}");
    assert!(text.lines().last().unwrap().ends_with("{BB}"), "{text}");
}

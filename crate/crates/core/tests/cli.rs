use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nimbus(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nimbus"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = nimbus(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn repeated_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["hpa", "keda"] {
        let a = dir.path().join(format!("{name}-a"));
        let b = dir.path().join(format!("{name}-b"));
        ok(&["run", "--autoscaler", name, "--seed", "42", "--out", s(&a)]);
        ok(&["run", "--autoscaler", name, "--seed", "42", "--out", s(&b)]);
        for f in [
            "report.json",
            "timeline.csv",
            "decisions.jsonl",
            "rewards.csv",
        ] {
            assert_eq!(
                fs::read(a.join(f)).unwrap(),
                fs::read(b.join(f)).unwrap(),
                "{name}/{f}"
            );
        }
    }
    let table = ok(&[
        "compare",
        s(&dir.path().join("hpa-a/report.json")),
        s(&dir.path().join("keda-a/report.json")),
    ]);
    assert!(table.lines().count() == 3 && table.contains("hpa") && table.contains("keda"));
}

#[test]
fn train_then_run_nimbus_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let fc = dir.path().join("fc.json");
    let agent = dir.path().join("agent.json");
    let out = ok(&["train-forecaster", "--epochs", "2", "--out", s(&fc)]);
    assert!(out.contains("heldout_mape="));
    let curve = ok(&[
        "train-agent",
        "--episodes",
        "2",
        "--forecaster",
        s(&fc),
        "--out",
        s(&agent),
    ]);
    assert_eq!(curve.lines().count(), 3);
    assert!(curve.starts_with("episode,load_seed,total_reward"));
    let run = dir.path().join("run");
    ok(&[
        "run",
        "--autoscaler",
        "nimbus",
        "--forecaster",
        s(&fc),
        "--agent",
        s(&agent),
        "--out",
        s(&run),
    ]);
    let decisions = fs::read_to_string(run.join("decisions.jsonl")).unwrap();
    assert_eq!(decisions.lines().count(), 16);
    let rewards = fs::read_to_string(run.join("rewards.csv")).unwrap();
    assert!(rewards.lines().count() > 1);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(nimbus(&[]).status.code(), Some(2));
    assert_eq!(
        nimbus(&["run", "--autoscaler", "vpa"]).status.code(),
        Some(2)
    );
    assert_eq!(nimbus(&["compare", "only-one.json"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_print_json_and_exit_one() {
    let out = nimbus(&["run", "--autoscaler", "nimbus"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "MissingModel");

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "min_replicas = 5\nmax_replicas = 2\n").unwrap();
    let out = nimbus(&["run", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "ConfigInvalid");
}

#[test]
fn gradcheck_passes() {
    let out = ok(&["gradcheck", "--trials", "3"]);
    assert!(out.contains("lstm_max_rel_error=") && out.contains("dqn_max_rel_error="));
}

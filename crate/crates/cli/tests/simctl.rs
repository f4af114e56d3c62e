use std::fs;
use std::path::Path;
use std::process::Command;

fn simctl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_simctl"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn vectors_pass() {
    let out = simctl().arg("vectors").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 11);
    assert!(!text.contains("FAIL"));
}

#[test]
fn run_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(
        dir.path(),
        "s.toml",
        "scheme = \"variable\"\nsubscribers = 4\nrounds = 5\nk = [2, 3]\nseed = 11\n",
    );
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let t = dir.path().join("t.log");
    for out in [&a, &b] {
        let status = simctl()
            .args(["run", "--scenario"])
            .arg(&scenario)
            .arg("--out")
            .arg(out)
            .arg("--transcript")
            .arg(&t)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = fs::read(&a).unwrap();
    assert_eq!(a, fs::read(&b).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 3);
    assert!(fs::read_to_string(&t).unwrap().lines().all(|l| l.contains("->")));
}

#[test]
fn seed_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(
        dir.path(),
        "s.toml",
        "scheme = \"variable\"\nsubscribers = 3\nrounds = 3\ntrials = 20\n",
    );
    let csv = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let status = simctl()
            .args(["run", "--scenario"])
            .arg(&scenario)
            .arg("--out")
            .arg(&out)
            .args(["--seed", seed])
            .status()
            .unwrap();
        assert!(status.success());
        fs::read_to_string(out).unwrap()
    };
    assert_eq!(csv("5", "a.csv"), csv("5", "b.csv"));
}

#[test]
fn invalid_scenario_fails() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "bad.toml", "scheme = \"variable\"\nrounds = 0\n");
    let out = simctl()
        .args(["run", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(dir.path().join("x.csv"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("rounds"));
}

#[test]
fn attack_sweep_writes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let status = simctl()
        .args([
            "attack-sweep",
            "--scheme",
            "baseline",
            "--attack",
            "intersection",
            "--k",
            "2,4",
            "--marked",
            "0,0.2",
            "--trials",
            "50",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(out).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with("scheme,attack,k,pool,marked_fraction"));
}

#[test]
fn failed_combination_sets_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let status = simctl()
        .args([
            "attack-sweep", "--scheme", "variable", "--attack", "mark", "--k", "4", "--marked",
            "1.0", "--trials", "5", "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(!status.success());
    assert!(fs::read_to_string(out).unwrap().contains("error"));
}

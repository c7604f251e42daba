use std::path::Path;
use std::process::{Command, Output};

fn qefg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qefg")).args(args).output().unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = qefg(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn config_path() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/angel.json").display().to_string()
}

#[test]
fn two_stage_hadamard_table() {
    let text = stdout(&["demo", "two-stage", "--hadamard"]);
    let rows: Vec<Vec<f64>> =
        text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows[0], vec![0.0, 0.5, 0.5, 1.0]);
    assert_eq!(rows[1], vec![1.0, 0.5, 0.5, 0.0]);
}

#[test]
fn two_stage_given_and_random_unitaries() {
    let x = "[[[0,0],[1,0]],[[1,0],[0,0]]]";
    let text = stdout(&["demo", "two-stage", "--u1", x, "--u2", x]);
    assert!(text.contains("0,0.000000000000,1.000000000000,1.000000000000"), "{text}");
    let a = stdout(&["demo", "two-stage", "--seed", "5"]);
    assert_eq!(a, stdout(&["demo", "two-stage", "--seed", "5"]));
    assert!(a.lines().nth(1).unwrap().ends_with(",1.000000000000"));
    assert!(!qefg(&["demo", "two-stage", "--u1", "[[1]]"]).status.success());
}

#[test]
fn grover_trace() {
    let text = stdout(&["demo", "grover", "--n", "4", "--w", "2", "--iters", "1"]);
    assert_eq!(text, "t,probability\n0,0.250000000000\n1,1.000000000000\n");
}

#[test]
fn walk_csv_is_normalized() {
    let text = stdout(&["walk", "--k", "2", "--l", "11", "--steps", "4", "--coin", "random", "--seed", "3"]);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,x,mu"));
    let mut sums = [0.0; 5];
    let mut rows = 0;
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        sums[f[0].parse::<usize>().unwrap()] += f[2].parse::<f64>().unwrap();
        rows += 1;
    }
    assert_eq!(rows, 5 * 11);
    assert!(sums.iter().all(|s| (s - 1.0).abs() < 1e-9));
    assert_eq!(text, stdout(&["walk", "--k", "2", "--l", "11", "--steps", "4", "--coin", "random", "--seed", "3"]));
}

#[test]
fn angel_run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    let cfg = config_path();
    let sa = stdout(&["angel", "run", "--config", &cfg, "--matches", "5", "--seed", "9", "--out", a.to_str().unwrap()]);
    let sb = stdout(&["angel", "run", "--config", &cfg, "--matches", "5", "--seed", "9", "--out", b.to_str().unwrap()]);
    assert_eq!(sa, sb);
    let ta = std::fs::read(&a).unwrap();
    assert_eq!(ta, std::fs::read(&b).unwrap());
    assert_eq!(ta.iter().filter(|&&c| c == b'\n').count(), 5);
    let summary: serde_json::Value = serde_json::from_str(&sa).unwrap();
    assert_eq!(summary["matches"], 5);
    assert_eq!(summary["angel_wins"].as_u64().unwrap() + summary["devil_wins"].as_u64().unwrap(), 5);
}

#[test]
fn nash_on_bundled_game() {
    let text = stdout(&["nash", "--game", "two-stage", "--grid", "3", "--eps", "1e-9", "--check"]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let count = v["count"].as_u64().unwrap();
    assert!(count > 0);
    assert_eq!(v["equilibria"].as_array().unwrap().len() as u64, count);
    assert_eq!(v["subgame_checks_passed"].as_u64(), Some(count));
    let first = &v["equilibria"][0];
    assert_eq!(first["is_nash"], true);
}

#[test]
fn usage_errors_exit_nonzero() {
    for args in [
        &["walk", "--k", "1"][..],
        &["demo", "grover", "--n", "3", "--w", "0", "--iters", "1"],
        &["walk", "--k", "2", "--l", "4", "--steps", "1"],
        &["nash", "--game", "no-such-game", "--grid", "3"],
        &["angel", "run", "--config", "/nonexistent.json"],
        &["frobnicate"],
    ] {
        let out = qefg(args);
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(!out.stderr.is_empty());
    }
}

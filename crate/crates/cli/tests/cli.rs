//! The `adcl` binary end to end: output protocol, exit codes, replay
//! rejections, and bench budgets.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn adcl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adcl")).args(args).output().unwrap()
}

fn corpus(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name)
        .display()
        .to_string()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn first_line(o: &Output) -> String {
    stdout(o).lines().next().unwrap_or_default().to_string()
}

fn proof_of(name: &str) -> String {
    let out = adcl(&["solve", &corpus(name), "--proof"]);
    assert_eq!(first_line(&out), "NO", "{}", stderr(&out));
    stdout(&out)
}

fn replay(input: &str, proof: &str) -> Output {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("proof.txt");
    std::fs::write(&path, proof).unwrap();
    adcl(&["replay", input, path.to_str().unwrap()])
}

#[test]
fn solve_prints_the_verdict_first() {
    let out = adcl(&["solve", &corpus("counter_up.its")]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "NO\n");
    assert!(stderr(&out).contains("smt_queries="));

    let out = adcl(&["solve", &corpus("countdown.its")]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "MAYBE\nreason exhausted\n");
}

#[test]
fn derivation_log_follows_the_verdict() {
    let out = adcl(&["solve", &corpus("counter_up.its"), "--log-derivation"]);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "NO");
    assert_eq!(lines[1], "derivation init");
    assert!(lines.iter().any(|l| l.starts_with("derivation accelerate")));
    assert!(lines.last().unwrap().starts_with("derivation refute"));
}

#[test]
fn parse_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.its");
    std::fs::write(&bad, "vars x\nrule init -> l :: x' = && x > 0\n").unwrap();
    let out = adcl(&["solve", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stdout(&out), "ERROR\n");
    assert!(stderr(&out).contains("bad.its:2:24:"), "{}", stderr(&out));

    let out = adcl(&["solve", dir.path().join("missing.its").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(first_line(&out), "ERROR");
}

#[test]
fn usage_errors_and_missing_solver_exit_with_two() {
    let out = adcl(&["solve"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(first_line(&out), "ERROR");

    let out = adcl(&["solve", &corpus("counter_up.its"), "--seed-order", "random"]);
    assert_eq!(out.status.code(), Some(2));

    let out = adcl(&["solve", &corpus("counter_up.its"), "--smt", "/nonexistent/solver"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(first_line(&out), "ERROR");
}

#[test]
fn shuffled_orders_agree_on_the_leading_example() {
    for seed in ["shuffle:1", "shuffle:2", "shuffle:3"] {
        let out = adcl(&["solve", &corpus("leading.its"), "--seed-order", seed]);
        assert_eq!(first_line(&out), "NO", "{seed}: {}", stderr(&out));
    }
}

#[test]
fn emitted_proofs_replay() {
    for name in ["leading.its", "two_phase.its", "swap.its"] {
        let out = replay(&corpus(name), &proof_of(name));
        assert!(out.status.success(), "{name}: {}", stdout(&out));
        assert_eq!(stdout(&out), "OK\n");
    }
}

#[test]
fn replay_rejects_a_weakened_certificate() {
    let proof = proof_of("leading.its");
    let weakened: String = proof
        .lines()
        .map(|l| {
            if l.starts_with("certificate-psi ") {
                "certificate-psi true".to_string()
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    assert_ne!(weakened, proof);
    let out = replay(&corpus("leading.its"), &weakened);
    assert_eq!(out.status.code(), Some(1));
    assert!(first_line(&out).starts_with("FAILED witness"), "{}", stdout(&out));
}

#[test]
fn replay_rejects_literals_missing_from_the_input() {
    let proof = proof_of("leading.its");
    let mut edited = false;
    let tampered: String = proof
        .lines()
        .map(|l| {
            if !edited && l.contains(" implicant ") {
                edited = true;
                format!("{l} && x <= 7")
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    assert!(edited);
    let out = replay(&corpus("leading.its"), &tampered);
    assert_eq!(out.status.code(), Some(1));
    assert!(first_line(&out).starts_with("FAILED derivation"), "{}", stdout(&out));
}

#[test]
fn replay_rejects_a_different_input() {
    let out = replay(&corpus("swap.its"), &proof_of("counter_up.its"));
    assert_eq!(out.status.code(), Some(1));
    assert!(first_line(&out).starts_with("FAILED input-hash"), "{}", stdout(&out));
}

#[test]
fn bench_on_an_empty_directory_prints_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = adcl(&["bench", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "name,verdict,wall_ms,learned,depth,smt_queries\n");
}

#[test]
fn bench_reports_manifest_violations() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(corpus("counter_up.its"), dir.path().join("counter_up.its")).unwrap();
    std::fs::write(dir.path().join("manifest.txt"), "counter_up.its MAYBE\n").unwrap();
    let out = adcl(&["bench", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("counter_up.its"), "{}", stderr(&out));
    let rows = stdout(&out);
    assert!(rows.lines().nth(1).unwrap().starts_with("counter_up.its,NO,"));
    assert!(rows.lines().last().unwrap().starts_with("TOTAL,solved=1/1,"));
}

#[test]
fn diverging_instance_uses_its_budget() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(fixture("diverging.its"), dir.path().join("diverging.its")).unwrap();
    let out = adcl(&["bench", dir.path().to_str().unwrap(), "--timeout", "2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[..2], ["diverging.its", "MAYBE"]);
    let wall: u64 = row[2].parse().unwrap();
    assert!((1800..=3000).contains(&wall), "wall {wall} ms for a 2 s budget");

    let out = adcl(&["solve", fixture("diverging.its").to_str().unwrap(), "--timeout", "1"]);
    assert_eq!(stdout(&out), "MAYBE\nreason budget\n");
}

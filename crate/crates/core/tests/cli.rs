//! End-to-end tests of the `specbeam` binary: flag handling, exit codes,
//! output shape, and reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use specbeam::harness::ModelKind;
use specbeam::scorer::TabularModel;
use specbeam::trace::DecodeTrace;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_specbeam"));
    cmd.stdin(Stdio::null());
    cmd.env_remove("SIMUL_DECODE_SEED");
    cmd
}

fn garden_model_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models/garden_path.model")
}

fn write_file(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
    assert_eq!(
        bin().arg("--version").output().unwrap().status.code(),
        Some(0)
    );
}

#[test]
fn unknown_flag_exits_64() {
    let out = bin().args(["decode", "--nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn missing_model_flags_exit_64_with_usage_hint() {
    let out = bin().args(["decode"]).output().unwrap();
    assert_eq!(out.status.code(), Some(64));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("--model"), "stderr was: {stderr}");
}

#[test]
fn hash_seed_without_vocab_exits_64() {
    let out = bin().args(["decode", "--hash-seed", "3"]).output().unwrap();
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn unknown_input_token_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "in.txt", "x1 oops\n");
    let out = bin()
        .args(["decode", "--model"])
        .arg(garden_model_path())
        .args(["--input"])
        .arg(&input)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("line 1"), "stderr was: {stderr}");
    assert!(stderr.contains("column 4"), "stderr was: {stderr}");
}

#[test]
fn malformed_model_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_file(dir.path(), "bad.model", "src_vocab x\n");
    let out = bin()
        .args(["decode", "--model"])
        .arg(&model)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn write_before_read_schedule_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "in.txt", "x1\n");
    let schedule = write_file(dir.path(), "sched.txt", "WR\n");
    let out = bin()
        .args(["decode", "--model"])
        .arg(garden_model_path())
        .args(["--policy", "schedule", "--schedule"])
        .arg(&schedule)
        .args(["--input"])
        .arg(&input)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_schedule_character_exits_2_with_offset() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "in.txt", "x1\n");
    let schedule = write_file(dir.path(), "sched.txt", "RXW");
    let out = bin()
        .args(["decode", "--model"])
        .arg(garden_model_path())
        .args(["--policy", "schedule", "--schedule"])
        .arg(&schedule)
        .args(["--input"])
        .arg(&input)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("offset 1"), "stderr was: {stderr}");
}

#[test]
fn garden_path_sbs_commits_b_but_greedy_commits_a() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "in.txt", "x1\n");

    let sbs = bin()
        .args(["decode", "--model"])
        .arg(garden_model_path())
        .args([
            "--policy", "wait-k", "--k", "1", "--mode", "sbs", "--beam", "2", "--window", "1",
            "--input",
        ])
        .arg(&input)
        .output()
        .unwrap();
    assert_eq!(sbs.status.code(), Some(0));
    assert_eq!(stdout_of(&sbs), "B C </s>\n");

    let greedy = bin()
        .args(["decode", "--model"])
        .arg(garden_model_path())
        .args(["--policy", "wait-k", "--k", "1", "--mode", "greedy", "--input"])
        .arg(&input)
        .output()
        .unwrap();
    assert_eq!(greedy.status.code(), Some(0));
    assert_eq!(stdout_of(&greedy), "A C </s>\n");
}

#[test]
fn degenerate_wait_k_matches_full_sentence_greedy() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "in.txt", "x1\nx1 x1\n");
    let out = bin()
        .args(["decode", "--model"])
        .arg(garden_model_path())
        .args(["--mode", "greedy", "--policy", "wait-k", "--k", "999", "--input"])
        .arg(&input)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), "A C </s>\nA C </s>\n");
}

#[test]
fn trace_and_stdout_agree() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "in.txt", "x1\nx1 x1\n");
    let trace_path = dir.path().join("trace.jsonl");
    let out = bin()
        .args(["decode", "--model"])
        .arg(garden_model_path())
        .args(["--k", "1", "--beam", "2", "--window", "1", "--trace"])
        .arg(&trace_path)
        .args(["--input"])
        .arg(&input)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));

    let lines: Vec<String> = stdout_of(&out).lines().map(String::from).collect();
    let raw = std::fs::read(&trace_path).unwrap();
    let sessions = DecodeTrace::read_sessions(raw.as_slice()).unwrap();
    assert_eq!(sessions.len(), lines.len());

    let model = ModelKind::Tabular(
        TabularModel::load(&garden_model_path()).unwrap(),
    );
    for (session, line) in sessions.iter().zip(&lines) {
        assert_eq!(&model.render(&session.committed()), line);
    }
}

#[test]
fn decode_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "in.txt", "1 2 3\n4 1\n");
    let run = |trace: &Path| {
        bin()
            .args(["decode", "--hash-seed", "11", "--vocab", "6", "--k", "2", "--trace"])
            .arg(trace)
            .args(["--input"])
            .arg(&input)
            .output()
            .unwrap()
    };
    let t1 = dir.path().join("a.jsonl");
    let t2 = dir.path().join("b.jsonl");
    let a = run(&t1);
    let b = run(&t2);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(std::fs::read(&t1).unwrap(), std::fs::read(&t2).unwrap());
}

#[test]
fn env_seed_matches_explicit_flag() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "in.txt", "1 2\n");
    let with_flag = bin()
        .args(["decode", "--hash-seed", "77", "--vocab", "5", "--input"])
        .arg(&input)
        .output()
        .unwrap();
    let mut env_cmd = bin();
    env_cmd.env("SIMUL_DECODE_SEED", "77");
    let with_env = env_cmd
        .args(["decode", "--vocab", "5", "--input"])
        .arg(&input)
        .output()
        .unwrap();
    assert_eq!(with_flag.status.code(), Some(0));
    assert_eq!(with_env.status.code(), Some(0));
    assert_eq!(with_flag.stdout, with_env.stdout);
}

#[test]
fn sweep_emits_header_and_cross_product() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "in.txt", "1 2 3\n");
    let out = bin()
        .args([
            "sweep",
            "--hash-seed",
            "3",
            "--vocab",
            "6",
            "--k-list",
            "1,3",
            "--beam-list",
            "1,5",
            "--window-list",
            "0,2",
            "--input",
        ])
        .arg(&input)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "policy,k,b,w,mode,AL,CW,BLEU,mean_logprob,tokens_per_sec");
    assert_eq!(lines.len(), 1 + 8);
}

#[test]
fn bench_reports_latency_and_throughput() {
    let out = bin()
        .args([
            "bench", "--vocab", "50", "--beam", "2", "--window", "1", "--steps", "8",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    assert!(text.contains("p50_ms"), "stdout was: {text}");
    assert!(text.contains("tokens_per_sec"), "stdout was: {text}");
}

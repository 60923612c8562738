//! Acceptance gate: ten numbered criteria, one test each. Every test ends
//! with a single `criterion NN ... PASS` line (visible with --nocapture);
//! a failed assertion marks the criterion as failed.

use std::path::Path;
use std::time::Instant;

use specbeam::harness::{run_bench, run_sweep, DecodeOptions, ModeKind, ModelKind, SweepPlan};
use specbeam::metrics::{average_lagging, consecutive_wait, sequence_logprob, LatencyInputs};
use specbeam::oracle::{enumerate_best, enumerate_lookahead};
use specbeam::policy::{parse_schedule, wait_k_actions, Action, SchedulePolicy, ThresholdAdaptive, WaitK};
use specbeam::sbs::{
    chunk_beam_search, chunk_sbs, sbs_step, sbs_step_metered, simul_decode, CommitMode, SbsConfig,
};
use specbeam::search::{beam_search_full, greedy_decode, StepMetrics};
use specbeam::scorer::TabularModel;
use specbeam::trace::Event;
use specbeam::{HashModel, TokenId, EOS_ID};

/// Deterministic pseudo-source: `len` non-eos tokens drawn from the model's
/// vocabulary, varied by seed so each model instance sees different input.
fn hash_source(seed: u64, len: usize, vocab: usize) -> Vec<TokenId> {
    (0..len)
        .map(|i| 1 + ((seed as usize + 3 * i) % (vocab - 1)))
        .collect()
}

fn g_of(actions: &[Action]) -> Vec<usize> {
    let mut g = Vec::new();
    let mut reads = 0usize;
    for a in actions {
        match a {
            Action::Read => reads += 1,
            Action::Write => g.push(reads),
        }
    }
    g
}

fn garden_model() -> TabularModel {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models/garden_path.model");
    TabularModel::load(&path).unwrap()
}

#[test]
fn criterion_01_full_search_matches_enumeration_oracle() {
    let started = Instant::now();
    let vocab = 4;
    let max_len = 4;
    // 121 = 81 open paths at depth 4 plus at most 40 frozen finished ones,
    // so b = 200 never prunes and beam search is exact.
    let b = 200;
    for seed in 0..100u64 {
        let model = HashModel::new(seed, vocab);
        let source = hash_source(seed, 3, vocab);
        let beam = beam_search_full(&model, &source, b, max_len).unwrap();
        let oracle = enumerate_best(&model, &source, max_len).unwrap();
        assert_eq!(beam.tokens, oracle.tokens, "seed {seed}");
        assert!(
            (beam.log_score - oracle.log_score).abs() <= 1e-12,
            "seed {seed}: beam {} oracle {}",
            beam.log_score,
            oracle.log_score
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "criterion 01 full-search oracle exactness: PASS (100 models, {:.2}s)",
        elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_02_sbs_step_matches_lookahead_oracle() {
    let started = Instant::now();
    let vocab = 4;
    for seed in 0..100u64 {
        let model = HashModel::new(seed, vocab);
        let source_prefix = hash_source(seed, 2, vocab);
        let committed: Vec<TokenId> = hash_source(seed / 2, (seed % 3) as usize, vocab);
        for w in 0..=3usize {
            // 3^(1+w) <= 81 open paths, so b = 100 saturates the beam.
            let cfg = SbsConfig {
                b: 100,
                w,
                max_len: 32,
                ..SbsConfig::default()
            };
            let step = sbs_step(&model, &source_prefix, &committed, &cfg).unwrap();
            let oracle =
                enumerate_lookahead(&model, &source_prefix, &committed, 1 + w, true).unwrap();
            assert_eq!(step.token, oracle, "seed {seed} w {w}");
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "criterion 02 lookahead oracle exactness: PASS (100 models x w in 0..=3, {:.2}s)",
        elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_03_degeneracy_chain_is_byte_exact() {
    let vocab = 5;
    for seed in 0..200u64 {
        let model = HashModel::new(seed, vocab);
        let source = hash_source(seed, 4, vocab);
        let committed: Vec<TokenId> = hash_source(seed + 1, (seed % 3) as usize, vocab);

        // (a) sbs mode with w = 0, b = 1 degenerates to greedy: identical
        // commits, g values, and bit-identical per-commit log-probs over a
        // full wait-1 decode.
        let sbs_cfg = SbsConfig {
            b: 1,
            w: 0,
            max_len: 12,
            commit_mode: CommitMode::Sbs,
            ..SbsConfig::default()
        };
        let greedy_cfg = SbsConfig {
            commit_mode: CommitMode::Greedy,
            ..sbs_cfg.clone()
        };
        let sbs_trace =
            simul_decode(&model, &source, &mut WaitK::new(1).unwrap(), &sbs_cfg).unwrap();
        let greedy_trace =
            simul_decode(&model, &source, &mut WaitK::new(1).unwrap(), &greedy_cfg).unwrap();
        assert_eq!(sbs_trace.committed(), greedy_trace.committed(), "seed {seed}");
        assert_eq!(sbs_trace.g_values(), greedy_trace.g_values(), "seed {seed}");
        let logp_bits = |t: &specbeam::trace::DecodeTrace| -> Vec<u64> {
            t.events()
                .iter()
                .filter_map(|e| match e {
                    Event::Commit { logp, .. } => Some(logp.to_bits()),
                    _ => None,
                })
                .collect()
        };
        assert_eq!(logp_bits(&sbs_trace), logp_bits(&greedy_trace), "seed {seed}");

        // (b) chunk_sbs with n = 1 equals sbs_step, including the score bits.
        let cfg = SbsConfig {
            b: 3,
            w: 2,
            max_len: 12,
            ..SbsConfig::default()
        };
        let chunk = chunk_sbs(&model, &source[..2], &committed, 1, &cfg).unwrap();
        let step = sbs_step(&model, &source[..2], &committed, &cfg).unwrap();
        assert_eq!(chunk.tokens, vec![step.token], "seed {seed}");
        assert_eq!(chunk.speculation, step.speculation, "seed {seed}");
        assert_eq!(chunk.score.to_bits(), step.score.to_bits(), "seed {seed}");

        // (c) chunk_sbs with w = 0 equals plain chunk beam search.
        let flat_cfg = SbsConfig { w: 0, ..cfg.clone() };
        for n in 1..=3usize {
            let spec = chunk_sbs(&model, &source[..3], &committed, n, &flat_cfg).unwrap();
            let plain = chunk_beam_search(&model, &source[..3], &committed, n, &flat_cfg).unwrap();
            assert_eq!(spec.tokens, plain.tokens, "seed {seed} n {n}");
            assert_eq!(spec.speculation, plain.speculation, "seed {seed} n {n}");
            assert_eq!(spec.score.to_bits(), plain.score.to_bits(), "seed {seed} n {n}");
        }
    }
    println!("criterion 03 degeneracy chain: PASS (200 models, byte-exact)");
}

#[test]
fn criterion_04_garden_path_witness() {
    let model = garden_model();
    let source = vec![1]; // "x1"
    let a = model.tgt_vocab().id_of("A").unwrap();
    let b = model.tgt_vocab().id_of("B").unwrap();

    // Myopic argmax takes A (0.6); the two-step horizon prefers B because
    // 0.4 * 0.9 = 0.36 beats 0.6 * 0.5 = 0.30.
    let greedy = greedy_decode(&model, &source, 8).unwrap();
    assert_eq!(greedy.tokens[0], a);

    let cfg = SbsConfig {
        b: 2,
        w: 1,
        max_len: 8,
        ..SbsConfig::default()
    };
    let step = sbs_step(&model, &source, &[], &cfg).unwrap();
    assert_eq!(step.token, b);

    let sbs_trace = simul_decode(&model, &source, &mut WaitK::new(1).unwrap(), &cfg).unwrap();
    let sbs_score = sequence_logprob(&model, &source, &sbs_trace.committed()).unwrap();
    let greedy_score = sequence_logprob(&model, &source, &greedy.tokens).unwrap();
    assert!(sbs_score > greedy_score);
    assert!((sbs_score - 0.36f64.ln()).abs() <= 1e-12);
    assert!((greedy_score - 0.30f64.ln()).abs() <= 1e-12);
    println!(
        "criterion 04 garden-path witness: PASS (sbs {:.6} > greedy {:.6})",
        sbs_score, greedy_score
    );
}

#[test]
fn criterion_05_latency_formulas() {
    for m in 1..=50usize {
        for k in 1..=m {
            let actions = wait_k_actions(k, m, m).unwrap();
            let al = average_lagging(&LatencyInputs::new(g_of(&actions), m).unwrap());
            assert!((al - k as f64).abs() <= 1e-9, "AL k {k} m {m}: {al}");
            let cw = consecutive_wait(&actions).unwrap();
            let expected = m as f64 / (m - k + 1) as f64;
            assert!((cw - expected).abs() <= 1e-9, "CW k {k} m {m}: {cw}");
        }
        // Full-sentence: every token is written after the whole source.
        let al = average_lagging(&LatencyInputs::new(vec![m; m.max(2)], m).unwrap());
        assert!((al - m as f64).abs() <= 1e-9, "full-sentence AL m {m}: {al}");
    }
    println!("criterion 05 latency formulas: PASS (all k <= m <= 50)");
}

#[test]
fn criterion_06_no_early_eos_commits() {
    let mut decodes = 0usize;
    for seed in 0..1000u64 {
        let vocab = 4 + (seed % 5) as usize;
        // Boosted eos weight makes eos the tempting choice; masking must
        // still keep it out of every pre-tail commit.
        let model = HashModel::with_params(seed, vocab, 1.0, 4.0).unwrap();
        let m = 2 + (seed % 6) as usize;
        let source = hash_source(seed, m, vocab);
        let cfg = SbsConfig {
            b: 1 + (seed % 4) as usize,
            w: (seed % 4) as usize,
            allow_early_eos: false,
            max_len: 2 * m + 3,
            commit_mode: match seed % 4 {
                0 => CommitMode::Sbs,
                1 => CommitMode::ChunkSbs,
                2 => CommitMode::ChunkBeam,
                _ => CommitMode::Greedy,
            },
            length_reward: 0.0,
        };
        let mut policy: Box<dyn specbeam::policy::Policy> = match seed % 3 {
            0 => Box::new(WaitK::new(1 + (seed % 3) as usize).unwrap()),
            1 => Box::new(ThresholdAdaptive::new(-1.5).unwrap()),
            _ => Box::new(SchedulePolicy::new(
                parse_schedule(&"RW".repeat(1 + (seed % 3) as usize)).unwrap(),
            )),
        };
        let trace = simul_decode(&model, &source, policy.as_mut(), &cfg).unwrap();

        let tail_at = trace.tail_start_index().unwrap_or(trace.events().len());
        for event in &trace.events()[..tail_at] {
            if let Event::Commit { token, .. } = event {
                assert_ne!(*token, EOS_ID, "seed {seed}: eos committed before the tail");
            }
        }
        assert_eq!(trace.committed().last(), Some(&EOS_ID), "seed {seed}");
        decodes += 1;
    }
    assert_eq!(decodes, 1000);
    println!("criterion 06 eos masking: PASS (1000 decodes, zero early eos commits)");
}

#[test]
fn criterion_07_sbs_scores_at_least_greedy_on_average() {
    let vocab = 8;
    let mut sbs_total = 0.0f64;
    let mut greedy_total = 0.0f64;
    for seed in 0..500u64 {
        let model = HashModel::new(seed, vocab);
        let source = hash_source(seed, 6, vocab);
        let sbs_cfg = SbsConfig {
            b: 5,
            w: 2,
            max_len: 17,
            commit_mode: CommitMode::Sbs,
            ..SbsConfig::default()
        };
        let greedy_cfg = SbsConfig {
            b: 1,
            w: 0,
            commit_mode: CommitMode::Greedy,
            ..sbs_cfg.clone()
        };
        let sbs = simul_decode(&model, &source, &mut WaitK::new(1).unwrap(), &sbs_cfg).unwrap();
        let greedy =
            simul_decode(&model, &source, &mut WaitK::new(1).unwrap(), &greedy_cfg).unwrap();
        sbs_total += sequence_logprob(&model, &source, &sbs.committed()).unwrap();
        greedy_total += sequence_logprob(&model, &source, &greedy.committed()).unwrap();
    }
    let margin = (sbs_total - greedy_total) / 500.0;
    assert!(
        margin >= 0.0,
        "mean sequence logprob margin (sbs - greedy) is negative: {margin}"
    );
    println!(
        "criterion 07 score-improvement trend: PASS (mean logprob margin +{:.4} over 500 models)",
        margin
    );
}

#[test]
fn criterion_08_per_token_latency_under_10ms() {
    let report = run_bench(0, 1000, 10, 5, 200).unwrap();
    assert!(report.mean_ms < 10.0, "mean {} ms", report.mean_ms);
    assert!(report.p90_ms < 10.0, "p90 {} ms", report.p90_ms);
    println!(
        "criterion 08 throughput proxy: PASS (mean {:.3} ms, p50 {:.3} ms, p90 {:.3} ms, p99 {:.3} ms, {:.0} tok/s)",
        report.mean_ms, report.p50_ms, report.p90_ms, report.p99_ms, report.tokens_per_sec
    );
}

#[test]
fn criterion_09_live_tokens_bounded_per_step() {
    let vocab = 6;
    let mut checked = 0usize;
    for &(b, w) in &[(1usize, 0usize), (2, 1), (5, 2), (10, 5)] {
        for seed in 0..20u64 {
            let model = HashModel::new(seed, vocab);
            let source = hash_source(seed, 8, vocab);
            let cfg = SbsConfig {
                b,
                w,
                max_len: 32,
                ..SbsConfig::default()
            };
            let mut committed: Vec<TokenId> = Vec::new();
            for i in 0..source.len() {
                let mut metrics = StepMetrics::default();
                let out =
                    sbs_step_metered(&model, &source[..i + 1], &committed, &cfg, &mut metrics)
                        .unwrap();
                let bound = b * (committed.len() + w + 1);
                assert!(
                    metrics.peak_live_tokens <= bound,
                    "b {b} w {w} seed {seed} step {i}: {} > {bound}",
                    metrics.peak_live_tokens
                );
                committed.push(out.token);
                checked += 1;
            }
        }
    }
    println!("criterion 09 memory invariant: PASS ({checked} steps within b*(prefix+w+1))");
}

#[test]
fn criterion_10_sweep_is_byte_deterministic() {
    // Library level: two identical sweeps produce byte-identical CSV and
    // trace strings.
    let model = ModelKind::Hash(HashModel::new(9, 6));
    let plan = SweepPlan {
        base: DecodeOptions::default(),
        modes: vec![ModeKind::Sbs, ModeKind::ChunkSbs],
        k_list: vec![1, 2],
        b_list: vec![1, 3],
        w_list: vec![0, 2],
        num_instances: 2,
        references: None,
    };
    let input = "1 2 3\n2 1\n";
    let first = run_sweep(&model, input, &plan).unwrap();
    let second = run_sweep(&model, input, &plan).unwrap();
    assert_eq!(first.csv, second.csv);
    assert_eq!(first.traces, second.traces);
    assert!(!first.traces.is_empty());

    // Binary level: two invocations of the sweep subcommand with identical
    // flags write byte-identical files.
    let dir = tempfile::tempdir().unwrap();
    let input_path = dir.path().join("in.txt");
    std::fs::write(&input_path, input).unwrap();
    let run = |tag: &str| {
        let csv = dir.path().join(format!("{tag}.csv"));
        let trace = dir.path().join(format!("{tag}.jsonl"));
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_specbeam"))
            .args(["sweep", "--hash-seed", "9", "--vocab", "6"])
            .args(["--mode-list", "sbs,chunk-sbs", "--k-list", "1,2"])
            .args(["--beam-list", "1,3", "--window-list", "0,2"])
            .args(["--num-instances", "2"])
            .arg("--input")
            .arg(&input_path)
            .arg("--csv")
            .arg(&csv)
            .arg("--trace")
            .arg(&trace)
            .status()
            .unwrap();
        assert!(status.success());
        (std::fs::read(csv).unwrap(), std::fs::read(trace).unwrap())
    };
    let (csv_a, trace_a) = run("a");
    let (csv_b, trace_b) = run("b");
    assert_eq!(csv_a, csv_b);
    assert_eq!(trace_a, trace_b);
    assert!(!csv_a.is_empty() && !trace_a.is_empty());
    println!(
        "criterion 10 determinism: PASS (csv {} bytes, traces {} bytes, bitwise equal)",
        csv_a.len(),
        trace_a.len()
    );
}

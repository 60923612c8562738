//! Experiment harness behind the `specbeam` binary: corpus decoding with
//! trace capture, hyperparameter sweeps emitting metric CSVs, and a
//! throughput benchmark. Kept in the library so integration tests can drive
//! the exact code paths the CLI uses.

use std::fmt::Write as _;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::metrics::{average_lagging, consecutive_wait, corpus_bleu, sequence_logprob, LatencyInputs};
use crate::policy::{Action, Policy, SchedulePolicy, ThresholdAdaptive, WaitK};
use crate::sbs::{full_sentence_sbs_trace, sbs_step, simul_decode, CommitMode, SbsConfig};
use crate::scorer::{HashModel, Scorer, TabularModel};
use crate::trace::{DecodeTrace, Event};
use crate::types::{TokenId, EOS_ID, EOS_SYMBOL};

/// A loaded model plus the token text mapping the CLI needs around it.
pub enum ModelKind {
    Tabular(TabularModel),
    Hash(HashModel),
}

impl ModelKind {
    pub fn scorer(&self) -> &dyn Scorer {
        match self {
            ModelKind::Tabular(m) => m,
            ModelKind::Hash(m) => m,
        }
    }

    /// Re-instantiates the model for instance `i` of a sweep. Tabular
    /// models are instance-independent; hash models shift their seed.
    fn instance(&self, offset: u64) -> ModelKind {
        match self {
            ModelKind::Tabular(m) => ModelKind::Tabular(m.clone()),
            ModelKind::Hash(m) => {
                let mut shifted = m.clone();
                shifted.seed = m.seed.wrapping_add(offset);
                ModelKind::Hash(shifted)
            }
        }
    }

    /// Splits one input line into source token ids. Columns in errors are
    /// 1-based byte offsets of the offending token.
    pub fn tokenize(&self, line: &str, lineno: usize) -> Result<Vec<TokenId>> {
        let mut tokens = Vec::new();
        let mut rest = line;
        let mut consumed = 0usize;
        loop {
            let trimmed = rest.trim_start();
            consumed += rest.len() - trimmed.len();
            if trimmed.is_empty() {
                break;
            }
            let end = trimmed
                .find(char::is_whitespace)
                .unwrap_or(trimmed.len());
            let word = &trimmed[..end];
            let column = consumed + 1;
            let id = match self {
                ModelKind::Tabular(m) => m.src_vocab().id_of(word),
                ModelKind::Hash(m) => word
                    .parse::<TokenId>()
                    .ok()
                    .filter(|&id| id < m.vocab_size),
            };
            match id {
                Some(id) => tokens.push(id),
                None => {
                    return Err(Error::UnknownInputToken {
                        token: word.to_string(),
                        line: lineno,
                        column,
                    })
                }
            }
            consumed += end;
            rest = &trimmed[end..];
        }
        Ok(tokens)
    }

    pub fn render(&self, tokens: &[TokenId]) -> String {
        let words: Vec<String> = tokens
            .iter()
            .map(|&t| match self {
                ModelKind::Tabular(m) => m
                    .tgt_vocab()
                    .symbol(t)
                    .expect("decoded token is in vocabulary")
                    .to_string(),
                ModelKind::Hash(_) => {
                    if t == EOS_ID {
                        EOS_SYMBOL.to_string()
                    } else {
                        t.to_string()
                    }
                }
            })
            .collect();
        words.join(" ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    WaitK,
    Schedule,
    Threshold,
}

impl PolicyKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "wait-k" => Ok(Self::WaitK),
            "schedule" => Ok(Self::Schedule),
            "threshold" => Ok(Self::Threshold),
            other => Err(Error::Usage(format!(
                "unknown policy {other:?} (expected wait-k, schedule, or threshold)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::WaitK => "wait-k",
            Self::Schedule => "schedule",
            Self::Threshold => "threshold",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Greedy,
    Beam,
    Sbs,
    ChunkBeam,
    ChunkSbs,
    FullSbs,
}

impl ModeKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "greedy" => Ok(Self::Greedy),
            "beam" => Ok(Self::Beam),
            "sbs" => Ok(Self::Sbs),
            "chunk-beam" => Ok(Self::ChunkBeam),
            "chunk-sbs" => Ok(Self::ChunkSbs),
            "full-sbs" => Ok(Self::FullSbs),
            other => Err(Error::Usage(format!(
                "unknown mode {other:?} (expected greedy, beam, sbs, chunk-beam, chunk-sbs, or full-sbs)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Greedy => "greedy",
            Self::Beam => "beam",
            Self::Sbs => "sbs",
            Self::ChunkBeam => "chunk-beam",
            Self::ChunkSbs => "chunk-sbs",
            Self::FullSbs => "full-sbs",
        }
    }
}

/// Everything needed to decode one corpus once.
#[derive(Debug, Clone)]
pub struct DecodeOptions {
    pub policy: PolicyKind,
    pub k: usize,
    pub rho: f64,
    pub schedule: Option<Vec<Action>>,
    pub mode: ModeKind,
    pub b: usize,
    pub w: usize,
    pub allow_early_eos: bool,
    pub max_len_ratio: f64,
    pub max_len_offset: i64,
    pub length_reward: f64,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self {
            policy: PolicyKind::WaitK,
            k: 3,
            rho: -2.0,
            schedule: None,
            mode: ModeKind::Sbs,
            b: 5,
            w: 2,
            allow_early_eos: false,
            max_len_ratio: 2.0,
            max_len_offset: 5,
            length_reward: 0.0,
        }
    }
}

impl DecodeOptions {
    fn config(&self, source_len: usize) -> SbsConfig {
        let cap = (self.max_len_ratio * source_len as f64).floor() as i64 + self.max_len_offset;
        let commit_mode = match self.mode {
            ModeKind::Greedy | ModeKind::Beam => CommitMode::Greedy,
            ModeKind::Sbs | ModeKind::FullSbs => CommitMode::Sbs,
            ModeKind::ChunkBeam => CommitMode::ChunkBeam,
            ModeKind::ChunkSbs => CommitMode::ChunkSbs,
        };
        SbsConfig {
            b: if self.mode == ModeKind::Greedy { 1 } else { self.b },
            w: self.w,
            allow_early_eos: self.allow_early_eos,
            max_len: cap.max(1) as usize,
            commit_mode,
            length_reward: self.length_reward,
        }
    }

    fn fresh_policy(&self) -> Result<Box<dyn Policy>> {
        Ok(match self.policy {
            PolicyKind::WaitK => Box::new(WaitK::new(self.k)?),
            PolicyKind::Threshold => Box::new(ThresholdAdaptive::new(self.rho)?),
            PolicyKind::Schedule => {
                let actions = self.schedule.clone().ok_or_else(|| {
                    Error::Usage("--policy schedule requires --schedule <file>".into())
                })?;
                Box::new(SchedulePolicy::new(actions))
            }
        })
    }
}

/// Decodes one source sentence, returning its event trace.
pub fn decode_sentence(
    model: &ModelKind,
    source: &[TokenId],
    opts: &DecodeOptions,
) -> Result<DecodeTrace> {
    let cfg = opts.config(source.len());
    match opts.mode {
        ModeKind::FullSbs => full_sentence_sbs_trace(model.scorer(), source, &cfg),
        _ => {
            let mut policy = opts.fresh_policy()?;
            simul_decode(model.scorer(), source, policy.as_mut(), &cfg)
        }
    }
}

pub struct CorpusResult {
    /// One rendered output line per non-empty input line.
    pub lines: Vec<String>,
    /// Concatenated JSONL traces, one session per sentence.
    pub traces: String,
    /// Committed token ids per sentence (including the final eos).
    pub outputs: Vec<Vec<TokenId>>,
    /// Tokenized sources, kept for metric computation.
    pub sources: Vec<Vec<TokenId>>,
}

/// Tokenizes and decodes every non-empty line of `input`.
pub fn run_decode(model: &ModelKind, input: &str, opts: &DecodeOptions) -> Result<CorpusResult> {
    let mut result = CorpusResult {
        lines: Vec::new(),
        traces: String::new(),
        outputs: Vec::new(),
        sources: Vec::new(),
    };
    for (idx, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let source = model.tokenize(line, idx + 1)?;
        let trace = decode_sentence(model, &source, opts)?;
        let committed = trace.committed();
        result.lines.push(model.render(&committed));
        result.traces.push_str(&trace.to_jsonl());
        result.outputs.push(committed);
        result.sources.push(source);
    }
    Ok(result)
}

fn trace_actions(trace: &DecodeTrace) -> Vec<Action> {
    trace
        .events()
        .iter()
        .filter_map(|e| match e {
            Event::Read { .. } => Some(Action::Read),
            Event::Commit { .. } => Some(Action::Write),
            _ => None,
        })
        .collect()
}

/// One metrics row of a sweep CSV.
#[derive(Debug, Clone)]
pub struct CsvRow {
    pub policy: String,
    pub k: Option<usize>,
    pub b: usize,
    pub w: usize,
    pub mode: String,
    pub al: Option<f64>,
    pub cw: Option<f64>,
    pub bleu: Option<f64>,
    pub mean_logprob: Option<f64>,
    pub tokens_per_sec: Option<f64>,
}

pub const CSV_HEADER: &str = "policy,k,b,w,mode,AL,CW,BLEU,mean_logprob,tokens_per_sec";

fn fmt_opt(value: Option<f64>) -> String {
    value.map(|v| format!("{v:.6}")).unwrap_or_default()
}

impl CsvRow {
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.policy,
            self.k.map(|k| k.to_string()).unwrap_or_default(),
            self.b,
            self.w,
            self.mode,
            fmt_opt(self.al),
            fmt_opt(self.cw),
            fmt_opt(self.bleu),
            fmt_opt(self.mean_logprob),
            fmt_opt(self.tokens_per_sec),
        )
    }
}

/// Sweep request: the cross-product of modes, k, b, and w, each decoded over
/// the whole corpus (and over `num_instances` seed-shifted copies of a hash
/// model).
pub struct SweepPlan {
    pub base: DecodeOptions,
    pub modes: Vec<ModeKind>,
    pub k_list: Vec<usize>,
    pub b_list: Vec<usize>,
    pub w_list: Vec<usize>,
    pub num_instances: u64,
    /// One reference translation per input line, pre-tokenized.
    pub references: Option<Vec<Vec<String>>>,
}

pub struct SweepOutput {
    pub csv: String,
    pub traces: String,
}

/// Runs the sweep, producing the CSV (with header) and concatenated traces.
/// Output is a pure function of the inputs: rows follow loop order and
/// every decode is deterministic, so repeated invocations are
/// byte-identical. The `tokens_per_sec` column is left empty here (wall
/// clock would break reproducibility); `run_bench` fills it instead.
pub fn run_sweep(model: &ModelKind, input: &str, plan: &SweepPlan) -> Result<SweepOutput> {
    if plan.num_instances == 0 {
        return Err(Error::Usage("--num-instances must be >= 1".into()));
    }
    if plan.num_instances > 1 && matches!(model, ModelKind::Tabular(_)) {
        return Err(Error::Usage(
            "--num-instances applies only to hash models".into(),
        ));
    }

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    let mut traces = String::new();

    for &mode in &plan.modes {
        for &k in &plan.k_list {
            for &b in &plan.b_list {
                for &w in &plan.w_list {
                    let mut opts = plan.base.clone();
                    opts.mode = mode;
                    opts.k = k;
                    opts.b = b;
                    opts.w = w;

                    let mut al_sum = 0.0;
                    let mut cw_sum = 0.0;
                    let mut cw_count = 0usize;
                    let mut logprob_sum = 0.0;
                    let mut decodes = 0usize;
                    let mut candidates: Vec<Vec<String>> = Vec::new();
                    let mut refs: Vec<Vec<Vec<String>>> = Vec::new();

                    for inst in 0..plan.num_instances {
                        let inst_model = model.instance(inst);
                        for (idx, line) in input.lines().enumerate() {
                            if line.trim().is_empty() {
                                continue;
                            }
                            let source = inst_model.tokenize(line, idx + 1)?;
                            let trace = decode_sentence(&inst_model, &source, &opts)?;
                            traces.push_str(&trace.to_jsonl());

                            let committed = trace.committed();
                            let inp = LatencyInputs::new(trace.g_values(), source.len())?;
                            al_sum += average_lagging(&inp);
                            if let Ok(cw) = consecutive_wait(&trace_actions(&trace)) {
                                cw_sum += cw;
                                cw_count += 1;
                            }
                            logprob_sum +=
                                sequence_logprob(inst_model.scorer(), &source, &committed)?;
                            decodes += 1;

                            if let Some(all_refs) = &plan.references {
                                let content = &committed[..committed.len() - 1];
                                let rendered: Vec<String> = content
                                    .iter()
                                    .map(|&t| inst_model.render(&[t]))
                                    .collect();
                                candidates.push(rendered);
                                let reference = all_refs.get(idx).ok_or_else(|| {
                                    Error::Usage(format!(
                                        "missing reference for input line {}",
                                        idx + 1
                                    ))
                                })?;
                                refs.push(vec![reference.clone()]);
                            }
                        }
                    }

                    if decodes == 0 {
                        return Err(Error::Usage("input contains no sentences".into()));
                    }
                    let bleu = if candidates.is_empty() {
                        None
                    } else {
                        Some(corpus_bleu(&candidates, &refs, 4)?)
                    };
                    let row = CsvRow {
                        policy: if mode == ModeKind::FullSbs {
                            "full-sentence".into()
                        } else {
                            opts.policy.name().into()
                        },
                        k: (opts.policy == PolicyKind::WaitK && mode != ModeKind::FullSbs)
                            .then_some(k),
                        b,
                        w,
                        mode: mode.name().into(),
                        al: Some(al_sum / decodes as f64),
                        cw: (cw_count > 0).then(|| cw_sum / cw_count as f64),
                        bleu,
                        mean_logprob: Some(logprob_sum / decodes as f64),
                        tokens_per_sec: None,
                    };
                    csv.push_str(&row.to_line());
                    csv.push('\n');
                }
            }
        }
    }

    Ok(SweepOutput { csv, traces })
}

/// Wall-clock profile of `sbs_step` over a synthetic wait-1 stream.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub steps: usize,
    pub p50_ms: f64,
    pub p90_ms: f64,
    pub p99_ms: f64,
    pub mean_ms: f64,
    pub tokens_per_sec: f64,
}

impl BenchReport {
    pub fn format_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "steps,{}", self.steps);
        let _ = writeln!(out, "p50_ms,{:.6}", self.p50_ms);
        let _ = writeln!(out, "p90_ms,{:.6}", self.p90_ms);
        let _ = writeln!(out, "p99_ms,{:.6}", self.p99_ms);
        let _ = writeln!(out, "mean_ms,{:.6}", self.mean_ms);
        let _ = writeln!(out, "tokens_per_sec,{:.3}", self.tokens_per_sec);
        out
    }

    pub fn csv(&self, b: usize, w: usize) -> String {
        let row = CsvRow {
            policy: "wait-k".into(),
            k: Some(1),
            b,
            w,
            mode: "sbs".into(),
            al: None,
            cw: None,
            bleu: None,
            mean_logprob: None,
            tokens_per_sec: Some(self.tokens_per_sec),
        };
        format!("{CSV_HEADER}\n{}\n", row.to_line())
    }
}

fn percentile_ms(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Times `steps` speculative steps over a seeded hash model, feeding one new
/// source token before each step (a wait-1 stream), with eos masked so the
/// decode never terminates early.
pub fn run_bench(seed: u64, vocab: usize, b: usize, w: usize, steps: usize) -> Result<BenchReport> {
    if vocab < 2 {
        return Err(Error::Usage("bench requires --vocab >= 2".into()));
    }
    if steps == 0 {
        return Err(Error::Usage("bench requires --steps >= 1".into()));
    }
    let model = HashModel::new(seed, vocab);
    let cfg = SbsConfig {
        b,
        w,
        allow_early_eos: false,
        max_len: steps + 1,
        commit_mode: CommitMode::Sbs,
        length_reward: 0.0,
    };
    cfg.validate()?;

    let source: Vec<TokenId> = (0..steps).map(|i| 1 + (i % (vocab - 1))).collect();
    let mut committed: Vec<TokenId> = Vec::new();
    let mut times_ms = Vec::with_capacity(steps);
    let started = Instant::now();
    for i in 0..steps {
        let prefix = &source[..i + 1];
        let t0 = Instant::now();
        let out = sbs_step(&model, prefix, &committed, &cfg)?;
        times_ms.push(t0.elapsed().as_secs_f64() * 1e3);
        committed.push(out.token);
    }
    let total = started.elapsed().as_secs_f64();

    let mut sorted = times_ms.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(BenchReport {
        steps,
        p50_ms: percentile_ms(&sorted, 0.50),
        p90_ms: percentile_ms(&sorted, 0.90),
        p99_ms: percentile_ms(&sorted, 0.99),
        mean_ms: times_ms.iter().sum::<f64>() / steps as f64,
        tokens_per_sec: steps as f64 / total,
    })
}

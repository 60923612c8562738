//! Speculative beam search and the simultaneous-decoding orchestrator.
//!
//! The central idea: when a policy instructs the decoder to commit, the
//! engine runs a beam `1 + w` steps past the committed prefix (or `n + w`
//! for an n-token chunk), ranks candidates by accumulated raw score at the
//! speculation horizon, commits only the leading token(s) of the best path,
//! and throws the speculation away. Each commit therefore benefits from
//! lookahead without ever revising emitted output. Speculation is
//! recomputed from scratch on every step, so commits are independent of
//! speculation history.

use crate::error::{Error, Result};
use crate::policy::{Action, Policy, PolicyState};
use crate::scorer::{argmax_token, validate_token_ids, Scorer};
use crate::search::{beam_search_from, next_multi_metered, StepMetrics};
use crate::trace::{DecodeTrace, Event};
use crate::types::{Beam, Hypothesis, TokenId, EOS_ID};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommitMode {
    /// One argmax token per WRITE.
    Greedy,
    /// One token per WRITE, chosen by speculative beam search.
    Sbs,
    /// WRITE runs batched into chunks, conventional beam search per chunk.
    ChunkBeam,
    /// WRITE runs batched into chunks, speculative window past the chunk.
    ChunkSbs,
}

#[derive(Debug, Clone, Copy)]
pub struct SbsConfig {
    pub b: usize,
    pub w: usize,
    /// Allow committing eos while the source is still incomplete. Off by
    /// default: a simultaneous decoder should not stop before the speaker
    /// finishes.
    pub allow_early_eos: bool,
    /// Cap on committed content tokens (excluding eos).
    pub max_len: usize,
    pub commit_mode: CommitMode,
    /// Per-content-token bonus applied when picking the final hypothesis in
    /// tail/full-sentence beam search; never used during in-beam selection.
    pub length_reward: f64,
}

impl Default for SbsConfig {
    fn default() -> Self {
        Self {
            b: 5,
            w: 2,
            allow_early_eos: false,
            max_len: 64,
            commit_mode: CommitMode::Sbs,
            length_reward: 0.0,
        }
    }
}

impl SbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.b == 0 {
            return Err(Error::Contract("config requires b >= 1".into()));
        }
        if self.max_len == 0 {
            return Err(Error::Contract("config requires max_len >= 1".into()));
        }
        Ok(())
    }
}

/// Result of one speculative step: the committed token, the discarded
/// speculative continuation (kept only for trace logging), and the
/// accumulated score of the winning path at the speculation horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub token: TokenId,
    pub speculation: Vec<TokenId>,
    pub score: f64,
}

/// Result of a chunk commit: up to n tokens (shorter if the path finished
/// at eos inside the chunk), plus discarded speculation and horizon score.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkOutcome {
    pub tokens: Vec<TokenId>,
    pub speculation: Vec<TokenId>,
    pub score: f64,
}

fn check_committed_open(committed: &[TokenId]) -> Result<()> {
    if committed.last() == Some(&EOS_ID) {
        return Err(Error::Contract(
            "cannot extend an already-finished committed prefix".into(),
        ));
    }
    Ok(())
}

/// Single-step SBS with the incomplete-source masking rule: eos is excluded
/// from speculation unless `allow_early_eos` is set. Callers holding the
/// complete source should use `full_sentence_sbs` (eos always allowed).
pub fn sbs_step(
    model: &dyn Scorer,
    source_prefix: &[TokenId],
    committed: &[TokenId],
    cfg: &SbsConfig,
) -> Result<StepOutcome> {
    sbs_step_metered(
        model,
        source_prefix,
        committed,
        cfg,
        &mut StepMetrics::default(),
    )
}

pub fn sbs_step_metered(
    model: &dyn Scorer,
    source_prefix: &[TokenId],
    committed: &[TokenId],
    cfg: &SbsConfig,
    metrics: &mut StepMetrics,
) -> Result<StepOutcome> {
    sbs_step_inner(
        model,
        source_prefix,
        committed,
        cfg,
        cfg.allow_early_eos,
        metrics,
    )
}

fn sbs_step_inner(
    model: &dyn Scorer,
    source_prefix: &[TokenId],
    committed: &[TokenId],
    cfg: &SbsConfig,
    allow_eos: bool,
    metrics: &mut StepMetrics,
) -> Result<StepOutcome> {
    cfg.validate()?;
    if source_prefix.is_empty() {
        return Err(Error::Contract(
            "sbs_step requires a non-empty source prefix".into(),
        ));
    }
    check_committed_open(committed)?;

    let seed = Beam::singleton(Hypothesis::seed(committed.to_vec()));
    let beam = match next_multi_metered(
        model,
        source_prefix,
        &seed,
        cfg.b,
        1 + cfg.w,
        allow_eos,
        metrics,
    ) {
        Ok(beam) => beam,
        // All candidate paths masked away: fall back to a single unmasked-
        // window step so the engine stays total on degenerate vocabularies.
        Err(Error::Contract(_)) => {
            let dist = model.score_next(source_prefix, committed)?;
            metrics.score_calls += 1;
            let (token, logp) = argmax_token(&dist, !allow_eos);
            return Ok(StepOutcome {
                token,
                speculation: Vec::new(),
                score: logp,
            });
        }
        Err(err) => return Err(err),
    };

    let top = beam.top().expect("transition output is non-empty");
    let token = top.tokens[committed.len()];
    let speculation = top.tokens[committed.len() + 1..].to_vec();
    Ok(StepOutcome {
        token,
        speculation,
        score: top.log_score,
    })
}

/// Chunk SBS: run the beam `n + w` steps, commit the first n tokens of the
/// best path (stopping at eos if the path finishes inside the chunk),
/// discard the trailing w speculation steps.
pub fn chunk_sbs(
    model: &dyn Scorer,
    source_prefix: &[TokenId],
    committed: &[TokenId],
    n: usize,
    cfg: &SbsConfig,
) -> Result<ChunkOutcome> {
    chunk_sbs_metered(
        model,
        source_prefix,
        committed,
        n,
        cfg,
        &mut StepMetrics::default(),
    )
}

pub fn chunk_sbs_metered(
    model: &dyn Scorer,
    source_prefix: &[TokenId],
    committed: &[TokenId],
    n: usize,
    cfg: &SbsConfig,
    metrics: &mut StepMetrics,
) -> Result<ChunkOutcome> {
    chunk_sbs_inner(model, source_prefix, committed, n, cfg, cfg.w, metrics)
}

fn chunk_sbs_inner(
    model: &dyn Scorer,
    source_prefix: &[TokenId],
    committed: &[TokenId],
    n: usize,
    cfg: &SbsConfig,
    w: usize,
    metrics: &mut StepMetrics,
) -> Result<ChunkOutcome> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::Contract("chunk length must be >= 1".into()));
    }
    if source_prefix.is_empty() {
        return Err(Error::Contract(
            "chunk commits require a non-empty source prefix".into(),
        ));
    }
    check_committed_open(committed)?;

    let seed = Beam::singleton(Hypothesis::seed(committed.to_vec()));
    let beam = match next_multi_metered(
        model,
        source_prefix,
        &seed,
        cfg.b,
        n + w,
        cfg.allow_early_eos,
        metrics,
    ) {
        Ok(beam) => beam,
        Err(Error::Contract(_)) => {
            let dist = model.score_next(source_prefix, committed)?;
            metrics.score_calls += 1;
            let (token, logp) = argmax_token(&dist, !cfg.allow_early_eos);
            return Ok(ChunkOutcome {
                tokens: vec![token],
                speculation: Vec::new(),
                score: logp,
            });
        }
        Err(err) => return Err(err),
    };

    let top = beam.top().expect("transition output is non-empty");
    let extension = &top.tokens[committed.len()..];
    let commit_len = extension
        .iter()
        .take(n)
        .position(|&t| t == EOS_ID)
        .map(|pos| pos + 1)
        .unwrap_or_else(|| n.min(extension.len()));
    Ok(ChunkOutcome {
        tokens: extension[..commit_len].to_vec(),
        speculation: extension[commit_len..].to_vec(),
        score: top.log_score,
    })
}

/// Conventional per-chunk beam search: a beam of exactly n steps with no
/// speculative window, committing the best path's first n tokens.
pub fn chunk_beam_search(
    model: &dyn Scorer,
    source_prefix: &[TokenId],
    committed: &[TokenId],
    n: usize,
    cfg: &SbsConfig,
) -> Result<ChunkOutcome> {
    chunk_beam_search_metered(
        model,
        source_prefix,
        committed,
        n,
        cfg,
        &mut StepMetrics::default(),
    )
}

pub fn chunk_beam_search_metered(
    model: &dyn Scorer,
    source_prefix: &[TokenId],
    committed: &[TokenId],
    n: usize,
    cfg: &SbsConfig,
    metrics: &mut StepMetrics,
) -> Result<ChunkOutcome> {
    chunk_sbs_inner(model, source_prefix, committed, n, cfg, 0, metrics)
}

/// Tail beam search: conventional beam search seeded from the committed
/// prefix once the source is fully revealed. Returns the newly generated
/// suffix (always ending in eos) and its incremental log score.
pub fn tail_beam_search(
    model: &dyn Scorer,
    full_source: &[TokenId],
    committed: &[TokenId],
    cfg: &SbsConfig,
) -> Result<(Vec<TokenId>, f64)> {
    tail_beam_search_metered(
        model,
        full_source,
        committed,
        cfg,
        &mut StepMetrics::default(),
    )
}

pub fn tail_beam_search_metered(
    model: &dyn Scorer,
    full_source: &[TokenId],
    committed: &[TokenId],
    cfg: &SbsConfig,
    metrics: &mut StepMetrics,
) -> Result<(Vec<TokenId>, f64)> {
    cfg.validate()?;
    check_committed_open(committed)?;

    let budget = cfg.max_len.saturating_sub(committed.len());
    if budget == 0 {
        let dist = model.score_next(full_source, committed)?;
        metrics.score_calls += 1;
        return Ok((vec![EOS_ID], dist[EOS_ID]));
    }
    let seed = Beam::singleton(Hypothesis::seed(committed.to_vec()));
    let best = beam_search_from(
        model,
        full_source,
        seed,
        cfg.b,
        budget,
        cfg.length_reward,
        metrics,
    )?;
    let suffix = best.tokens[committed.len()..].to_vec();
    Ok((suffix, best.log_score))
}

fn score_probe(
    model: &dyn Scorer,
    source_prefix: &[TokenId],
    committed: &[TokenId],
    allow_eos: bool,
) -> Result<f64> {
    let dist = model.score_next(source_prefix, committed)?;
    Ok(argmax_token(&dist, !allow_eos).1)
}

struct Session<'a> {
    model: &'a dyn Scorer,
    source: &'a [TokenId],
    cfg: &'a SbsConfig,
    committed: Vec<TokenId>,
    s_read: usize,
    trace: DecodeTrace,
}

impl<'a> Session<'a> {
    /// Appends Commit events, scoring each token under the currently
    /// revealed source so the event's logp reflects the commit-time
    /// conditional.
    fn commit(&mut self, tokens: &[TokenId], g: usize) -> Result<()> {
        let src = &self.source[..self.s_read.min(self.source.len())];
        for &token in tokens {
            let dist = self.model.score_next(src, &self.committed)?;
            self.trace.push(Event::Commit {
                token,
                g,
                logp: dist[token],
            });
            self.committed.push(token);
        }
        Ok(())
    }

    fn finished(&self) -> bool {
        self.committed.last() == Some(&EOS_ID)
    }

    /// Write-only endgame: reveal the entire source and beam-search the
    /// remaining suffix. Commits record g = m since every one of them
    /// conditions on the full source.
    fn run_tail(&mut self) -> Result<()> {
        self.trace.push(Event::TailStart);
        self.s_read = self.source.len();
        let (suffix, _) =
            tail_beam_search(self.model, self.source, &self.committed, self.cfg)?;
        self.commit(&suffix, self.source.len())
    }
}

/// Simultaneous decoding orchestrator: alternates policy-driven READ and
/// WRITE actions over an incrementally revealed source, committing via
/// `cfg.commit_mode`, and finishes with tail beam search when the source
/// ends (or the policy runs out of actions, or `max_len` is hit). Returns
/// the full event trace; decoding ends when eos is committed.
pub fn simul_decode(
    model: &dyn Scorer,
    source: &[TokenId],
    policy: &mut dyn Policy,
    cfg: &SbsConfig,
) -> Result<DecodeTrace> {
    cfg.validate()?;
    if source.is_empty() {
        return Err(Error::Contract(
            "simul_decode requires at least one source token".into(),
        ));
    }
    validate_token_ids(source, model.src_vocab_size())?;

    let mut session = Session {
        model,
        source,
        cfg,
        committed: Vec::new(),
        s_read: 0,
        trace: DecodeTrace::new(),
    };

    while !session.finished() {
        if session.committed.len() >= cfg.max_len {
            session.run_tail()?;
            break;
        }

        let probe = if policy.needs_score_probe() && session.s_read > 0 {
            Some(score_probe(
                model,
                &source[..session.s_read],
                &session.committed,
                cfg.allow_early_eos,
            )?)
        } else {
            None
        };
        let state = PolicyState {
            s_read: session.s_read,
            t_written: session.committed.len(),
            source_exhausted: false,
            next_argmax_logp: probe,
        };

        match policy.next_action(&state) {
            None => {
                session.run_tail()?;
                break;
            }
            Some(Action::Read) => {
                if session.s_read < source.len() {
                    session.trace.push(Event::Read {
                        token: source[session.s_read],
                        source_index: session.s_read,
                    });
                    session.s_read += 1;
                } else {
                    session.run_tail()?;
                    break;
                }
            }
            Some(Action::Write) => {
                if session.s_read == 0 {
                    return Err(Error::PolicyContract(
                        "policy issued WRITE before any source token was read".into(),
                    ));
                }
                let g = session.s_read;
                let src = &source[..session.s_read];
                match cfg.commit_mode {
                    CommitMode::Greedy => {
                        let dist = model.score_next(src, &session.committed)?;
                        let (token, _) = argmax_token(&dist, !cfg.allow_early_eos);
                        session.commit(&[token], g)?;
                    }
                    CommitMode::Sbs => {
                        let out = sbs_step(model, src, &session.committed, cfg)?;
                        session.trace.push(Event::Speculate {
                            window: out.speculation.clone(),
                        });
                        session.commit(&[out.token], g)?;
                    }
                    CommitMode::ChunkBeam => {
                        let n = 1 + policy.take_pending_writes();
                        let out =
                            chunk_beam_search(model, src, &session.committed, n, cfg)?;
                        session.commit(&out.tokens, g)?;
                    }
                    CommitMode::ChunkSbs => {
                        let n = 1 + policy.take_pending_writes();
                        let out = chunk_sbs(model, src, &session.committed, n, cfg)?;
                        session.trace.push(Event::Speculate {
                            window: out.speculation.clone(),
                        });
                        session.commit(&out.tokens, g)?;
                    }
                }
            }
        }
    }

    Ok(session.trace)
}

/// Full-sentence decoding with a sliding speculative window: the complete
/// source is available from the start and every commit still looks `w`
/// steps ahead with beam width b. Equivalent to simultaneous decoding under
/// an all-READs-first schedule with sbs commits.
pub fn full_sentence_sbs_trace(
    model: &dyn Scorer,
    source: &[TokenId],
    cfg: &SbsConfig,
) -> Result<DecodeTrace> {
    cfg.validate()?;
    if source.is_empty() {
        return Err(Error::Contract(
            "full_sentence_sbs requires at least one source token".into(),
        ));
    }
    validate_token_ids(source, model.src_vocab_size())?;

    let mut trace = DecodeTrace::new();
    for (idx, &token) in source.iter().enumerate() {
        trace.push(Event::Read {
            token,
            source_index: idx,
        });
    }

    let m = source.len();
    let mut committed: Vec<TokenId> = Vec::new();
    loop {
        let dist = model.score_next(source, &committed)?;
        if committed.len() >= cfg.max_len {
            trace.push(Event::Commit {
                token: EOS_ID,
                g: m,
                logp: dist[EOS_ID],
            });
            break;
        }
        let out = sbs_step_inner(
            model,
            source,
            &committed,
            cfg,
            true,
            &mut StepMetrics::default(),
        )?;
        trace.push(Event::Speculate {
            window: out.speculation.clone(),
        });
        trace.push(Event::Commit {
            token: out.token,
            g: m,
            logp: dist[out.token],
        });
        if out.token == EOS_ID {
            break;
        }
        committed.push(out.token);
    }
    Ok(trace)
}

/// Token-and-score view of `full_sentence_sbs_trace`.
pub fn full_sentence_sbs(
    model: &dyn Scorer,
    source: &[TokenId],
    cfg: &SbsConfig,
) -> Result<(Vec<TokenId>, f64)> {
    let trace = full_sentence_sbs_trace(model, source, cfg)?;
    Ok((trace.committed(), trace.commit_logprob_sum()))
}

//! Brute-force reference implementations.
//!
//! These enumerate every candidate outright and exist to validate the search
//! engine in tests; they are shipped in the library so users can run the
//! same checks. Hard instance-size guards abort instead of silently running
//! for hours.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scorer::Scorer;
use crate::types::{compare_hypotheses, Hypothesis, TokenId, EOS_ID};

const ENUM_LIMIT: f64 = 1e6;

fn guard(vocab_size: usize, depth: usize, what: &str) -> Result<()> {
    let content = vocab_size.saturating_sub(1) as f64;
    if content.powi(depth as i32) > ENUM_LIMIT {
        return Err(Error::InstanceTooLarge(format!(
            "{what}: {}^{depth} candidate paths exceed 1e6",
            vocab_size - 1
        )));
    }
    Ok(())
}

fn better(cand: &Hypothesis, best: &mut Option<Hypothesis>) {
    if best
        .as_ref()
        .map_or(true, |cur| compare_hypotheses(cand, cur) == Ordering::Less)
    {
        *best = Some(cand.clone());
    }
}

/// Exhaustively scores every sequence of non-eos tokens of content length
/// `< max_len` terminated by eos (including bare eos) and returns the argmax
/// under `compare_hypotheses` tie-breaking.
pub fn enumerate_best(
    model: &dyn Scorer,
    source: &[TokenId],
    max_len: usize,
) -> Result<Hypothesis> {
    if max_len == 0 {
        return Err(Error::Contract("enumerate_best requires max_len >= 1".into()));
    }
    guard(model.tgt_vocab_size(), max_len, "enumerate_best")?;
    let mut best = None;
    let mut prefix = Vec::new();
    dfs_best(model, source, max_len, &mut prefix, 0.0, &mut best)?;
    Ok(best.expect("the bare-eos candidate always exists"))
}

fn dfs_best(
    model: &dyn Scorer,
    source: &[TokenId],
    max_len: usize,
    prefix: &mut Vec<TokenId>,
    acc: f64,
    best: &mut Option<Hypothesis>,
) -> Result<()> {
    let dist = model.score_next(source, prefix)?;
    let mut tokens = Vec::with_capacity(prefix.len() + 1);
    tokens.extend_from_slice(prefix);
    tokens.push(EOS_ID);
    better(
        &Hypothesis {
            tokens,
            log_score: acc + dist[EOS_ID],
        },
        best,
    );
    if prefix.len() + 1 < max_len {
        for v in 1..model.tgt_vocab_size() {
            prefix.push(v);
            dfs_best(model, source, max_len, prefix, acc + dist[v], best)?;
            prefix.pop();
        }
    }
    Ok(())
}

/// Argmax over all `depth`-step continuations of `committed` (paths freeze
/// early at eos when it is not masked), returning the first token of the
/// best path with ties broken per `compare_hypotheses` on the full path.
pub fn enumerate_lookahead(
    model: &dyn Scorer,
    source_prefix: &[TokenId],
    committed: &[TokenId],
    depth: usize,
    mask_eos: bool,
) -> Result<TokenId> {
    if depth == 0 {
        return Err(Error::Contract(
            "enumerate_lookahead requires depth >= 1".into(),
        ));
    }
    guard(model.tgt_vocab_size(), depth, "enumerate_lookahead")?;
    let mut best = None;
    let mut path = committed.to_vec();
    dfs_lookahead(model, source_prefix, &mut path, 0.0, depth, mask_eos, &mut best)?;
    let best = best.ok_or_else(|| Error::Contract("no continuation exists".into()))?;
    Ok(best.tokens[committed.len()])
}

fn dfs_lookahead(
    model: &dyn Scorer,
    source_prefix: &[TokenId],
    path: &mut Vec<TokenId>,
    acc: f64,
    remaining: usize,
    mask_eos: bool,
    best: &mut Option<Hypothesis>,
) -> Result<()> {
    if remaining == 0 || path.last() == Some(&EOS_ID) {
        better(
            &Hypothesis {
                tokens: path.clone(),
                log_score: acc,
            },
            best,
        );
        return Ok(());
    }
    let dist = model.score_next(source_prefix, path)?;
    for (v, &logp) in dist.iter().enumerate() {
        if mask_eos && v == EOS_ID {
            continue;
        }
        path.push(v);
        dfs_lookahead(model, source_prefix, path, acc + logp, remaining - 1, mask_eos, best)?;
        path.pop();
    }
    Ok(())
}

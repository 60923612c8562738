//! Latency metrics (AL, CW), sequence-level model score, and corpus BLEU.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::policy::{chunk_lengths, Action};
use crate::scorer::Scorer;
use crate::types::{TokenId, EOS_ID};

/// Inputs for average lagging: `g[t]` is the number of source tokens that
/// had been read when target word `t+1` was committed (from Commit events).
#[derive(Debug, Clone)]
pub struct LatencyInputs {
    g: Vec<usize>,
    m: usize,
    n: usize,
}

impl LatencyInputs {
    pub fn new(g: Vec<usize>, m: usize) -> Result<Self> {
        if g.is_empty() {
            return Err(Error::MetricUndefined(
                "average lagging needs at least one commit".into(),
            ));
        }
        if m == 0 {
            return Err(Error::MetricUndefined(
                "average lagging needs a non-empty source".into(),
            ));
        }
        for window in g.windows(2) {
            if window[1] < window[0] {
                return Err(Error::Contract(format!(
                    "g must be non-decreasing, got {} after {}",
                    window[1], window[0]
                )));
            }
        }
        if let Some(&first) = g.first() {
            if first < 1 {
                return Err(Error::Contract("g values must be >= 1".into()));
            }
        }
        if let Some(&last) = g.last() {
            if last > m {
                return Err(Error::Contract(format!(
                    "g values must not exceed source length {m}, got {last}"
                )));
            }
        }
        let n = g.len();
        Ok(Self { g, m, n })
    }

    pub fn g(&self) -> &[usize] {
        &self.g
    }

    /// Overrides the target length used for the rate `r = n/m`, e.g. to
    /// compute AL against the reference length instead of the generated
    /// length. The cutoff τ still ranges over the actual commits.
    pub fn with_rate_length(mut self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::MetricUndefined(
                "average lagging needs a positive rate length".into(),
            ));
        }
        self.n = n;
        Ok(self)
    }
}

/// Average lagging: with rate `r = n/m` and cutoff `τ` at the first commit
/// that has seen the whole source (`τ = n` if none has),
/// `AL = (1/τ) · Σ_{t=1..τ} (g(t) − (t−1)/r)`.
pub fn average_lagging(inp: &LatencyInputs) -> f64 {
    let r = inp.n as f64 / inp.m as f64;
    let tau = inp
        .g
        .iter()
        .position(|&read| read == inp.m)
        .map(|idx| idx + 1)
        .unwrap_or(inp.g.len());
    let sum: f64 = (1..=tau)
        .map(|t| inp.g[t - 1] as f64 - (t as f64 - 1.0) / r)
        .sum();
    sum / tau as f64
}

/// Consecutive wait: total READ count divided by the number of maximal READ
/// runs, i.e. the average length of uninterrupted waiting stretches.
pub fn consecutive_wait(actions: &[Action]) -> Result<f64> {
    let (read_runs, _) = chunk_lengths(actions);
    if read_runs.is_empty() {
        return Err(Error::MetricUndefined(
            "consecutive wait needs at least one READ".into(),
        ));
    }
    let total: usize = read_runs.iter().sum();
    Ok(total as f64 / read_runs.len() as f64)
}

/// Model log-probability of a finished sequence with the full source
/// revealed at every step.
pub fn sequence_logprob(model: &dyn Scorer, source: &[TokenId], y: &[TokenId]) -> Result<f64> {
    if y.last() != Some(&EOS_ID) {
        return Err(Error::Contract(
            "sequence_logprob requires a sequence ending in eos".into(),
        ));
    }
    let mut acc = 0.0;
    for t in 0..y.len() {
        let dist = model.score_next(source, &y[..t])?;
        acc += dist[y[t]];
    }
    Ok(acc)
}

fn ngram_counts<T: Eq + Hash + Clone>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts: HashMap<&[T], usize> = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU: geometric mean of modified n-gram precisions up to `max_n`,
/// times the brevity penalty, with counts pooled over the corpus. Orders
/// for which no candidate n-grams exist at all are skipped (so a perfect
/// short match still scores 1.0); any order with zero matched n-grams
/// scores 0.
pub fn corpus_bleu<T: Eq + Hash + Clone>(
    candidates: &[Vec<T>],
    references: &[Vec<Vec<T>>],
    max_n: usize,
) -> Result<f64> {
    if candidates.is_empty() || candidates.len() != references.len() {
        return Err(Error::Contract(
            "corpus_bleu needs equally many candidates and reference sets, at least one".into(),
        ));
    }
    if max_n == 0 {
        return Err(Error::Contract("corpus_bleu requires max_n >= 1".into()));
    }

    let mut cand_total = 0usize;
    let mut ref_total = 0usize;
    for (cand, refs) in candidates.iter().zip(references) {
        if refs.is_empty() {
            return Err(Error::Contract(
                "every candidate needs at least one reference".into(),
            ));
        }
        cand_total += cand.len();
        // Closest reference length, ties toward the shorter.
        let closest = refs
            .iter()
            .map(Vec::len)
            .min_by_key(|&len| (len.abs_diff(cand.len()), len))
            .unwrap();
        ref_total += closest;
    }
    if cand_total == 0 {
        return Ok(0.0);
    }

    let mut log_precision_sum = 0.0;
    for n in 1..=max_n {
        let mut matched = 0usize;
        let mut total = 0usize;
        for (cand, refs) in candidates.iter().zip(references) {
            let cand_counts = ngram_counts(cand, n);
            if cand_counts.is_empty() {
                continue;
            }
            let mut max_ref: HashMap<&[T], usize> = HashMap::new();
            for r in refs {
                for (gram, count) in ngram_counts(r, n) {
                    let entry = max_ref.entry(gram).or_insert(0);
                    *entry = (*entry).max(count);
                }
            }
            for (gram, count) in cand_counts {
                total += count;
                matched += count.min(max_ref.get(gram).copied().unwrap_or(0));
            }
        }
        if total == 0 {
            continue;
        }
        if matched == 0 {
            return Ok(0.0);
        }
        log_precision_sum += (matched as f64 / total as f64).ln() / max_n as f64;
    }

    let bp = if cand_total >= ref_total {
        1.0
    } else {
        (1.0 - ref_total as f64 / cand_total as f64).exp()
    };
    Ok(bp * log_precision_sum.exp())
}

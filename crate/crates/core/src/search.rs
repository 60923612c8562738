//! Beam-transition operators and full-sentence baselines.
//!
//! `next_step` is the single-step top-b transition; `next_multi` unrolls it.
//! Finished hypotheses pass through transitions frozen, so a beam can carry
//! completed sequences alongside still-growing ones. `greedy_decode` and
//! `beam_search_full` are the conventional whole-sentence decoders built on
//! the same primitives.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scorer::{argmax_token, Scorer};
use crate::types::{compare_hypotheses, Beam, Hypothesis, TokenId, EOS_ID};

/// Instrumentation for search calls: scoring traffic plus the peak number of
/// hypothesis tokens held live in a beam, sampled after every transition.
#[derive(Debug, Default, Clone, Copy)]
pub struct StepMetrics {
    pub score_calls: usize,
    pub peak_live_tokens: usize,
}

impl StepMetrics {
    fn observe(&mut self, beam: &Beam) {
        self.peak_live_tokens = self.peak_live_tokens.max(beam.live_tokens());
    }
}

/// Selection key for one candidate: a parent index plus an optional
/// extension token. Keeping candidates in this form bounds live memory by
/// the materialized beams, not by `b * vocab` token vectors.
struct Candidate {
    parent: usize,
    ext: Option<TokenId>,
    score: f64,
}

fn candidate_cmp(a: &Candidate, b: &Candidate, beam: &Beam) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| {
        let ta = beam.items()[a.parent].tokens.iter().copied().chain(a.ext);
        let tb = beam.items()[b.parent].tokens.iter().copied().chain(b.ext);
        ta.cmp(tb)
    })
}

/// One beam transition: extends every unfinished hypothesis by every allowed
/// token, passes finished hypotheses through unchanged, and keeps the top
/// `b` results under `compare_hypotheses` ordering. With `allow_eos` false
/// the eos token is excluded from extensions.
pub fn next_step(
    model: &dyn Scorer,
    source_prefix: &[TokenId],
    beam: &Beam,
    b: usize,
    allow_eos: bool,
) -> Result<Beam> {
    next_step_metered(
        model,
        source_prefix,
        beam,
        b,
        allow_eos,
        &mut StepMetrics::default(),
    )
}

pub fn next_step_metered(
    model: &dyn Scorer,
    source_prefix: &[TokenId],
    beam: &Beam,
    b: usize,
    allow_eos: bool,
    metrics: &mut StepMetrics,
) -> Result<Beam> {
    if b == 0 {
        return Err(Error::Contract("beam size must be >= 1".into()));
    }
    if beam.is_empty() {
        return Err(Error::Contract("next_step requires a non-empty beam".into()));
    }

    let mut candidates = Vec::new();
    for (idx, hyp) in beam.items().iter().enumerate() {
        if hyp.finished() {
            candidates.push(Candidate {
                parent: idx,
                ext: None,
                score: hyp.log_score,
            });
            continue;
        }
        let dist = model.score_next(source_prefix, &hyp.tokens)?;
        metrics.score_calls += 1;
        for (token, &logp) in dist.iter().enumerate() {
            if !allow_eos && token == EOS_ID {
                continue;
            }
            candidates.push(Candidate {
                parent: idx,
                ext: Some(token),
                score: hyp.log_score + logp,
            });
        }
    }
    if candidates.is_empty() {
        return Err(Error::Contract(
            "no candidate extensions survive eos masking".into(),
        ));
    }

    candidates.sort_by(|x, y| candidate_cmp(x, y, beam));
    candidates.truncate(b);
    let items = candidates
        .into_iter()
        .map(|c| match c.ext {
            Some(token) => {
                let parent = &beam.items()[c.parent];
                let mut tokens = Vec::with_capacity(parent.tokens.len() + 1);
                tokens.extend_from_slice(&parent.tokens);
                tokens.push(token);
                Hypothesis {
                    tokens,
                    log_score: c.score,
                }
            }
            None => beam.items()[c.parent].clone(),
        })
        .collect();

    let out = Beam::from_sorted(items);
    metrics.observe(&out);
    Ok(out)
}

/// `i` beam transitions; `i = 0` returns the input unchanged. Stops early
/// once every item is finished, which leaves the beam a fixed point.
pub fn next_multi(
    model: &dyn Scorer,
    source_prefix: &[TokenId],
    beam: &Beam,
    b: usize,
    i: usize,
    allow_eos: bool,
) -> Result<Beam> {
    next_multi_metered(
        model,
        source_prefix,
        beam,
        b,
        i,
        allow_eos,
        &mut StepMetrics::default(),
    )
}

pub fn next_multi_metered(
    model: &dyn Scorer,
    source_prefix: &[TokenId],
    beam: &Beam,
    b: usize,
    i: usize,
    allow_eos: bool,
    metrics: &mut StepMetrics,
) -> Result<Beam> {
    let mut cur = beam.clone();
    for _ in 0..i {
        if cur.all_finished() {
            break;
        }
        cur = next_step_metered(model, source_prefix, &cur, b, allow_eos, metrics)?;
    }
    Ok(cur)
}

/// Repeatedly appends the argmax token (ties toward the smaller id) until
/// eos or until `max_len` content tokens, at which point eos is
/// force-appended with its model log-prob.
pub fn greedy_decode(
    model: &dyn Scorer,
    source: &[TokenId],
    max_len: usize,
) -> Result<Hypothesis> {
    if max_len == 0 {
        return Err(Error::Contract("greedy_decode requires max_len >= 1".into()));
    }
    let mut hyp = Hypothesis::empty();
    loop {
        let dist = model.score_next(source, &hyp.tokens)?;
        if hyp.tokens.len() >= max_len {
            return Ok(hyp.extended(EOS_ID, dist[EOS_ID]));
        }
        let (token, logp) = argmax_token(&dist, false);
        hyp = hyp.extended(token, logp);
        if token == EOS_ID {
            return Ok(hyp);
        }
    }
}

fn rewarded_cmp(a: &Hypothesis, b: &Hypothesis, length_reward: f64) -> Ordering {
    let content = |h: &Hypothesis| h.tokens.len().saturating_sub(1) as f64;
    let ra = a.log_score + length_reward * content(a);
    let rb = b.log_score + length_reward * content(b);
    rb.total_cmp(&ra).then_with(|| a.tokens.cmp(&b.tokens))
}

/// Beam search continuing from an already-sorted seed beam for at most
/// `steps` transitions. Finished hypotheses stay frozen in the beam; the
/// search halts once the best unfinished score drops to or below the best
/// finished score seen so far (admissible because step scores are never
/// positive). If nothing finishes within the budget, eos is force-appended
/// to the best open hypothesis.
///
/// `length_reward` (per content token) only biases which finished
/// hypothesis is returned; in-beam selection always uses raw scores.
pub fn beam_search_from(
    model: &dyn Scorer,
    source: &[TokenId],
    seed: Beam,
    b: usize,
    steps: usize,
    length_reward: f64,
    metrics: &mut StepMetrics,
) -> Result<Hypothesis> {
    let mut beam = seed;
    let mut best_halt: Option<Hypothesis> = None;
    let mut best_ret: Option<Hypothesis> = None;

    for _ in 0..steps {
        if beam.all_finished() {
            break;
        }
        beam = next_step_metered(model, source, &beam, b, true, metrics)?;
        for hyp in beam.items().iter().filter(|h| h.finished()) {
            if best_halt
                .as_ref()
                .map_or(true, |cur| compare_hypotheses(hyp, cur) == Ordering::Less)
            {
                best_halt = Some(hyp.clone());
            }
            if best_ret
                .as_ref()
                .map_or(true, |cur| rewarded_cmp(hyp, cur, length_reward) == Ordering::Less)
            {
                best_ret = Some(hyp.clone());
            }
        }
        let best_unfinished = beam.items().iter().find(|h| !h.finished());
        match (&best_halt, best_unfinished) {
            (_, None) => break,
            (Some(fin), Some(open)) => {
                if fin.log_score.total_cmp(&open.log_score) != Ordering::Less {
                    break;
                }
            }
            (None, Some(_)) => {}
        }
    }

    if let Some(best) = best_ret {
        return Ok(best);
    }
    let top = beam
        .items()
        .iter()
        .find(|h| !h.finished())
        .expect("no finished hypothesis recorded, so an open one exists")
        .clone();
    let dist = model.score_next(source, &top.tokens)?;
    metrics.score_calls += 1;
    Ok(top.extended(EOS_ID, dist[EOS_ID]))
}

/// Full-sentence beam search from the empty prefix with `T = max_len`.
pub fn beam_search_full(
    model: &dyn Scorer,
    source: &[TokenId],
    b: usize,
    max_len: usize,
) -> Result<Hypothesis> {
    beam_search_full_with(
        model,
        source,
        b,
        max_len,
        0.0,
        &mut StepMetrics::default(),
    )
}

pub fn beam_search_full_with(
    model: &dyn Scorer,
    source: &[TokenId],
    b: usize,
    max_len: usize,
    length_reward: f64,
    metrics: &mut StepMetrics,
) -> Result<Hypothesis> {
    if max_len == 0 {
        return Err(Error::Contract(
            "beam_search_full requires max_len >= 1".into(),
        ));
    }
    let seed = Beam::singleton(Hypothesis::empty());
    beam_search_from(model, source, seed, b, max_len, length_reward, metrics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::{HashModel, TabularModel};

    const GARDEN_PATH: &str = include_str!("../../../models/garden_path.model");

    const CHAIN: &str = "\
src_vocab: x
tgt_vocab: </s> A B
order: 2
s_max: 1
ctx s=1 :: A=1.0
ctx s=1 A :: B=1.0
ctx s=1 A B :: </s>=1.0
";

    fn garden() -> TabularModel {
        TabularModel::parse(GARDEN_PATH).unwrap()
    }

    #[test]
    fn next_step_b1_is_greedy_step() {
        let model = garden();
        let beam = Beam::singleton(Hypothesis::empty());
        let out = next_step(&model, &[1], &beam, 1, true).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.top().unwrap().tokens, vec![1]); // A
        assert!((out.top().unwrap().log_score - 0.6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn next_step_keeps_all_when_b_exceeds_candidates() {
        let model = HashModel::new(3, 3);
        let beam = Beam::new(vec![
            Hypothesis::seed(vec![1]),
            Hypothesis::seed(vec![2]),
        ]);
        let all = next_step(&model, &[1], &beam, 10, true).unwrap();
        assert_eq!(all.len(), 6);
        let masked = next_step(&model, &[1], &beam, 10, false).unwrap();
        assert_eq!(masked.len(), 4);
        assert!(masked.items().iter().all(|h| *h.tokens.last().unwrap() != EOS_ID));
    }

    #[test]
    fn next_step_garden_path_top2() {
        let model = garden();
        let beam = Beam::singleton(Hypothesis::empty());
        let out = next_step(&model, &[1], &beam, 2, true).unwrap();
        assert_eq!(out.items()[0].tokens, vec![1]);
        assert!((out.items()[0].log_score - 0.6f64.ln()).abs() < 1e-12);
        assert_eq!(out.items()[1].tokens, vec![2]);
        assert!((out.items()[1].log_score - 0.4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn next_step_passes_finished_through_frozen() {
        let model = garden();
        let finished = Hypothesis::seed(vec![2, 3]).extended(EOS_ID, -0.1);
        let open = Hypothesis::seed(vec![1]);
        let beam = Beam::new(vec![finished.clone(), open]);
        let out = next_step(&model, &[1], &beam, 10, true).unwrap();
        assert!(out
            .items()
            .iter()
            .any(|h| h.tokens == finished.tokens && h.log_score == finished.log_score));
    }

    #[test]
    fn next_step_rejects_empty_beam() {
        let model = garden();
        let beam = Beam::new(vec![]);
        assert!(matches!(
            next_step(&model, &[1], &beam, 1, true),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn next_multi_zero_is_identity() {
        let model = garden();
        let beam = Beam::new(vec![Hypothesis::seed(vec![1]), Hypothesis::seed(vec![2])]);
        let out = next_multi(&model, &[1], &beam, 4, 0, true).unwrap();
        assert_eq!(out.items(), beam.items());
    }

    #[test]
    fn next_multi_one_matches_next_step() {
        let model = HashModel::new(11, 4);
        let beam = Beam::singleton(Hypothesis::empty());
        let a = next_multi(&model, &[1, 2], &beam, 3, 1, true).unwrap();
        let b = next_step(&model, &[1, 2], &beam, 3, true).unwrap();
        assert_eq!(a.items(), b.items());
    }

    #[test]
    fn next_multi_saturated_depth2_matches_brute_force() {
        let model = HashModel::new(5, 3);
        let src = [1];
        let beam = Beam::singleton(Hypothesis::empty());
        let out = next_multi(&model, &src, &beam, 100, 2, false).unwrap();
        // Brute force over the 4 masked two-step paths.
        let mut best: Option<Hypothesis> = None;
        for a in 1..3usize {
            let d0 = model.score_next(&src, &[]).unwrap();
            let d1 = model.score_next(&src, &[a]).unwrap();
            for b in 1..3usize {
                let cand = Hypothesis {
                    tokens: vec![a, b],
                    log_score: d0[a] + d1[b],
                };
                if best
                    .as_ref()
                    .map_or(true, |cur| compare_hypotheses(&cand, cur) == Ordering::Less)
                {
                    best = Some(cand);
                }
            }
        }
        assert_eq!(out.len(), 4);
        assert_eq!(out.top().unwrap().tokens, best.unwrap().tokens);
    }

    #[test]
    fn greedy_takes_garden_path_myopically() {
        let model = garden();
        let hyp = greedy_decode(&model, &[1], 10).unwrap();
        assert_eq!(hyp.tokens, vec![1, 3, EOS_ID]); // A C </s>
        assert!((hyp.log_score - 0.30f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn greedy_stops_immediately_when_eos_is_argmax() {
        let text = "\
src_vocab: x
tgt_vocab: </s> A
order: 0
s_max: 1
ctx s=1 :: </s>=0.9 A=0.1
";
        let model = TabularModel::parse(text).unwrap();
        let hyp = greedy_decode(&model, &[1], 10).unwrap();
        assert_eq!(hyp.tokens, vec![EOS_ID]);
    }

    #[test]
    fn greedy_forces_eos_at_max_len() {
        let text = "\
src_vocab: x
tgt_vocab: </s> A
order: 0
s_max: 1
ctx s=1 :: A=0.9 </s>=0.1
";
        let model = TabularModel::parse(text).unwrap();
        let hyp = greedy_decode(&model, &[1], 3).unwrap();
        assert_eq!(hyp.tokens, vec![1, 1, 1, EOS_ID]);
        assert!((hyp.log_score - (3.0 * 0.9f64.ln() + 0.1f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn beam_full_mass_one_chain_scores_zero() {
        let model = TabularModel::parse(CHAIN).unwrap();
        let hyp = beam_search_full(&model, &[1], 4, 10).unwrap();
        assert_eq!(hyp.tokens, vec![1, 2, EOS_ID]);
        assert!(hyp.log_score.abs() < 1e-12);
    }

    #[test]
    fn beam_b1_equals_greedy_on_hash_models() {
        for seed in 0..100u64 {
            let model = HashModel::new(seed, 5);
            let src = [1, 2];
            let g = greedy_decode(&model, &src, 6).unwrap();
            let b = beam_search_full(&model, &src, 1, 6).unwrap();
            assert_eq!(g.tokens, b.tokens, "seed {seed}");
            assert!((g.log_score - b.log_score).abs() < 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn extension_scores_never_increase() {
        let model = HashModel::new(9, 6);
        let mut beam = Beam::singleton(Hypothesis::empty());
        let mut prev_best = 0.0f64;
        for _ in 0..5 {
            beam = next_step(&model, &[1, 2, 3], &beam, 4, true).unwrap();
            let best = beam.top().unwrap().log_score;
            assert!(best <= prev_best + 1e-12);
            prev_best = best;
        }
    }

    #[test]
    fn metrics_count_scoring_and_peak_tokens() {
        let model = HashModel::new(2, 4);
        let mut metrics = StepMetrics::default();
        let beam = Beam::singleton(Hypothesis::seed(vec![1, 2]));
        let out = next_step_metered(&model, &[1], &beam, 3, true, &mut metrics).unwrap();
        assert_eq!(metrics.score_calls, 1);
        assert_eq!(metrics.peak_live_tokens, out.live_tokens());
        assert_eq!(out.live_tokens(), 3 * 3);
    }
}

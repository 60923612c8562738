//! Incremental conditional scorers: the abstract contract plus two
//! deterministic reference models.
//!
//! A scorer maps `(source_prefix, target_prefix)` to a complete, normalized
//! log-distribution over the target vocabulary. In simultaneous mode the
//! source prefix is only the revealed part of the stream, so the same
//! hypothesis is re-scored under growing source context as decoding
//! progresses.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{TokenId, Vocab, EOS_ID, EOS_SYMBOL};

/// Log-probability assigned to explicit zeros so arithmetic stays total
/// while the extension is never selectable.
pub const LOGP_FLOOR: f64 = -1e9;

/// Log-probabilities over the target vocabulary, indexed by token id.
pub type LogDistribution = Vec<f64>;

/// Behavioral contract for incremental conditional models.
///
/// `score_next` must be a pure function of its arguments and must return a
/// normalized distribution: `|sum_v exp(logp_v) - 1| <= 1e-9`.
pub trait Scorer: Send + Sync {
    fn src_vocab_size(&self) -> usize;
    fn tgt_vocab_size(&self) -> usize;

    /// Log-distribution over the next target token given the revealed
    /// source prefix and the committed target prefix.
    fn score_next(
        &self,
        source_prefix: &[TokenId],
        target_prefix: &[TokenId],
    ) -> Result<LogDistribution>;
}

pub(crate) fn validate_token_ids(prefix: &[TokenId], size: usize) -> Result<()> {
    for &t in prefix {
        if t >= size {
            return Err(Error::InvalidTokenId { id: t, size });
        }
    }
    Ok(())
}

/// True when the distribution sums to 1 within `tol`.
pub fn is_normalized(dist: &[f64], tol: f64) -> bool {
    (dist.iter().map(|&l| l.exp()).sum::<f64>() - 1.0).abs() <= tol
}

/// Argmax token id with ties broken toward the smaller id. `mask_eos`
/// excludes the eos entry.
pub fn argmax_token(dist: &[f64], mask_eos: bool) -> (TokenId, f64) {
    let mut best: Option<(TokenId, f64)> = None;
    for (id, &logp) in dist.iter().enumerate() {
        if mask_eos && id == EOS_ID {
            continue;
        }
        match best {
            Some((_, b)) if logp <= b => {}
            _ => best = Some((id, logp)),
        }
    }
    best.expect("vocabulary has at least one content token")
}

// ---------------------------------------------------------------------------
// Tabular model
// ---------------------------------------------------------------------------

/// File-driven model: explicit distributions keyed by the number of revealed
/// source tokens (capped at `s_max`) and the last `order` target tokens.
///
/// Lookup backs off from the longest stored suffix to shorter ones and
/// finally to the uniform distribution, so small files define behavior for
/// arbitrarily long inputs.
#[derive(Debug, Clone)]
pub struct TabularModel {
    vocab_src: Vocab,
    vocab_tgt: Vocab,
    order: usize,
    s_max: usize,
    entries: HashMap<(usize, Vec<TokenId>), LogDistribution>,
    uniform: LogDistribution,
}

impl TabularModel {
    pub fn src_vocab(&self) -> &Vocab {
        &self.vocab_src
    }

    pub fn tgt_vocab(&self) -> &Vocab {
        &self.vocab_tgt
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn s_max(&self) -> usize {
        self.s_max
    }

    /// Parses a model file. See the format notes in the README: header lines
    /// `src_vocab:`, `tgt_vocab:`, `order:`, `s_max:` followed by entry lines
    /// `ctx s=<int> [suffix tokens] :: tok=prob ...`. `#` starts a comment.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut src_symbols: Option<Vec<String>> = None;
        let mut tgt_symbols: Option<Vec<String>> = None;
        let mut order: Option<usize> = None;
        let mut s_max: Option<usize> = None;
        let mut raw_entries: Vec<(usize, usize, Vec<String>, Vec<(String, f64)>)> = Vec::new();

        for (idx, raw_line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }

            if let Some(rest) = line.strip_prefix("src_vocab:") {
                src_symbols = Some(rest.split_whitespace().map(String::from).collect());
            } else if let Some(rest) = line.strip_prefix("tgt_vocab:") {
                tgt_symbols = Some(rest.split_whitespace().map(String::from).collect());
            } else if let Some(rest) = line.strip_prefix("order:") {
                order = Some(parse_usize(rest.trim(), lineno, "order")?);
            } else if let Some(rest) = line.strip_prefix("s_max:") {
                s_max = Some(parse_usize(rest.trim(), lineno, "s_max")?);
            } else if let Some(rest) = line.strip_prefix("ctx") {
                raw_entries.push(parse_entry_line(rest, lineno)?);
            } else {
                return Err(Error::ModelParse {
                    line: lineno,
                    msg: format!("unrecognized line {line:?}"),
                });
            }
        }

        let src_symbols = src_symbols.ok_or_else(|| missing_header("src_vocab"))?;
        let tgt_symbols = tgt_symbols.ok_or_else(|| missing_header("tgt_vocab"))?;
        let order = order.ok_or_else(|| missing_header("order"))?;
        let s_max = s_max.ok_or_else(|| missing_header("s_max"))?;

        // The source side is a plain stream, so its header lists content
        // tokens; eos is prepended when not written explicitly.
        let src_symbols = if src_symbols.first().map(String::as_str) == Some(EOS_SYMBOL) {
            src_symbols
        } else {
            let mut with_eos = Vec::with_capacity(src_symbols.len() + 1);
            with_eos.push(EOS_SYMBOL.to_string());
            with_eos.extend(src_symbols);
            with_eos
        };
        let vocab_src = Vocab::new(src_symbols)?;
        if tgt_symbols.first().map(String::as_str) != Some(EOS_SYMBOL) {
            return Err(Error::ModelParse {
                line: 0,
                msg: format!("tgt_vocab must list {EOS_SYMBOL} first"),
            });
        }
        let vocab_tgt = Vocab::new(tgt_symbols)?;

        let mut entries = HashMap::new();
        for (lineno, s, suffix_syms, pairs) in raw_entries {
            let context = format!(
                "s={s} [{}]",
                suffix_syms.join(" ")
            );
            if suffix_syms.len() > order {
                return Err(Error::ModelValidation {
                    context,
                    msg: format!(
                        "suffix has {} tokens but order is {order}",
                        suffix_syms.len()
                    ),
                });
            }
            let mut suffix = Vec::with_capacity(suffix_syms.len());
            for sym in &suffix_syms {
                suffix.push(vocab_tgt.id_of(sym).ok_or_else(|| Error::ModelVocab {
                    token: sym.clone(),
                    line: lineno,
                })?);
            }

            let mut probs = vec![0.0f64; vocab_tgt.size()];
            let mut seen = vec![false; vocab_tgt.size()];
            for (sym, prob) in pairs {
                let id = vocab_tgt.id_of(&sym).ok_or_else(|| Error::ModelVocab {
                    token: sym.clone(),
                    line: lineno,
                })?;
                if seen[id] {
                    return Err(Error::ModelValidation {
                        context,
                        msg: format!("token {sym:?} listed twice"),
                    });
                }
                if prob < 0.0 {
                    return Err(Error::ModelValidation {
                        context,
                        msg: format!("negative probability {prob} for {sym:?}"),
                    });
                }
                seen[id] = true;
                probs[id] = prob;
            }
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::ModelValidation {
                    context,
                    msg: format!("distribution sums to {sum}, expected 1 within 1e-6"),
                });
            }

            let logps: LogDistribution = probs
                .iter()
                .map(|&p| if p > 0.0 { p.ln() } else { LOGP_FLOOR })
                .collect();
            let key = (s.min(s_max), suffix);
            if entries.insert(key, logps).is_some() {
                return Err(Error::ModelValidation {
                    context,
                    msg: "duplicate context entry".into(),
                });
            }
        }

        let uniform = vec![-(vocab_tgt.size() as f64).ln(); vocab_tgt.size()];
        Ok(Self {
            vocab_src,
            vocab_tgt,
            order,
            s_max,
            entries,
            uniform,
        })
    }
}

fn missing_header(name: &str) -> Error {
    Error::ModelParse {
        line: 0,
        msg: format!("missing required header `{name}:`"),
    }
}

fn parse_usize(text: &str, line: usize, what: &str) -> Result<usize> {
    text.parse().map_err(|_| Error::ModelParse {
        line,
        msg: format!("invalid {what} value {text:?}"),
    })
}

type RawEntry = (usize, usize, Vec<String>, Vec<(String, f64)>);

fn parse_entry_line(rest: &str, lineno: usize) -> Result<RawEntry> {
    let (ctx_part, dist_part) = rest.split_once("::").ok_or_else(|| Error::ModelParse {
        line: lineno,
        msg: "entry line missing `::` separator".into(),
    })?;

    let mut ctx_fields = ctx_part.split_whitespace();
    let s_field = ctx_fields.next().ok_or_else(|| Error::ModelParse {
        line: lineno,
        msg: "entry line missing `s=<int>`".into(),
    })?;
    let s_value = s_field.strip_prefix("s=").ok_or_else(|| Error::ModelParse {
        line: lineno,
        msg: format!("expected `s=<int>`, got {s_field:?}"),
    })?;
    let s = parse_usize(s_value, lineno, "s")?;
    let suffix: Vec<String> = ctx_fields.map(String::from).collect();

    let mut pairs = Vec::new();
    for field in dist_part.split_whitespace() {
        let (sym, prob_text) = field.rsplit_once('=').ok_or_else(|| Error::ModelParse {
            line: lineno,
            msg: format!("expected `tok=prob`, got {field:?}"),
        })?;
        let prob: f64 = prob_text.parse().map_err(|_| Error::ModelParse {
            line: lineno,
            msg: format!("invalid probability {prob_text:?}"),
        })?;
        pairs.push((sym.to_string(), prob));
    }
    if pairs.is_empty() {
        return Err(Error::ModelParse {
            line: lineno,
            msg: "entry line has an empty distribution".into(),
        });
    }
    Ok((lineno, s, suffix, pairs))
}

impl Scorer for TabularModel {
    fn src_vocab_size(&self) -> usize {
        self.vocab_src.size()
    }

    fn tgt_vocab_size(&self) -> usize {
        self.vocab_tgt.size()
    }

    fn score_next(
        &self,
        source_prefix: &[TokenId],
        target_prefix: &[TokenId],
    ) -> Result<LogDistribution> {
        validate_token_ids(source_prefix, self.vocab_src.size())?;
        validate_token_ids(target_prefix, self.vocab_tgt.size())?;

        let s = source_prefix.len().min(self.s_max);
        let max_suffix = self.order.min(target_prefix.len());
        for len in (0..=max_suffix).rev() {
            let suffix = target_prefix[target_prefix.len() - len..].to_vec();
            if let Some(dist) = self.entries.get(&(s, suffix)) {
                return Ok(dist.clone());
            }
        }
        Ok(self.uniform.clone())
    }
}

// ---------------------------------------------------------------------------
// Hash model
// ---------------------------------------------------------------------------

const FNV_OFFSET: u64 = 14_695_981_039_346_656_037;
const FNV_PRIME: u64 = 1_099_511_628_211;

fn fnv1a_extend(mut hash: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Raw logits of the hash model. For each token `v`, a uniform value is
/// drawn by FNV-1a hashing the string `"seed|p1,p2,…|q1,q2,…|v"` (decimal
/// integers), keeping the top 53 bits. Weights are `u^alpha`, the eos weight
/// is multiplied by `eos_weight`, and the result is log-normalized.
pub fn hash_model_logits(
    seed: u64,
    source_prefix: &[TokenId],
    target_prefix: &[TokenId],
    vocab_size: usize,
    alpha: f64,
    eos_weight: f64,
) -> LogDistribution {
    let mut key = String::with_capacity(24 + 4 * (source_prefix.len() + target_prefix.len()));
    let _ = write!(key, "{seed}|");
    push_ids(&mut key, source_prefix);
    key.push('|');
    push_ids(&mut key, target_prefix);
    key.push('|');
    let base = fnv1a_extend(FNV_OFFSET, key.as_bytes());

    let mut digits = String::new();
    let mut weights = Vec::with_capacity(vocab_size);
    let mut sum = 0.0f64;
    for v in 0..vocab_size {
        digits.clear();
        let _ = write!(digits, "{v}");
        let hash = fnv1a_extend(base, digits.as_bytes());
        let u = (hash >> 11) as f64 / (1u64 << 53) as f64;
        let mut w = if alpha == 1.0 { u } else { u.powf(alpha) };
        if v == EOS_ID {
            w *= eos_weight;
        }
        sum += w;
        weights.push(w);
    }

    weights
        .into_iter()
        .map(|w| {
            if w > 0.0 {
                (w / sum).ln()
            } else {
                LOGP_FLOOR
            }
        })
        .collect()
}

fn push_ids(key: &mut String, ids: &[TokenId]) {
    for (i, id) in ids.iter().enumerate() {
        if i > 0 {
            key.push(',');
        }
        let _ = write!(key, "{id}");
    }
}

/// Seeded pseudo-random model, fully determined by
/// `(seed, alpha, eos_weight, vocab_size)`. Source and target share one
/// vocabulary of integer ids.
#[derive(Debug, Clone)]
pub struct HashModel {
    pub seed: u64,
    pub vocab_size: usize,
    pub alpha: f64,
    pub eos_weight: f64,
}

impl HashModel {
    pub fn new(seed: u64, vocab_size: usize) -> Self {
        Self {
            seed,
            vocab_size,
            alpha: 1.0,
            eos_weight: 1.0,
        }
    }

    pub fn with_params(seed: u64, vocab_size: usize, alpha: f64, eos_weight: f64) -> Result<Self> {
        if vocab_size < 2 {
            return Err(Error::Contract(format!(
                "hash model vocab_size must be >= 2, got {vocab_size}"
            )));
        }
        if !(alpha > 0.0) {
            return Err(Error::Contract(format!(
                "hash model alpha must be > 0, got {alpha}"
            )));
        }
        if !(eos_weight >= 0.0) {
            return Err(Error::Contract(format!(
                "hash model eos_weight must be >= 0, got {eos_weight}"
            )));
        }
        Ok(Self {
            seed,
            vocab_size,
            alpha,
            eos_weight,
        })
    }
}

impl Scorer for HashModel {
    fn src_vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn tgt_vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn score_next(
        &self,
        source_prefix: &[TokenId],
        target_prefix: &[TokenId],
    ) -> Result<LogDistribution> {
        validate_token_ids(source_prefix, self.vocab_size)?;
        validate_token_ids(target_prefix, self.vocab_size)?;
        Ok(hash_model_logits(
            self.seed,
            source_prefix,
            target_prefix,
            self.vocab_size,
            self.alpha,
            self.eos_weight,
        ))
    }
}

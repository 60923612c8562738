//! Value types shared across the engine: vocabularies, hypotheses and beams.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::error::{Error, Result};

/// Integer-coded symbol. Id 0 is always the end-of-sequence marker.
pub type TokenId = usize;

/// Reserved end-of-sequence token id.
pub const EOS_ID: TokenId = 0;

/// End-of-sequence surface form.
pub const EOS_SYMBOL: &str = "</s>";

/// An ordered set of distinct token strings with `</s>` fixed at index 0.
///
/// The start symbol has no vocabulary entry; an empty target prefix plays
/// that role.
#[derive(Debug, Clone)]
pub struct Vocab {
    symbols: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocab {
    /// Builds a vocabulary from symbol strings. `symbols[0]` must be `</s>`,
    /// all symbols must be unique and non-empty, and there must be at least
    /// one content token besides `</s>`.
    pub fn new(symbols: Vec<String>) -> Result<Self> {
        if symbols.len() < 2 {
            return Err(Error::Contract(format!(
                "vocabulary needs eos plus at least one content token, got {} symbols",
                symbols.len()
            )));
        }
        if symbols[0] != EOS_SYMBOL {
            return Err(Error::Contract(format!(
                "vocabulary symbol 0 must be {EOS_SYMBOL:?}, got {:?}",
                symbols[0]
            )));
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (id, sym) in symbols.iter().enumerate() {
            if sym.is_empty() {
                return Err(Error::Contract(format!("empty symbol at index {id}")));
            }
            if index.insert(sym.clone(), id).is_some() {
                return Err(Error::Contract(format!("duplicate symbol {sym:?}")));
            }
        }
        Ok(Self { symbols, index })
    }

    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbol(&self, id: TokenId) -> Option<&str> {
        self.symbols.get(id).map(String::as_str)
    }

    pub fn id_of(&self, symbol: &str) -> Option<TokenId> {
        self.index.get(symbol).copied()
    }

    /// Renders token ids as a space-joined string of symbols.
    pub fn render(&self, tokens: &[TokenId]) -> Result<String> {
        let mut parts = Vec::with_capacity(tokens.len());
        for &t in tokens {
            parts.push(self.symbol(t).ok_or(Error::InvalidTokenId {
                id: t,
                size: self.size(),
            })?);
        }
        Ok(parts.join(" "))
    }
}

/// A target prefix together with its accumulated log-probability.
///
/// `log_score` is the sum of per-step conditional log-probabilities and is
/// exactly 0 for the empty prefix. Finished means the prefix ends with eos;
/// finished hypotheses are never extended.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<TokenId>,
    pub log_score: f64,
}

impl Hypothesis {
    /// The empty target prefix (the implicit start symbol), score 0.
    pub fn empty() -> Self {
        Self {
            tokens: Vec::new(),
            log_score: 0.0,
        }
    }

    pub fn seed(tokens: Vec<TokenId>) -> Self {
        Self {
            tokens,
            log_score: 0.0,
        }
    }

    pub fn finished(&self) -> bool {
        self.tokens.last() == Some(&EOS_ID)
    }

    /// Child hypothesis extending this one by `token`.
    pub fn extended(&self, token: TokenId, logp: f64) -> Self {
        debug_assert!(!self.finished(), "finished hypotheses are never extended");
        let mut tokens = Vec::with_capacity(self.tokens.len() + 1);
        tokens.extend_from_slice(&self.tokens);
        tokens.push(token);
        Self {
            tokens,
            log_score: self.log_score + logp,
        }
    }
}

/// Total order used everywhere a beam ranks hypotheses: higher score first,
/// ties broken by the lexicographically smaller token-id sequence.
pub fn compare_hypotheses(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.log_score
        .total_cmp(&a.log_score)
        .then_with(|| a.tokens.cmp(&b.tokens))
}

/// Ordered list of at most `b` hypotheses, descending by score.
#[derive(Debug, Clone, PartialEq)]
pub struct Beam {
    items: Vec<Hypothesis>,
}

impl Beam {
    /// Wraps hypotheses, sorting them into beam order.
    pub fn new(mut items: Vec<Hypothesis>) -> Self {
        items.sort_by(compare_hypotheses);
        Self { items }
    }

    pub fn singleton(h: Hypothesis) -> Self {
        Self { items: vec![h] }
    }

    /// Internal constructor for already-ordered items.
    pub(crate) fn from_sorted(items: Vec<Hypothesis>) -> Self {
        debug_assert!(Self { items: items.clone() }.is_well_ordered());
        Self { items }
    }

    pub fn items(&self) -> &[Hypothesis] {
        &self.items
    }

    pub fn top(&self) -> Option<&Hypothesis> {
        self.items.first()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn all_finished(&self) -> bool {
        self.items.iter().all(Hypothesis::finished)
    }

    /// Checks the ordering invariant (descending score, lexicographic ties).
    pub fn is_well_ordered(&self) -> bool {
        self.items
            .windows(2)
            .all(|w| compare_hypotheses(&w[0], &w[1]) != Ordering::Greater)
    }

    /// Total number of tokens held across all hypotheses. Used by the
    /// speculation memory-bound instrumentation.
    pub fn live_tokens(&self) -> usize {
        self.items.iter().map(|h| h.tokens.len()).sum()
    }
}

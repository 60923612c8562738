//! Append-only decode event log and its line-delimited serialization.
//!
//! One event per line, JSON-encoded, with the fixed field names `type`,
//! `token`, `source_index`, `g`, `logp` and `window`. A decode session ends
//! with the commit of the eos token, so multi-session files split on eos
//! commits without needing separators.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{TokenId, EOS_ID};

/// A single decode event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    /// One source token was consumed from the stream.
    Read { token: TokenId, source_index: usize },
    /// One target token was irrevocably emitted. `g` is the number of
    /// source tokens read at commit time; `logp` is the token's conditional
    /// log-probability under the source revealed at that moment.
    Commit { token: TokenId, g: usize, logp: f64 },
    /// Speculative window tokens computed past the commit and discarded.
    Speculate { window: Vec<TokenId> },
    /// The source stream ended; remaining output comes from tail search.
    TailStart,
}

/// Append-only event log for one decode session.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecodeTrace {
    events: Vec<Event>,
}

impl DecodeTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, event: Event) {
        self.events.push(event);
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Committed target tokens, in order.
    pub fn committed(&self) -> Vec<TokenId> {
        self.events
            .iter()
            .filter_map(|e| match e {
                Event::Commit { token, .. } => Some(*token),
                _ => None,
            })
            .collect()
    }

    /// The g value of each commit, in order.
    pub fn g_values(&self) -> Vec<usize> {
        self.events
            .iter()
            .filter_map(|e| match e {
                Event::Commit { g, .. } => Some(*g),
                _ => None,
            })
            .collect()
    }

    /// Number of source tokens read during the session.
    pub fn source_len(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, Event::Read { .. }))
            .count()
    }

    /// Sum of per-commit log-probabilities.
    pub fn commit_logprob_sum(&self) -> f64 {
        self.events
            .iter()
            .filter_map(|e| match e {
                Event::Commit { logp, .. } => Some(*logp),
                _ => None,
            })
            .sum()
    }

    /// Index of the TailStart event, if the session reached the tail.
    pub fn tail_start_index(&self) -> Option<usize> {
        self.events.iter().position(|e| matches!(e, Event::TailStart))
    }

    /// Serializes the session as one JSON event per line.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        for event in &self.events {
            let line = serde_json::to_string(event)
                .map_err(|e| Error::Contract(format!("trace serialization failed: {e}")))?;
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("in-memory write cannot fail");
        String::from_utf8(out).expect("serde_json emits utf-8")
    }

    /// Reads one or more serialized sessions. Sessions are delimited by the
    /// commit of eos; trailing events after the last eos commit form a final
    /// (possibly truncated) session.
    pub fn read_sessions<R: BufRead>(r: R) -> Result<Vec<DecodeTrace>> {
        let mut sessions = Vec::new();
        let mut current = DecodeTrace::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let event: Event = serde_json::from_str(&line).map_err(|e| Error::TraceParse {
                line: lineno + 1,
                msg: e.to_string(),
            })?;
            let ends_session = matches!(event, Event::Commit { token: EOS_ID, .. });
            current.push(event);
            if ends_session {
                sessions.push(std::mem::take(&mut current));
            }
        }
        if !current.events.is_empty() {
            sessions.push(current);
        }
        Ok(sessions)
    }
}

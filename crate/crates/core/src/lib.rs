//! Streaming sequence decoding with speculative beam search.
//!
//! The crate implements simultaneous decoding policies (fixed wait-k,
//! adaptive thresholds, explicit schedules) on top of pluggable incremental
//! scorers, plus the speculative beam search family that lets a beam run
//! ahead of the committed prefix, a brute-force oracle for validation,
//! latency and quality metrics, and an experiment harness exposed through
//! the `specbeam` binary.

pub mod error;
pub mod harness;
pub mod metrics;
pub mod oracle;
pub mod policy;
pub mod sbs;
pub mod scorer;
pub mod search;
pub mod trace;
pub mod types;

pub use error::{Error, Result};
pub use sbs::{simul_decode, CommitMode, SbsConfig};
pub use scorer::{HashModel, Scorer, TabularModel};
pub use types::{Beam, Hypothesis, TokenId, Vocab, EOS_ID, EOS_SYMBOL};

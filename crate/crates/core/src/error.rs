use crate::types::TokenId;

/// Errors surfaced by the decoding engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    ModelParse { line: usize, msg: String },

    #[error("invalid distribution for context `{context}`: {msg}")]
    ModelValidation { context: String, msg: String },

    #[error("unknown token {token:?} at line {line}")]
    ModelVocab { token: String, line: usize },

    #[error("unknown token {token:?} at line {line}, column {column}")]
    UnknownInputToken {
        token: String,
        line: usize,
        column: usize,
    },

    #[error("schedule parse error at offset {offset}: invalid character {ch:?}")]
    ScheduleParse { offset: usize, ch: char },

    #[error("token id {id} out of range for vocabulary of size {size}")]
    InvalidTokenId { id: TokenId, size: usize },

    #[error("policy contract violation: {0}")]
    PolicyContract(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("metric undefined: {0}")]
    MetricUndefined(String),

    #[error("instance too large: {0}")]
    InstanceTooLarge(String),

    #[error("trace parse error at line {line}: {msg}")]
    TraceParse { line: usize, msg: String },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

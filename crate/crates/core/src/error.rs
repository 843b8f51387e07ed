use std::path::PathBuf;

use thiserror::Error;

use crate::family::Closure;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("base mismatch: family has base {family}, word has base {word}")]
    BaseMismatch { family: u8, word: u8 },

    #[error("family spec, line {line}, field `{field}`: {message}")]
    Spec {
        line: usize,
        field: String,
        message: String,
    },

    #[error(
        "{operation} needs a subword-closed family (all subwords of length i of any word in A_j \
         lie in A_i, for every i < j); subword closure is {status}"
    )]
    ClosureRequired {
        operation: &'static str,
        status: Closure,
    },

    #[error("count unavailable: {0}")]
    CountUnavailable(String),

    #[error("enumeration budget of {budget} words exceeded: {what}")]
    BudgetExceeded { budget: u64, what: String },

    #[error("no blocker word of length {n} for s = {s}: {reason}")]
    BlockerNotFound { n: usize, s: String, reason: String },

    #[error("digit stream exhausted after {0} digits")]
    StreamExhausted(u64),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error(
        "sandwich bound violated at n = {n} (block {block}): ell_n = {ell} not in [{lo}, {hi}]"
    )]
    SandwichViolation {
        n: u64,
        block: u64,
        ell: u64,
        lo: u64,
        hi: u64,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid categorical space: n = {n}, k = {k} (need n >= 1, k >= 2)")]
    InvalidSpace { n: usize, k: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("evaluation budget of {budget} exhausted")]
    BudgetExhausted { budget: usize },

    #[error("empty trace")]
    EmptyTrace,

    #[error("max order {max_order} exceeds number of variables {n}")]
    OrderTooLarge { max_order: usize, n: usize },

    #[error("basis has {d} terms, above the configured cap of {cap}")]
    BasisTooLarge { d: u128, cap: usize },

    #[error("domain has {size} points, above the configured cap of {cap}")]
    DomainTooLarge { size: u128, cap: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("no observations to condition on")]
    NoData,

    #[error("sampler diverged: {0}")]
    SamplerDivergence(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unbalanced dot-bracket structure at position {position}: {message}")]
    StructureParse { position: usize, message: String },

    #[error("invalid nucleotide {letter:?} at position {position}")]
    InvalidNucleotide { letter: char, position: usize },

    #[error("external process `{command}` failed: {message}")]
    External { command: String, message: String },

    #[error("could not parse external output: {0}")]
    ExternalParse(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

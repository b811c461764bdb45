use thiserror::Error;

/// Errors produced by demkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} detectors, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("{what} needs 2^{n} entries, above the cap of 2^{cap}")]
    Capacity {
        what: &'static str,
        n: usize,
        cap: usize,
    },

    #[error("no shots in the data")]
    EmptyData,

    #[error("class with all fixed values zero cannot be estimated from polarizations")]
    UnsupportedClass,

    #[error("events not identifiable from the supplied parities: {events:?}")]
    Identifiability { events: Vec<String> },

    #[error(
        "polarizations indistinguishable from zero for parities {parities:?}; \
         try the aggregated or lattice estimators"
    )]
    EstimationImpossible { parities: Vec<String> },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

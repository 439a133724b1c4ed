//! Error type shared by all levyflow modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown country code {code:?}")]
    UnknownCountry { code: String },

    #[error("negative value {value} at cell ({origin}, {destination})")]
    NegativeValue {
        origin: String,
        destination: String,
        value: f64,
    },

    #[error("cell ({origin}, {destination}): {message}")]
    ParseCell {
        origin: String,
        destination: String,
        message: String,
    },

    #[error("line {line}: {message}")]
    ParseLine { line: usize, message: String },

    #[error("ambiguous remap: historical code {code:?} maps to both {first:?} and {second:?}")]
    AmbiguousRemap {
        code: String,
        first: String,
        second: String,
    },

    #[error("configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrices are defined on different country registries")]
    RegistryMismatch,

    #[error("total flow is zero; the displacement distribution is empty")]
    EmptyDistribution,

    #[error("insufficient tail: {usable} usable points, need at least {needed}")]
    InsufficientTail { usable: usize, needed: usize },

    #[error("{op}: {needed} data points required, got {got}")]
    InsufficientData {
        op: &'static str,
        needed: usize,
        got: usize,
    },

    #[error(
        "fit did not converge after {iterations} iterations \
         (best a={a:e}, beta={beta}, ss_res={ss_res:e})"
    )]
    DidNotConverge {
        a: f64,
        beta: f64,
        ss_res: f64,
        iterations: usize,
    },

    #[error("component {label:?} has zero total")]
    ZeroTotalComponent { label: String },

    #[error("unit mismatch: expected {expected:?}, component {label:?} has {found:?}")]
    UnitMismatch {
        expected: String,
        found: String,
        label: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by input files or configuration rather than by
    /// the numeric pipeline. The CLI maps these to exit code 2, the rest to 1.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::EmptyDistribution
                | Error::InsufficientTail { .. }
                | Error::InsufficientData { .. }
                | Error::DidNotConverge { .. }
        )
    }
}

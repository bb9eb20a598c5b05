use thiserror::Error;

/// Errors raised by the benchmarking library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("channel is not CPTP: {0}")]
    NotCptp(String),

    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("premise not met: {0}")]
    PremiseViolated(String),

    #[error("simulation failed at m={m}, circuit {circuit}: {source}")]
    Simulation {
        m: usize,
        circuit: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for errors caused by a numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical(_) | Error::NotCptp(_) | Error::NotUnitary { .. } => true,
            Error::Simulation { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    /// True when a theorem or lemma premise was not satisfied.
    pub fn is_premise(&self) -> bool {
        match self {
            Error::PremiseViolated(_) => true,
            Error::Simulation { source, .. } => source.is_premise(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

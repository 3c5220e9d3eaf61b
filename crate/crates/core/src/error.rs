use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range (size {size})")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("operator is not in the span of the basis (GF(2) residual {residual:#x})")]
    NotInSpan { residual: u64 },

    #[error("generators are not independent (rank {rank} of {count})")]
    Dependent { rank: usize, count: usize },

    #[error("matrix is singular over GF(2)")]
    Singular,

    #[error("conditioning on an event of zero probability")]
    ZeroProbability,

    #[error("invalid syndrome: {0}")]
    InvalidSyndrome(String),

    #[error("operator is not closed (non-trivial syndrome)")]
    OpenOperator,

    #[error("syndrome mismatch between error and correction")]
    SyndromeMismatch,

    #[error("lattice too large for exact enumeration: {0}")]
    LatticeTooLarge(String),

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("cell specification error: {0}")]
    Cell(String),

    #[error("wiring error: {0}")]
    Wiring(String),

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("trial {trial} (base seed {seed}) failed: {source}")]
    Trial {
        trial: u64,
        seed: u64,
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}

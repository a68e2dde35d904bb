use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpnnError {
    #[error("a Fock basis needs at least one photon and one mode (got n={photons}, m={modes})")]
    EmptyBasis { photons: usize, modes: usize },

    #[error("matrix must be square and non-empty, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{name} must be non-negative and finite, got {value}")]
    InvalidQuantity { name: &'static str, value: f64 },

    #[error("mode pair ({0}, {1}) is out of range for a {2}-mode mesh")]
    ModeOutOfRange(usize, usize, usize),

    #[error("invalid qubit pairing: {0}")]
    InvalidPairing(String),

    #[error("invalid training set: {0}")]
    InvalidTrainingSet(String),

    #[error("occupation vector {0:?} is not in the basis")]
    UnknownState(Vec<usize>),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("optimizer failure: {0}")]
    Optimizer(String),
}

pub type Result<T, E = QpnnError> = std::result::Result<T, E>;

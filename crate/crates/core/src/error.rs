use alloc::string::String;

/// Errors produced by the simulation and optimization routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("register must contain at least one qubit")]
    EmptyRegister,
    #[error("{n_qubits}-qubit register exceeds the limit of {limit}")]
    RegisterTooLarge { n_qubits: usize, limit: usize },
    #[error("site {site} out of range for a {n_qubits}-qubit register")]
    SiteOutOfRange { site: usize, n_qubits: usize },
    #[error("site {0} appears more than once in a Pauli string")]
    DuplicateSite(usize),
    #[error("register size mismatch ({left} vs {right} qubits)")]
    SizeMismatch { left: usize, right: usize },
    #[error("amplitude array of length {0} is not a power of two")]
    BadLength(usize),
    #[error("operator is not hermitian")]
    NonHermitian,
    #[error("rotation generator must be a hermitian Pauli string")]
    InvalidGenerator,
    #[error("control qubit {0} overlaps the controlled operation's support")]
    ControlOverlap(usize),
    #[error("invalid model parameters: {0}")]
    InvalidModel(String),
    #[error("invalid ansatz: {0}")]
    InvalidAnsatz(String),
    #[error("parameter vector has length {got}, expected {expected}")]
    ParameterLength { got: usize, expected: usize },
    #[error("parameter index {index} out of range for {count} parameters")]
    ParameterIndex { index: usize, count: usize },
    #[error("chain length {0} is outside the exact-diagonalization range")]
    OracleRange(usize),
    #[error("eigensolver failed to converge (residual {0:e})")]
    EigenSolver(f64),
    #[error("metric solve failed even with regularization {0:e}")]
    SolveFailed(f64),
    #[error("shot count must be positive")]
    ZeroShots,
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("invalid extrapolation schedule: {0}")]
    InvalidSchedule(String),
    #[error("degree-{degree} fit needs {needed} distinct noise factors, got {got}")]
    RankDeficient {
        degree: usize,
        needed: usize,
        got: usize,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

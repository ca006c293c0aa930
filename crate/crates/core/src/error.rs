use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid tensor dimensions: {0}")]
    InvalidDims(String),

    #[error("kron of an empty factor list")]
    EmptyKron,

    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("operator is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("Pauli exponential needs a Hermitian Pauli string, got phase {0}")]
    NonHermitianPauli(String),

    #[error("invalid Pauli string: {0}")]
    InvalidPauli(String),

    #[error("invalid subsystem index {index} for {n} factors")]
    InvalidSubsystem { index: usize, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bath environment state violates the first-order trace condition (|Tr_E| = {0:.3e})")]
    FirstOrderTrace(f64),

    #[error("system Hamiltonian must act on the system factors only: {0}")]
    BathSupport(String),

    #[error("initial joint state is not a product state (deviation {0:.3e})")]
    EntangledInitialState(f64),

    #[error("input amplitudes are not normalized (norm² = {0})")]
    NotNormalized(f64),

    #[error("measurement outcome has vanishing probability ({0:.3e})")]
    ImpossibleOutcome(f64),

    #[error("time {t} is outside the gate interval [0, {t_gate}]")]
    TimeOutOfRange { t: f64, t_gate: f64 },

    #[error("synthesis factor {0} acts on more than two qubits")]
    NotTwoLocal(String),

    #[error("generators {0} and {1} commute; their group commutator is the identity")]
    CommutingGenerators(String, String),

    #[error("gate is not compatible with this operation: {0}")]
    UnsupportedGate(String),

    #[error("gate Hamiltonian does not commute with the noise coupling (norm {0:.3e})")]
    NonCommutingGate(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right} qubits")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid Pauli label {label:?}: {reason}")]
    InvalidLabel { label: String, reason: String },

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("qubit {qubit} appears more than once in layer {layer}")]
    DuplicateQubit { layer: usize, qubit: usize },

    #[error("operation {0:?} is not Clifford")]
    NonClifford(String),

    #[error("layer {layer} cannot be twirled: {reason}")]
    NotTwirlable { layer: usize, reason: String },

    #[error("layer {0} does not contain a classically-controlled CNOT")]
    NoControlledCnot(usize),

    #[error("invalid noise model: {0}")]
    InvalidModel(String),

    #[error("support mismatch: {0}")]
    SupportMismatch(String),

    #[error("dimension cap exceeded: {qubits} qubits, backend allows at most {cap}")]
    DimensionCap { qubits: usize, cap: usize },

    #[error("layer {0:?} has no noise binding")]
    UnboundLayer(String),

    #[error("unsupported by backend: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("singular generator system: {0}")]
    SingularSystem(String),

    #[error("basis {0} cannot be fitted: no depth has a positive mean")]
    Unfittable(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("sample budget exceeded: {required} instances requested, cap is {cap}")]
    Budget { required: u64, cap: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors produced by the cycle benchmarking toolkit.
#[derive(Debug, Error)]
pub enum CbError {
    #[error("dimension mismatch: {left} qubits vs {right} qubits")]
    DimensionMismatch { left: usize, right: usize },

    #[error("qubit count must be at least 1")]
    ZeroQubits,

    #[error("operator {0} is not Hermitian (phase must be +1 or -1)")]
    NonHermitian(String),

    #[error("cannot parse Pauli string {input:?}: {reason}")]
    ParsePauli { input: String, reason: String },

    #[error("Molmer-Sorensen cycle requires an even register of at least 2 qubits, got {0}")]
    OddMsRegister(usize),

    #[error("invalid sequence length m={m}: {reason}")]
    InvalidLength { m: usize, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("noise model not supported by the {backend} backend: {reason}")]
    UnsupportedNoise { backend: &'static str, reason: String },

    #[error("{n} qubits exceeds the dense limit of {max}")]
    TooManyQubits { n: usize, max: usize },

    #[error("missing records: {0}")]
    MissingRecords(String),

    #[error("invalid analysis input: {0}")]
    InvalidAnalysis(String),

    #[error("circuit {context} failed: {source}")]
    Circuit {
        context: String,
        #[source]
        source: Box<CbError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CbError {
    /// Whether the error stems from invalid user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        match self {
            CbError::Io(_) => false,
            CbError::Circuit { source, .. } => source.is_validation(),
            _ => true,
        }
    }
}

pub type Result<T> = std::result::Result<T, CbError>;

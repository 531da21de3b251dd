use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("matrix must be square, found {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian: max |A - A^dagger| = {deviation:.3e}")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary: max |U U^dagger - I| = {deviation:.3e}")]
    NotUnitary { deviation: f64 },

    #[error("non-finite entry in matrix")]
    NonFinite,

    #[error("channel has no Kraus operators")]
    EmptyChannel,

    #[error("unsupported dimension {0} (only 2 and 3 are supported)")]
    UnsupportedDimension(usize),

    #[error("completeness residual {residual:.1e} exceeds {limit:.0e}")]
    Completeness { residual: f64, limit: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("Bloch vector norm {norm} exceeds 1")]
    OutsideBlochBall { norm: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("invalid Choi matrix: {0}")]
    InvalidChoi(String),

    #[error("channel is not incoherent: |m{slot}| = {magnitude:.3e}")]
    NotIncoherentChannel { slot: &'static str, magnitude: f64 },

    #[error("operator {index} is not incoherent")]
    NotIncoherentOperator { index: usize },

    #[error("constraint violation: {0}")]
    ConstraintViolation(String),

    #[error("no root of the quadratic satisfies the product conditions")]
    NoValidRoot,

    #[error("block is not rank one: second eigenvalue {second:.3e}")]
    RankOneViolation { second: f64 },

    #[error("no parameter is below the zero tolerance; use the generic decomposition")]
    NoDegenerateParameter,

    #[error("expected exactly two nonzero Kraus operators, found {0}")]
    NotTwoKraus(usize),

    #[error("unknown example '{name}' (available: {available})")]
    UnknownExample { name: String, available: String },

    #[error("malformed channel description: {0}")]
    Format(String),
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Format(err.to_string())
    }
}

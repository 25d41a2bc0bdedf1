use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("tolerance {name} must be finite and non-negative, got {value}")]
    InvalidTolerance { name: &'static str, value: f64 },

    #[error("matrix is not Hermitian (max |A - A†| = {defect:.3e})")]
    NonHermitianInput { defect: f64 },

    #[error("Choi matrix is not Hermitian (max |J - J†| = {defect:.3e})")]
    NonHermitianChoi { defect: f64 },

    #[error("operator restricted to the subspace vanishes")]
    NullRestriction,

    #[error("map is not Hermitian-preserving and trace-preserving: {0}")]
    NonHptpInput(String),

    #[error("map is not invertible (transfer-matrix condition number {condition:.3e})")]
    SingularMap { condition: f64 },

    #[error("unknown map recipe `{0}`")]
    UnknownRecipe(String),

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("map is not semi-positive (y* = {y_star:.3e})")]
    NotSp { y_star: f64 },

    #[error("map is not semi-nonnegative (y* = {y_star:.3e})")]
    NotSn { y_star: f64 },

    #[error("invalid anchor state: {0}")]
    InvalidAnchor(String),

    #[error("unsupported form: {0}")]
    UnsupportedForm(String),

    #[error("not a CPTP Kraus set: {0}")]
    NotCptp(String),

    #[error("error-correction condition violated (max residual {max_violation:.3e})")]
    KlViolated { max_violation: f64 },

    #[error("alpha couples positive and negative noise terms (max coupling {coupling:.3e})")]
    SignSectorObstruction { coupling: f64 },

    #[error("signed Kraus set is not trace-preserving (max |Σ sign E†E - I| = {defect:.3e})")]
    UnnormalizedNoise { defect: f64 },

    #[error("invalid code space: {0}")]
    InvalidCode(String),

    #[error("duality dichotomy violated: {0}")]
    DichotomyViolation(String),

    #[error("decomposition failed verification: {0}")]
    VerificationFailed(String),

    #[error("malformed input: {0}")]
    Parse(String),
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("operator is not an effect: {0}")]
    NotAnEffect(String),

    #[error("pair map is not isometric on its span (gram residual {residual:e})")]
    GramMismatch { residual: f64 },

    #[error("rank deficiency inconsistent with pair map: {0}")]
    RankDeficient(String),

    #[error("invalid gram matrix: {0}")]
    InvalidGram(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid scheme: {0}")]
    InvalidScheme(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("outcome `{0}` carries no value")]
    MissingValue(String),

    #[error("unsupported sampler configuration: {0}")]
    Unsupported(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

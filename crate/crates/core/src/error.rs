use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spec: {field}: {reason}")]
    InvalidSpec { field: &'static str, reason: String },

    #[error("site {site} out of range for a lattice of {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("dimension {dim} exceeds the capacity of {cap}; {hint}")]
    Capacity {
        dim: usize,
        cap: usize,
        hint: &'static str,
    },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("state is not normalized (norm = {0})")]
    NotNormalized(f64),

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("need at least {need} levels, got {got}")]
    TooFewLevels { got: usize, need: usize },

    #[error("resonant coupling: omega == omega_a")]
    Resonant,

    #[error("quadrature under-resolved: {0}")]
    UnderResolved(String),

    #[error("extract is lossy: {leaked:.3e} of the weight lies outside the scar subspace")]
    LossyExtract { leaked: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("eigendecomposition failed to converge")]
    Eigen,

    #[error("krylov propagation did not reach the requested accuracy ({0})")]
    Krylov(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn spec(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidSpec {
            field,
            reason: reason.into(),
        }
    }
}

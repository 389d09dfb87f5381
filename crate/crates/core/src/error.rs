use thiserror::Error;

/// Errors surfaced by the synthesis toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("dictionary entry {index} has total degree 0; dictionary entries must vanish at the origin")]
    DegreeZeroMonomial { index: usize },
    #[error("transformation matrix does not reproduce the dictionary: entry {index} expands to `{got}`, expected `{expected}`")]
    FactorizationIdentity {
        index: usize,
        got: String,
        expected: String,
    },
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:.3e}, tolerance {tol:.3e})")]
    NotPsd { min_eig: f64, tol: f64 },
    #[error("integration diverged: non-finite state at t = {time:.6}")]
    IntegrationDiverged { time: f64 },
    #[error("forward difference needs at least two state columns")]
    SingleColumn,
    #[error("truncation size {size} too small: wrap boundary needs more subsystems than the neighbourhood cardinality {card}")]
    TruncationTooSmall { size: usize, card: usize },
    #[error("unsupported topology for closed-form gain bound: {0}; supply a custom column-sum bound")]
    UnsupportedTopology(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("monomial basis too small: condition matrix has degree {required} but the Gram basis only spans degree {available}")]
    BasisTooSmall { required: usize, available: usize },
    #[error("recovery failed: {0}")]
    Recovery(String),
    #[error("composition failed: {0}")]
    Composition(String),
    #[error("certificate violated: {0}")]
    CertificateViolated(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by the solver, its kernels and the problem generators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LocgError {
    #[error("empty basis: every column was dropped during orthonormalization")]
    EmptyBasis,
    #[error("rank deficient block: Gram matrix condition {condition:.3e} exceeds {limit:.0e}")]
    RankDeficient { condition: f64, limit: f64 },
    #[error("matrix is not Hermitian: relative asymmetry {asymmetry:.3e}")]
    NotHermitian { asymmetry: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),
    #[error("degenerate smallest eigenvalue: gap {gap:.3e} is within tolerance")]
    DegenerateSmallest { gap: f64 },
    #[error("spectrum needs at least two distinct values")]
    TooFewDistinct,
    #[error("zero residual: {0}")]
    ZeroResidual(&'static str),
    #[error("subspace collapse: search subspace has no new directions")]
    SubspaceCollapse,
    #[error("nonreal Ritz values: projected matrix asymmetry {asymmetry:.3e}")]
    NonrealRitz { asymmetry: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("chebyshev polynomial evaluated inside (-1, 1): t = {0}")]
    ChebyshevDomain(f64),
    #[error("matrix market: {0}")]
    MatrixMarket(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, LocgError>;

impl From<std::io::Error> for LocgError {
    fn from(err: std::io::Error) -> Self {
        LocgError::Io(err.to_string())
    }
}

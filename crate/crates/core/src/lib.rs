//! Locally optimal block Krylov eigensolver with rate diagnostics.

pub mod eig;
pub mod error;
pub mod linalg;
pub mod linesearch;
pub mod mtx;
pub mod operator;
pub mod problems;
pub mod rate;
pub mod scalar;
pub mod solver;
pub mod trace;

pub use eig::{dense_eigh, laplacian2d_spectrum, spectral_summary, SpectralSummary};
pub use error::{LocgError, Result};
pub use operator::{
    CountingOperator, DenseOperator, DiagonalPreconditioner, HermitianOperator, IdentityPreconditioner,
    OperatorPreconditioner, Preconditioner,
};
pub use problems::{Problem, ProblemSpec};
pub use scalar::{Block, Scalar};
pub use rate::{bound_c, chebyshev_t, chi, chi1, omega, RateBound, SigmaDiagnostic};
pub use solver::{locg_solve, locg_step, SolverConfig, SolverState};
pub use trace::{ConvergenceTrace, IterationRecord, Outcome};

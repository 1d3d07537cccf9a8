//! Reference spectra: a dense Hermitian eigensolver, the analytic spectrum of
//! the 2D five-point Laplacian, and the condition-number summary that feeds
//! the rate bounds.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{LocgError, Result};
use crate::operator::hermitian_defect;
use crate::scalar::Scalar;

/// Largest matrix the dense reference accepts.
pub const DENSE_LIMIT: usize = 4000;

/// Eigen-decomposition of a dense Hermitian matrix, eigenvalues ascending.
///
/// Backed by nalgebra's Householder tridiagonalization with implicit QR.
/// Ties keep the routine's original order.
pub fn dense_eigh<T: Scalar>(a: &DMatrix<T>) -> Result<(Vec<f64>, DMatrix<T>)> {
    if a.nrows() != a.ncols() {
        return Err(LocgError::Dimension(format!("dense_eigh: {}x{} is not square", a.nrows(), a.ncols())));
    }
    if a.nrows() > DENSE_LIMIT {
        return Err(LocgError::Dimension(format!(
            "dense_eigh: n = {} exceeds {DENSE_LIMIT}",
            a.nrows()
        )));
    }
    let asymmetry = hermitian_defect(a);
    if asymmetry > 1e-12 {
        return Err(LocgError::NotHermitian { asymmetry });
    }
    Ok(eigh_symmetrized(a))
}

/// Like [`dense_eigh`] but symmetrizes first instead of validating.
pub(crate) fn eigh_symmetrized<T: Scalar>(a: &DMatrix<T>) -> (Vec<f64>, DMatrix<T>) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let sym = (a + a.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Eigenvalues `-4 + 2cos(i pi/(N+1)) + 2cos(j pi/(N+1))`, `i, j = 1..N`, ascending.
pub fn laplacian2d_spectrum(grid: usize) -> Vec<f64> {
    let h = PI / (grid as f64 + 1.0);
    let cosines: Vec<f64> = (1..=grid).map(|i| 2.0 * (i as f64 * h).cos()).collect();
    let mut values = Vec::with_capacity(grid * grid);
    for ci in &cosines {
        for cj in &cosines {
            values.push(-4.0 + ci + cj);
        }
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values
}

/// Extremes of a spectrum and the derived condition number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSummary {
    pub lambda_1: f64,
    pub lambda_2: f64,
    pub lambda_n: f64,
    /// `(lambda_n - lambda_1) / (lambda_2 - lambda_1)`
    pub kappa: f64,
    /// `(kappa - 1) / (kappa + 1)`
    pub delta: f64,
}

/// Builds a [`SpectralSummary`] from ascending eigenvalues.
///
/// `lambda_2` is the first value above `lambda_1 + 1e-12 * spread`; the
/// smallest eigenvalue itself has to be simple.
pub fn spectral_summary(values: &[f64]) -> Result<SpectralSummary> {
    if values.len() < 2 {
        return Err(LocgError::TooFewDistinct);
    }
    if values.windows(2).any(|w| w[1] < w[0]) {
        return Err(LocgError::Dimension("spectral_summary expects ascending values".into()));
    }
    let lambda_1 = values[0];
    let lambda_n = values[values.len() - 1];
    let spread = lambda_n - lambda_1;
    if !(spread > 0.0) {
        return Err(LocgError::TooFewDistinct);
    }
    let gap = values[1] - lambda_1;
    if gap <= 1e-12 * spread {
        return Err(LocgError::DegenerateSmallest { gap });
    }
    let lambda_2 = values[1];
    let kappa = spread / (lambda_2 - lambda_1);
    let delta = (kappa - 1.0) / (kappa + 1.0);
    Ok(SpectralSummary { lambda_1, lambda_2, lambda_n, kappa, delta })
}

//! Linear operator abstraction used by the solver.
//!
//! Operators act on whole blocks so that dense and stencil implementations can
//! batch their work. The solver only ever calls [`HermitianOperator::apply`];
//! the dense form is optional and used by reference checks.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DMatrix;

use crate::error::{LocgError, Result};
use crate::scalar::{Block, Scalar};

/// A self-adjoint linear map on `T^n`.
pub trait HermitianOperator<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    /// Applies the operator to every column of `x` (an `n x k` block).
    fn apply(&self, x: &Block<T>) -> Block<T>;

    /// Explicit matrix, when cheap enough to form.
    fn dense(&self) -> Option<DMatrix<T>> {
        None
    }

    /// An upper estimate of the spectral norm, used to scale tolerances.
    fn scale(&self) -> f64;
}

impl<T: Scalar, O: HermitianOperator<T> + ?Sized> HermitianOperator<T> for &O {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &Block<T>) -> Block<T> {
        (**self).apply(x)
    }
    fn dense(&self) -> Option<DMatrix<T>> {
        (**self).dense()
    }
    fn scale(&self) -> f64 {
        (**self).scale()
    }
}

impl<T: Scalar, O: HermitianOperator<T> + ?Sized> HermitianOperator<T> for Box<O> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &Block<T>) -> Block<T> {
        (**self).apply(x)
    }
    fn dense(&self) -> Option<DMatrix<T>> {
        (**self).dense()
    }
    fn scale(&self) -> f64 {
        (**self).scale()
    }
}

/// Relative asymmetry `max|a_ij - conj(a_ji)| / max|a_ij|`.
pub fn hermitian_defect<T: Scalar>(a: &DMatrix<T>) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    let mut big: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            big = big.max(a[(i, j)].modulus());
            if i <= j {
                worst = worst.max((a[(i, j)] - a[(j, i)].conjugate()).modulus());
            }
        }
    }
    if big == 0.0 {
        0.0
    } else {
        worst / big
    }
}

/// Dense Hermitian matrix.
#[derive(Debug, Clone)]
pub struct DenseOperator<T: Scalar> {
    matrix: DMatrix<T>,
    scale: f64,
}

impl<T: Scalar> DenseOperator<T> {
    /// Wraps `matrix` after checking it is square and Hermitian to `1e-12`.
    pub fn new(matrix: DMatrix<T>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(LocgError::Dimension(format!(
                "operator must be square and nonempty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !crate::scalar::is_finite(&matrix) {
            return Err(LocgError::NonFinite("operator matrix"));
        }
        let asymmetry = hermitian_defect(&matrix);
        if asymmetry > 1e-12 {
            return Err(LocgError::NotHermitian { asymmetry });
        }
        let scale = inf_norm(&matrix);
        Ok(Self { matrix, scale })
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }
}

fn inf_norm<T: Scalar>(m: &DMatrix<T>) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|v| v.modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

impl<T: Scalar> HermitianOperator<T> for DenseOperator<T> {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }
    fn apply(&self, x: &Block<T>) -> Block<T> {
        &self.matrix * x
    }
    fn dense(&self) -> Option<DMatrix<T>> {
        Some(self.matrix.clone())
    }
    fn scale(&self) -> f64 {
        self.scale
    }
}

/// Wraps an operator and counts applied columns.
pub struct CountingOperator<O> {
    inner: O,
    columns: AtomicUsize,
    calls: AtomicUsize,
}

impl<O> CountingOperator<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            columns: AtomicUsize::new(0),
            calls: AtomicUsize::new(0),
        }
    }

    /// Number of single-vector applications so far.
    pub fn applications(&self) -> usize {
        self.columns.load(Ordering::Relaxed)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.columns.store(0, Ordering::Relaxed);
        self.calls.store(0, Ordering::Relaxed);
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<T: Scalar, O: HermitianOperator<T>> HermitianOperator<T> for CountingOperator<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn apply(&self, x: &Block<T>) -> Block<T> {
        self.columns.fetch_add(x.ncols(), Ordering::Relaxed);
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.apply(x)
    }
    fn dense(&self) -> Option<DMatrix<T>> {
        self.inner.dense()
    }
    fn scale(&self) -> f64 {
        self.inner.scale()
    }
}

/// A Hermitian positive definite preconditioner `K`.
pub trait Preconditioner<T: Scalar>: Send + Sync {
    fn apply(&self, r: &Block<T>) -> Block<T>;

    /// True when `K = I`; lets the solver skip work and enables diagnostics
    /// that are only defined for the unpreconditioned iteration.
    fn is_identity(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPreconditioner;

impl<T: Scalar> Preconditioner<T> for IdentityPreconditioner {
    fn apply(&self, r: &Block<T>) -> Block<T> {
        r.clone()
    }
    fn is_identity(&self) -> bool {
        true
    }
}

/// Diagonal preconditioner `K = diag(weights)` with positive weights.
#[derive(Debug, Clone)]
pub struct DiagonalPreconditioner {
    weights: Vec<f64>,
}

impl DiagonalPreconditioner {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(LocgError::Config(
                "diagonal preconditioner needs positive finite weights".into(),
            ));
        }
        Ok(Self { weights })
    }

    /// Jacobi preconditioner `K = diag(|a_ii|)^{-1}`. The modulus keeps `K`
    /// positive definite for operators with a negative diagonal.
    pub fn jacobi<T: Scalar>(diagonal: &[T]) -> Result<Self> {
        let weights = diagonal
            .iter()
            .map(|d| {
                let m = d.modulus();
                if m == 0.0 {
                    Err(LocgError::Config("jacobi preconditioner: zero diagonal entry".into()))
                } else {
                    Ok(1.0 / m)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(weights)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl<T: Scalar> Preconditioner<T> for DiagonalPreconditioner {
    fn apply(&self, r: &Block<T>) -> Block<T> {
        let mut out = r.clone();
        for mut col in out.column_iter_mut() {
            for (v, w) in col.iter_mut().zip(&self.weights) {
                *v = v.scale(*w);
            }
        }
        out
    }
}

/// Any Hermitian positive definite operator used as a preconditioner.
pub struct OperatorPreconditioner<O>(pub O);

impl<T: Scalar, O: HermitianOperator<T>> Preconditioner<T> for OperatorPreconditioner<O> {
    fn apply(&self, r: &Block<T>) -> Block<T> {
        self.0.apply(r)
    }
}

/// Diagonal of an operator, extracted from its dense form or by probing.
pub fn operator_diagonal<T: Scalar, O: HermitianOperator<T> + ?Sized>(op: &O) -> Vec<T> {
    if let Some(d) = op.dense() {
        return d.diagonal().iter().copied().collect();
    }
    let n = op.dim();
    (0..n)
        .map(|i| {
            let mut e = Block::<T>::zeros(n, 1);
            e[(i, 0)] = T::one();
            op.apply(&e)[(i, 0)]
        })
        .collect()
}

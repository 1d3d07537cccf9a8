use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;

/// Field the solver runs over: `f64` (real symmetric) or `Complex64` (Hermitian).
pub trait Scalar: ComplexField<RealField = f64> + Copy {
    /// Whether conjugation is the identity.
    const IS_REAL: bool;
}

impl Scalar for f64 {
    const IS_REAL: bool = true;
}

impl Scalar for Complex64 {
    const IS_REAL: bool = false;
}

/// An `n x k` block of column vectors.
pub type Block<T> = DMatrix<T>;

pub(crate) fn is_finite<T: Scalar>(m: &DMatrix<T>) -> bool {
    m.iter().all(|v| v.real().is_finite() && v.imaginary().is_finite())
}

/// Largest entry modulus.
pub fn max_abs<T: Scalar>(m: &DMatrix<T>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.modulus()))
}

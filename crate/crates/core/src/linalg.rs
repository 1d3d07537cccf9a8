//! Block kernels shared by the solver and the verification code.

use nalgebra::DMatrix;

use crate::eig::eigh_symmetrized;
use crate::error::{LocgError, Result};
use crate::operator::HermitianOperator;
use crate::scalar::{is_finite, Block, Scalar};

/// Default relative drop tolerance for orthonormalization.
pub const DEFAULT_DROP_TOL: f64 = 1e-10;

/// Gram matrices with condition above this are treated as rank deficient.
pub const GRAM_CONDITION_LIMIT: f64 = 1e14;

/// Result of a Gram-Schmidt sweep.
#[derive(Debug, Clone)]
pub struct Orthonormalized<T: Scalar> {
    pub basis: Block<T>,
    /// `A * basis`, when an image block was carried along.
    pub image: Option<Block<T>>,
    /// Input columns that survived, in order.
    pub kept: Vec<usize>,
}

impl<T: Scalar> Orthonormalized<T> {
    pub fn rank(&self) -> usize {
        self.kept.len()
    }
}

/// Orthonormal basis of `range(b)` by modified Gram-Schmidt with one full
/// reorthogonalization pass. Returns the basis and its rank.
pub fn orthonormalize<T: Scalar>(b: &Block<T>, drop_tol: f64) -> Result<(Block<T>, usize)> {
    let out = orthonormalize_against(None, b, None, drop_tol)?;
    let rank = out.rank();
    Ok((out.basis, rank))
}

/// Gram-Schmidt of `b` in the orthogonal complement of an orthonormal
/// `prefix`, optionally transforming an image block `image = A b` with the
/// same column operations so that the result satisfies `image' = A basis'`
/// without further operator applications.
///
/// A column is dropped when what is left of it after both passes has norm at
/// most `drop_tol` times its original norm.
pub fn orthonormalize_against<T: Scalar>(
    prefix: Option<(&Block<T>, Option<&Block<T>>)>,
    b: &Block<T>,
    image: Option<&Block<T>>,
    drop_tol: f64,
) -> Result<Orthonormalized<T>> {
    if b.ncols() == 0 {
        return Err(LocgError::EmptyBasis);
    }
    if !(drop_tol > 0.0) {
        return Err(LocgError::Config(format!("drop_tol must be positive, got {drop_tol}")));
    }
    if !is_finite(b) {
        return Err(LocgError::NonFinite("block to orthonormalize"));
    }
    let n = b.nrows();
    if let Some(img) = image {
        if img.shape() != b.shape() {
            return Err(LocgError::Dimension("image block shape differs from block".into()));
        }
    }
    let (pre, pre_img) = match prefix {
        Some((p, pi)) => {
            if p.nrows() != n {
                return Err(LocgError::Dimension("prefix has wrong row count".into()));
            }
            if image.is_some() && pi.is_none() {
                return Err(LocgError::Dimension("prefix image required when carrying an image".into()));
            }
            (Some(p), pi)
        }
        None => (None, None),
    };

    let mut q_cols: Vec<nalgebra::DVector<T>> = Vec::new();
    let mut aq_cols: Vec<nalgebra::DVector<T>> = Vec::new();
    let mut kept = Vec::new();
    for j in 0..b.ncols() {
        let mut v = b.column(j).into_owned();
        let mut av = image.map(|img| img.column(j).into_owned());
        let norm0 = v.norm();
        if norm0 == 0.0 {
            continue;
        }
        for _pass in 0..2 {
            if let Some(p) = pre {
                for (i, pc) in p.column_iter().enumerate() {
                    let c = pc.dotc(&v);
                    v.axpy(-c, &pc, T::one());
                    if let (Some(av), Some(pi)) = (av.as_mut(), pre_img) {
                        av.axpy(-c, &pi.column(i), T::one());
                    }
                }
            }
            for (i, q) in q_cols.iter().enumerate() {
                let c = q.dotc(&v);
                v.axpy(-c, q, T::one());
                if let Some(av) = av.as_mut() {
                    av.axpy(-c, &aq_cols[i], T::one());
                }
            }
        }
        let nu = v.norm();
        if nu <= drop_tol * norm0 {
            continue;
        }
        let inv = T::from_real(1.0 / nu);
        q_cols.push(v * inv);
        if let Some(av) = av {
            aq_cols.push(av * inv);
        }
        kept.push(j);
    }
    if q_cols.is_empty() {
        return Err(LocgError::EmptyBasis);
    }
    let basis = Block::from_columns(&q_cols);
    let image = image.map(|_| Block::from_columns(&aq_cols));
    Ok(Orthonormalized { basis, image, kept })
}

/// `(X^H X)^{-1/2}`, rejecting Gram matrices with condition above
/// [`GRAM_CONDITION_LIMIT`].
pub fn gram_inv_sqrt<T: Scalar>(x: &Block<T>) -> Result<DMatrix<T>> {
    let gram = x.ad_mul(x);
    let (vals, vecs) = eigh_symmetrized(&gram);
    let lo = vals.first().copied().unwrap_or(0.0);
    let hi = vals.last().copied().unwrap_or(0.0);
    if !(lo > 0.0) || hi / lo > GRAM_CONDITION_LIMIT {
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        return Err(LocgError::RankDeficient { condition, limit: GRAM_CONDITION_LIMIT });
    }
    let mut scaled = vecs.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= T::from_real(vals[j].sqrt().recip());
    }
    Ok(scaled * vecs.adjoint())
}

fn hermitian_part<T: Scalar>(m: DMatrix<T>) -> DMatrix<T> {
    (&m + m.adjoint()).scale(0.5)
}

/// `rho(X) = (X^H X)^{-1/2} X^H A X (X^H X)^{-1/2}` from `X` and `AX`.
pub fn rayleigh_quotient_with_image<T: Scalar>(x: &Block<T>, ax: &Block<T>) -> Result<DMatrix<T>> {
    let s = gram_inv_sqrt(x)?;
    Ok(hermitian_part(&s * x.ad_mul(ax) * &s))
}

/// The block Rayleigh quotient `rho(X)`.
pub fn rayleigh_quotient<T: Scalar, O: HermitianOperator<T> + ?Sized>(op: &O, x: &Block<T>) -> Result<DMatrix<T>> {
    check_rows(op.dim(), x)?;
    let ax = op.apply(x);
    rayleigh_quotient_with_image(x, &ax)
}

/// `r(X) = A X S - X S rho(X)` with `S = (X^H X)^{-1/2}`, from `X` and `AX`.
pub fn residual_with_image<T: Scalar>(x: &Block<T>, ax: &Block<T>) -> Result<Block<T>> {
    let s = gram_inv_sqrt(x)?;
    let rho = hermitian_part(&s * x.ad_mul(ax) * &s);
    let r = ax * &s - x * (&s * rho);
    // one projection pass: the closed form leaves X^H r at eps * cond(X)^2
    let g = &s * &s;
    Ok(&r - x * (g * x.ad_mul(&r)))
}

/// The block residual `r(X)`; always satisfies `X^H r(X) = 0`.
pub fn residual<T: Scalar, O: HermitianOperator<T> + ?Sized>(op: &O, x: &Block<T>) -> Result<Block<T>> {
    check_rows(op.dim(), x)?;
    let ax = op.apply(x);
    residual_with_image(x, &ax)
}

/// `(I - X X^H) V` for orthonormal `X`.
pub fn project_out<T: Scalar>(x: &Block<T>, v: &Block<T>) -> Result<Block<T>> {
    if x.nrows() != v.nrows() {
        return Err(LocgError::Dimension(format!(
            "project_out: {} rows vs {} rows",
            x.nrows(),
            v.nrows()
        )));
    }
    Ok(v - x * x.ad_mul(v))
}

/// Column 2-norms.
pub fn column_norms<T: Scalar>(b: &Block<T>) -> Vec<f64> {
    b.column_iter().map(|c| c.norm()).collect()
}

/// `max |X^H X - I|`.
pub fn orthonormality_defect<T: Scalar>(x: &Block<T>) -> f64 {
    let g = x.ad_mul(x);
    let mut worst: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { T::one() } else { T::zero() };
            worst = worst.max((g[(i, j)] - target).modulus());
        }
    }
    worst
}

fn check_rows<T: Scalar>(n: usize, x: &Block<T>) -> Result<()> {
    if x.nrows() != n || x.ncols() == 0 {
        return Err(LocgError::Dimension(format!(
            "block is {}x{}, operator dimension {n}",
            x.nrows(),
            x.ncols()
        )));
    }
    if !is_finite(x) {
        return Err(LocgError::NonFinite("block"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::DenseOperator;
    use crate::scalar::max_abs;
    use nalgebra::DVector;

    fn diag(values: &[f64]) -> DenseOperator<f64> {
        DenseOperator::new(DMatrix::from_diagonal(&DVector::from_vec(values.to_vec()))).unwrap()
    }

    #[test]
    fn identity_columns_kept() {
        let b = DMatrix::<f64>::identity(4, 2);
        let (q, rank) = orthonormalize(&b, 1e-10).unwrap();
        assert_eq!(rank, 2);
        assert_eq!(q, b);
    }

    #[test]
    fn dependent_column_dropped() {
        let mut b = DMatrix::<f64>::zeros(3, 2);
        b[(0, 0)] = 1.0;
        b[(0, 1)] = 2.0;
        let (q, rank) = orthonormalize(&b, 1e-10).unwrap();
        assert_eq!(rank, 1);
        assert_eq!(q.column(0).as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn all_zero_is_empty_basis() {
        let b = DMatrix::<f64>::zeros(3, 2);
        assert_eq!(orthonormalize(&b, 1e-10).unwrap_err(), LocgError::EmptyBasis);
    }

    #[test]
    fn image_follows_basis() {
        let a = DMatrix::from_fn(6, 6, |i, j| 1.0 / (1.0 + i as f64 + j as f64));
        let op = DenseOperator::new(a.clone()).unwrap();
        let b = DMatrix::from_fn(6, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let pre = DMatrix::<f64>::identity(6, 1);
        let out = orthonormalize_against(Some((&pre, Some(&op.apply(&pre)))), &b, Some(&op.apply(&b)), 1e-10).unwrap();
        let img = out.image.unwrap();
        assert!(max_abs(&(img - &a * &out.basis)) < 1e-13);
        assert!(max_abs(&(pre.transpose() * &out.basis)) < 1e-15);
    }

    #[test]
    fn rayleigh_quotient_of_mean_vector() {
        let x = DMatrix::from_element(3, 1, 1.0 / 3f64.sqrt());
        let rho = rayleigh_quotient(&diag(&[1.0, 2.0, 3.0]), &x).unwrap();
        assert!((rho[(0, 0)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn residual_hand_check() {
        // rho = 1.5, r = (1 - 1.5, 2 - 1.5)/sqrt 2
        let x = DMatrix::from_element(2, 1, 1.0 / 2f64.sqrt());
        let r = residual(&diag(&[1.0, 2.0]), &x).unwrap();
        let s = 2f64.sqrt();
        assert!((r[(0, 0)] + 0.5 / s).abs() < 1e-15);
        assert!((r[(1, 0)] - 0.5 / s).abs() < 1e-15);
    }

    #[test]
    fn eigenvector_has_zero_residual() {
        let op = diag(&[1.0, 2.0, 3.0, 4.0]);
        let mut x = DMatrix::<f64>::zeros(4, 2);
        x[(1, 0)] = 1.0;
        x[(3, 1)] = 1.0;
        let r = residual(&op, &x).unwrap();
        assert!(max_abs(&r) <= 1e-12 * 4.0);
        let rho = rayleigh_quotient(&op, &x.columns(0, 1).into_owned()).unwrap();
        assert_eq!(rho[(0, 0)], 2.0);
    }

    #[test]
    fn rank_deficient_rejected() {
        let op = diag(&[1.0, 2.0, 3.0]);
        let mut x = DMatrix::<f64>::zeros(3, 2);
        x[(0, 0)] = 1.0;
        x[(0, 1)] = 1.0;
        assert!(matches!(rayleigh_quotient(&op, &x), Err(LocgError::RankDeficient { .. })));
        assert!(matches!(residual(&op, &x), Err(LocgError::RankDeficient { .. })));
    }

    #[test]
    fn projector_cases() {
        let x = DMatrix::<f64>::identity(4, 2);
        let inside = DMatrix::from_column_slice(4, 1, &[1.0, -2.0, 0.0, 0.0]);
        let outside = DMatrix::from_column_slice(4, 1, &[0.0, 0.0, 3.0, 1.0]);
        assert!(max_abs(&project_out(&x, &inside).unwrap()) == 0.0);
        assert_eq!(project_out(&x, &outside).unwrap(), outside);
    }
}

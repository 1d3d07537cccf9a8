//! Test problems: the 2D Laplacian, the two Haar-conjugated synthetic
//! spectra, random orthonormal starts, and Matrix Market input.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), seeded with
//! `seed_from_u64`, so operators and starts are reproducible across
//! platforms. Problem matrices and start blocks draw from different ChaCha
//! streams of the same seed.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::eig::{laplacian2d_spectrum, spectral_summary, SpectralSummary};
use crate::error::{LocgError, Result};
use crate::mtx;
use crate::operator::{DenseOperator, HermitianOperator};
use crate::scalar::Block;

const STREAM_START: u64 = 1;
const STREAM_CONJUGATION: u64 = 2;

/// Five-point finite-difference Laplacian on an `N x N` grid with zero
/// Dirichlet boundary: diagonal `-4`, neighbor couplings `1`, `n = N^2`.
#[derive(Debug, Clone, Copy)]
pub struct Laplacian2d {
    grid: usize,
}

impl Laplacian2d {
    pub fn new(grid: usize) -> Result<Self> {
        if grid < 2 {
            return Err(LocgError::Config(format!("laplacian2d needs N >= 2, got {grid}")));
        }
        Ok(Self { grid })
    }

    pub fn grid(&self) -> usize {
        self.grid
    }
}

impl HermitianOperator<f64> for Laplacian2d {
    fn dim(&self) -> usize {
        self.grid * self.grid
    }

    fn apply(&self, x: &Block<f64>) -> Block<f64> {
        let g = self.grid;
        let mut y = Block::zeros(x.nrows(), x.ncols());
        for (xc, mut yc) in x.column_iter().zip(y.column_iter_mut()) {
            for j in 0..g {
                for i in 0..g {
                    let p = i + g * j;
                    let mut v = -4.0 * xc[p];
                    if i > 0 {
                        v += xc[p - 1];
                    }
                    if i + 1 < g {
                        v += xc[p + 1];
                    }
                    if j > 0 {
                        v += xc[p - g];
                    }
                    if j + 1 < g {
                        v += xc[p + g];
                    }
                    yc[p] = v;
                }
            }
        }
        y
    }

    fn dense(&self) -> Option<DMatrix<f64>> {
        let n = self.dim();
        if n > crate::eig::DENSE_LIMIT {
            return None;
        }
        Some(self.apply(&DMatrix::identity(n, n)))
    }

    fn scale(&self) -> f64 {
        8.0
    }
}

/// Named problem with generator parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Laplacian2d { grid: usize },
    ClusterOutlier { n: usize, seed: u64 },
    OutlierCluster { n: usize, seed: u64 },
    MatrixFile { path: PathBuf },
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ProblemSpec::Laplacian2d { grid } if *grid < 2 => {
                Err(LocgError::Config(format!("laplacian2d needs N >= 2, got {grid}")))
            }
            ProblemSpec::ClusterOutlier { n, .. } | ProblemSpec::OutlierCluster { n, .. } if *n < 10 => {
                Err(LocgError::Config(format!("synthetic problems need n >= 10, got {n}")))
            }
            _ => Ok(()),
        }
    }

    /// Short label used in file names and reports.
    pub fn label(&self) -> String {
        match self {
            ProblemSpec::Laplacian2d { grid } => format!("laplacian2d_N{grid}"),
            ProblemSpec::ClusterOutlier { n, seed } => format!("cluster_outlier_n{n}_q{seed}"),
            ProblemSpec::OutlierCluster { n, seed } => format!("outlier_cluster_n{n}_q{seed}"),
            ProblemSpec::MatrixFile { path } => format!(
                "matrix_{}",
                path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
            ),
        }
    }

    pub fn build(&self) -> Result<Problem> {
        self.validate()?;
        match self {
            ProblemSpec::Laplacian2d { grid } => laplacian2d(*grid),
            ProblemSpec::ClusterOutlier { n, seed } => cluster_outlier_sized(*n, *seed),
            ProblemSpec::OutlierCluster { n, seed } => outlier_cluster_sized(*n, *seed),
            ProblemSpec::MatrixFile { path } => matrix_file(path),
        }
    }
}

/// An operator together with its exact spectrum when known.
pub struct Problem {
    pub label: String,
    pub operator: Box<dyn HermitianOperator<f64>>,
    /// All eigenvalues ascending, when known analytically or by construction.
    pub spectrum: Option<Vec<f64>>,
}

impl Problem {
    pub fn summary(&self) -> Option<Result<SpectralSummary>> {
        self.spectrum.as_deref().map(spectral_summary)
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem").field("label", &self.label).field("n", &self.dim()).finish()
    }
}

pub fn laplacian2d(grid: usize) -> Result<Problem> {
    let op = Laplacian2d::new(grid)?;
    Ok(Problem {
        label: format!("laplacian2d_N{grid}"),
        operator: Box::new(op),
        spectrum: Some(laplacian2d_spectrum(grid)),
    })
}

fn standard_normal_block(rng: &mut ChaCha8Rng, n: usize, k: usize) -> DMatrix<f64> {
    // column-major fill so the leading columns do not depend on k
    let mut data = Vec::with_capacity(n * k);
    for _ in 0..n * k {
        data.push(StandardNormal.sample(rng));
    }
    DMatrix::from_vec(n, k, data)
}

fn haar_from_gaussian(g: DMatrix<f64>) -> Block<f64> {
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

/// Haar-distributed `n x k` orthonormal block: QR of a Gaussian matrix with
/// `diag(R) > 0`.
pub fn haar_orthonormal(n: usize, k: usize, seed: u64) -> Result<Block<f64>> {
    if k == 0 || k > n {
        return Err(LocgError::Dimension(format!("haar_orthonormal: need 1 <= k <= n, got n={n}, k={k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_START);
    Ok(haar_from_gaussian(standard_normal_block(&mut rng, n, k)))
}

/// Start block: the leading `block_size` columns of an `n x 3` Haar block,
/// so runs with different block sizes and one seed share leading columns.
pub fn start_block(n: usize, block_size: usize, seed: u64) -> Result<Block<f64>> {
    let width = block_size.max(3).min(n);
    let full = haar_orthonormal(n, width, seed)?;
    if block_size > full.ncols() {
        return Err(LocgError::Dimension(format!("start_block: block size {block_size} exceeds n = {n}")));
    }
    Ok(full.columns(0, block_size).into_owned())
}

fn conjugated(values: &[f64], seed: u64) -> Result<DenseOperator<f64>> {
    let n = values.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_CONJUGATION);
    // Flipping a column of Q does not change Q diag Q^T, so sampling the
    // orthogonal group is as good as the special orthogonal one here.
    let q = haar_from_gaussian(standard_normal_block(&mut rng, n, n));
    let mut scaled = q.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= values[j];
    }
    let a = &scaled * q.transpose();
    let a = (&a + a.transpose()) * 0.5;
    DenseOperator::new(a)
}

/// `-1`, then `0, 0.001, ...` (`n - 5` values), then `2^6 .. 2^9`.
pub fn cluster_outlier_values(n: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(n);
    v.push(-1.0);
    v.extend((0..n - 5).map(|j| j as f64 / 1000.0));
    v.extend([64.0, 128.0, 256.0, 512.0]);
    v
}

/// `1`, then `1.1, 1.101, ...` (`n - 1` values).
pub fn outlier_cluster_values(n: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(n);
    v.push(1.0);
    v.extend((0..n - 1).map(|j| (1100 + j) as f64 / 1000.0));
    v
}

fn synthetic(label: String, values: Vec<f64>, seed: u64) -> Result<Problem> {
    let op = conjugated(&values, seed)?;
    let mut spectrum = values;
    spectrum.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(Problem { label, operator: Box::new(op), spectrum: Some(spectrum) })
}

/// Cluster-Outlier with `n = 1000`.
pub fn cluster_outlier(seed: u64) -> Result<Problem> {
    cluster_outlier_sized(1000, seed)
}

/// Outlier-Cluster with `n = 1000`.
pub fn outlier_cluster(seed: u64) -> Result<Problem> {
    outlier_cluster_sized(1000, seed)
}

pub fn cluster_outlier_sized(n: usize, seed: u64) -> Result<Problem> {
    ProblemSpec::ClusterOutlier { n, seed }.validate()?;
    synthetic(format!("cluster_outlier_n{n}_q{seed}"), cluster_outlier_values(n), seed)
}

pub fn outlier_cluster_sized(n: usize, seed: u64) -> Result<Problem> {
    ProblemSpec::OutlierCluster { n, seed }.validate()?;
    synthetic(format!("outlier_cluster_n{n}_q{seed}"), outlier_cluster_values(n), seed)
}

fn matrix_file(path: &Path) -> Result<Problem> {
    let op = mtx::load_matrix_market(path)?;
    let label = ProblemSpec::MatrixFile { path: path.to_path_buf() }.label();
    match op {
        mtx::LoadedMatrix::Real(op) => Ok(Problem { label, operator: Box::new(op), spectrum: None }),
        mtx::LoadedMatrix::Complex(_) => Err(LocgError::MatrixMarket(
            "complex Hermitian matrices are only available through the library API".into(),
        )),
    }
}

/// Dense Haar conjugation exposed for tests of the spectrum-preservation
/// property.
pub fn conjugate_spectrum(values: &[f64], seed: u64) -> Result<DenseOperator<f64>> {
    conjugated(values, seed)
}

/// Column vector helper used by tests and the CLI.
pub fn unit_vector(n: usize, i: usize) -> Block<f64> {
    let mut v = DVector::zeros(n);
    v[i] = 1.0;
    Block::from_columns(&[v])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthonormality_defect;

    #[test]
    fn stencil_on_corner() {
        let op = Laplacian2d::new(2).unwrap();
        let y = op.apply(&unit_vector(4, 0));
        assert_eq!(y.column(0).as_slice(), &[-4.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn value_counts() {
        let co = cluster_outlier_values(1000);
        assert_eq!(co.len(), 1000);
        assert_eq!(co[1], 0.0);
        assert_eq!(co[995], 0.994);
        assert_eq!(co[996], 64.0);
        let oc = outlier_cluster_values(1000);
        assert_eq!(oc.len(), 1000);
        assert_eq!(oc[1], 1.1);
        assert_eq!(oc[999], 2.098);
    }

    #[test]
    fn haar_is_orthonormal_and_seeded() {
        let a = haar_orthonormal(40, 3, 1).unwrap();
        let b = haar_orthonormal(40, 3, 2).unwrap();
        assert!(orthonormality_defect(&a) < 1e-12);
        assert!(crate::scalar::max_abs(&(&a - &b)) > 1e-3);
        assert_eq!(a, haar_orthonormal(40, 3, 1).unwrap());
    }

    #[test]
    fn haar_square_has_unit_determinant() {
        let q = haar_orthonormal(3, 3, 7).unwrap();
        assert!((q.determinant().abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn starts_share_leading_columns() {
        let one = start_block(30, 1, 5).unwrap();
        let three = start_block(30, 3, 5).unwrap();
        assert_eq!(one.column(0), three.column(0));
    }

    #[test]
    fn spec_validation() {
        assert!(ProblemSpec::Laplacian2d { grid: 1 }.build().is_err());
        assert!(ProblemSpec::OutlierCluster { n: 9, seed: 0 }.build().is_err());
    }
}

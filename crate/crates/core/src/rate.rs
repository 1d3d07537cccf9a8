//! Convergence-rate theory as runtime diagnostics: Chebyshev constants, the
//! rate functions `chi`, `omega`, `chi1`, and the history-alignment
//! coefficients `gamma_j` that feed `sigma`.

use nalgebra::{DMatrix, DVector};

use crate::eig::{eigh_symmetrized, SpectralSummary};
use crate::error::{LocgError, Result};
use crate::scalar::{Block, Scalar};
use crate::trace::ConvergenceTrace;

/// First-kind Chebyshev polynomial `T_m(t)` for `|t| >= 1`.
pub fn chebyshev_t(m: u32, t: f64) -> Result<f64> {
    if !(t.abs() >= 1.0) {
        return Err(LocgError::ChebyshevDomain(t));
    }
    if m == 0 {
        return Ok(1.0);
    }
    let v = (m as f64 * t.abs().acosh()).cosh();
    Ok(if t < 0.0 && m % 2 == 1 { -v } else { v })
}

/// `C = T_{m_e}(1/Delta)^{-2}`; zero for `kappa = 1`, where one extended step is exact.
pub fn bound_c(summary: &SpectralSummary, m_e: u32) -> Result<f64> {
    if summary.kappa <= 1.0 || summary.delta <= 0.0 {
        return Ok(0.0);
    }
    let t = chebyshev_t(m_e, 1.0 / summary.delta)?;
    Ok(1.0 / (t * t))
}

/// `chi(sigma, C) = C^2 / (1 + (1 - C)(2 sigma - 1 + 2 sqrt(sigma (sigma + C))))`.
pub fn chi(sigma: f64, c: f64) -> f64 {
    c * c / (1.0 + (1.0 - c) * (2.0 * sigma - 1.0 + 2.0 * (sigma * (sigma + c)).sqrt()))
}

/// `omega(sigma, C) = C / (1 + (1 - C) sqrt(sigma / (sigma + C)))`.
pub fn omega(sigma: f64, c: f64) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    c / (1.0 + (1.0 - c) * (sigma / (sigma + c)).sqrt())
}

/// `chi(1, C)^floor((1 + m_h) / 2) * C^((1 + m_h) mod 2)`.
pub fn chi1(c: f64, m_h: u32) -> f64 {
    let span = 1 + m_h;
    chi(1.0, c).powi((span / 2) as i32) * c.powi((span % 2) as i32)
}

/// Rate constants for one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBound {
    pub kappa: f64,
    pub delta: f64,
    pub m_e: u32,
    pub m_h: u32,
    pub c_cheb: f64,
    /// `0` when `m_h = 0`.
    pub sigma: f64,
    /// `(1 + m_h)`-step rate; `C^2` for `m_h = 0`.
    pub chi: f64,
    /// One-step rate; `C` for `m_h = 0`.
    pub omega: f64,
    pub chi1: f64,
    pub step_span: u32,
}

impl RateBound {
    pub fn new(summary: &SpectralSummary, m_e: u32, m_h: u32, sigma: f64) -> Result<Self> {
        let c = bound_c(summary, m_e)?;
        let (sigma, chi_v, omega_v) = if m_h == 0 {
            (0.0, c * c, c)
        } else {
            if !(sigma >= 1.0) {
                return Err(LocgError::Config(format!("sigma must be >= 1 when m_h >= 1, got {sigma}")));
            }
            (sigma, chi(sigma, c), omega(sigma, c))
        };
        Ok(Self {
            kappa: summary.kappa,
            delta: summary.delta,
            m_e,
            m_h,
            c_cheb: c,
            sigma,
            chi: chi_v,
            omega: omega_v,
            chi1: chi1(c, m_h),
            step_span: m_h + 1,
        })
    }

    /// Averaged per-step factor compared against `eps_k / eps_{k-1}`.
    pub fn per_step(&self) -> f64 {
        per_step_bound(self.c_cheb, self.m_h, self.sigma)
    }

    /// Bound on `eps_{k+1} / eps_{k-m_h}`.
    pub fn span(&self) -> f64 {
        span_bound(self.c_cheb, self.m_h, self.sigma)
    }
}

fn per_step_bound(c: f64, m_h: u32, sigma: f64) -> f64 {
    if m_h == 0 {
        c
    } else {
        chi(sigma.max(1.0), c).sqrt()
    }
}

fn span_bound(c: f64, m_h: u32, sigma: f64) -> f64 {
    if m_h == 0 {
        c
    } else {
        chi(sigma.max(1.0), c).min(chi1(c, m_h))
    }
}

fn gammas_against<T: Scalar>(residuals: &[DVector<T>], probe: &DVector<T>) -> Result<Vec<T>> {
    let rk = residuals.first().ok_or(LocgError::ZeroResidual("no residuals given"))?;
    let denom = rk.norm_squared();
    if !(denom > 0.0) {
        return Err(LocgError::ZeroResidual("r_k = 0"));
    }
    if residuals.iter().any(|r| r.len() != rk.len()) || probe.len() != rk.len() {
        return Err(LocgError::Dimension("residual history lengths differ".into()));
    }
    let inv = T::from_real(denom.recip());
    Ok(residuals
        .windows(2)
        .map(|w| (&w[1] - &w[0]).dotc(probe) * inv)
        .collect())
}

/// `gamma_j = (r_{k-j} - r_{k-j+1})^H r_k / ||r_k||^2` for `j = 1..`.
///
/// `residuals[0]` is `r_k`, `residuals[j]` is `r_{k-j}`; the result has one
/// entry fewer than the input.
pub fn gamma_history<T: Scalar>(residuals: &[DVector<T>]) -> Result<Vec<T>> {
    let rk = residuals.first().ok_or(LocgError::ZeroResidual("no residuals given"))?;
    gammas_against(residuals, rk)
}

/// Same as [`gamma_history`] with `q_k` in the numerator.
pub fn gamma_tilde_history<T: Scalar>(residuals: &[DVector<T>], q: &DVector<T>) -> Result<Vec<T>> {
    gammas_against(residuals, q)
}

/// `sigma = (1 + sum_j |gamma_j|)^2` over `gamma_2, gamma_3, ...`.
pub fn sigma_scalar<T: Scalar>(gammas_from_second: &[T]) -> f64 {
    let s: f64 = gammas_from_second.iter().map(|g| g.modulus()).sum();
    (1.0 + s).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaVariant {
    /// `m_h = 0`: reported as `0`.
    NoHistory,
    ScalarHistory,
    ExtendedHistory,
    BlockFirstColumn,
}

impl SigmaVariant {
    pub fn label(self) -> &'static str {
        match self {
            SigmaVariant::NoHistory => "none",
            SigmaVariant::ScalarHistory => "scalar",
            SigmaVariant::ExtendedHistory => "extended",
            SigmaVariant::BlockFirstColumn => "block",
        }
    }
}

/// Terms of the first-column block diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockTerms {
    pub tau_sq: f64,
    pub gamma_sq_full: f64,
    pub gamma_sq_shrink: f64,
    pub phi2_psi22_phi2: f64,
    pub m_min_eig: f64,
    pub m_condition: f64,
    /// `||h_k|| / sqrt(delta_{k-1,1})`.
    pub h_scaled: f64,
    /// The projected shifted residual Gram matrix needed a pseudo-inverse.
    pub g_rank_deficient: bool,
    /// `M_k` not positive definite or `tau^2` outside `[0, 1)`.
    pub precondition_violated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaDiagnostic {
    /// Index of the step (`k`) the coefficients describe.
    pub iter: usize,
    /// Real parts of `gamma_1, gamma_2, ...` (scalar variants only).
    pub gammas: Vec<f64>,
    pub sigma: f64,
    pub variant: SigmaVariant,
    /// `|gamma_1 + 1| > 1e-6`: residual orthogonality has been lost.
    pub gamma1_warning: bool,
    pub block: Option<BlockTerms>,
}

impl SigmaDiagnostic {
    pub fn no_history(iter: usize) -> Self {
        Self { iter, gammas: Vec::new(), sigma: 0.0, variant: SigmaVariant::NoHistory, gamma1_warning: false, block: None }
    }

    /// From `gamma_1, gamma_2, ...`; `gamma_1` only feeds the warning.
    pub fn scalar<T: Scalar>(iter: usize, gammas: &[T], variant: SigmaVariant) -> Self {
        let gamma1_warning = gammas.first().is_some_and(|g| (*g + T::one()).modulus() > 1e-6);
        let sigma = sigma_scalar(gammas.get(1..).unwrap_or(&[]));
        Self {
            iter,
            gammas: gammas.iter().map(|g| g.real()).collect(),
            sigma,
            variant,
            gamma1_warning,
            block: None,
        }
    }
}

/// Step data for [`block_gamma_first`].
pub struct BlockGammaInput<'a, T: Scalar> {
    pub x: &'a Block<T>,
    pub x_prev: &'a Block<T>,
    pub r: &'a Block<T>,
    /// `A R_k`.
    pub ar: &'a Block<T>,
    pub rho: &'a [f64],
    pub rho_prev: &'a [f64],
    /// `rho_{k+1,1}`.
    pub rho_next_first: f64,
}

/// Inverse of a small Hermitian matrix through its eigen-decomposition,
/// dropping eigenvalues below `rel_tol * max|eig|`.
fn hermitian_pinv<T: Scalar>(m: &DMatrix<T>, rel_tol: f64) -> (DMatrix<T>, bool, f64, f64) {
    let (vals, vecs) = eigh_symmetrized(m);
    let big = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut deficient = false;
    let mut scaled = vecs.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        let v = vals[j];
        if v.abs() <= rel_tol * big || big == 0.0 {
            deficient = true;
            col.fill(T::zero());
        } else {
            col *= T::from_real(v.recip());
        }
    }
    let lo = vals.first().copied().unwrap_or(0.0);
    let hi = vals.last().copied().unwrap_or(0.0);
    (scaled * vecs.adjoint(), deficient, lo, hi)
}

fn diag<T: Scalar>(v: &[f64]) -> DMatrix<T> {
    DMatrix::from_diagonal(&DVector::from_iterator(v.len(), v.iter().map(|&x| T::from_real(x))))
}

/// `gamma_{k,(1)}^2` for LOCG(n_b, 1, 1) in both the full and the shrunken
/// form, with `sigma_(1) = 1 + gamma^2` taken from the shrunken one.
///
/// Returns `Ok(None)` when the diagnostic is undefined (stagnated first
/// column, zero residual, or nonpositive gaps).
pub fn block_gamma_first<T: Scalar>(iter: usize, inp: &BlockGammaInput<'_, T>) -> Result<Option<SigmaDiagnostic>> {
    let nb = inp.x.ncols();
    if nb < 2 {
        return Err(LocgError::Dimension("block_gamma_first needs n_b >= 2".into()));
    }
    if inp.x_prev.shape() != inp.x.shape() || inp.r.shape() != inp.x.shape() || inp.ar.shape() != inp.x.shape() {
        return Err(LocgError::Dimension("block_gamma_first: block shapes differ".into()));
    }
    if inp.rho.len() != nb || inp.rho_prev.len() != nb {
        return Err(LocgError::Dimension("block_gamma_first: Ritz value counts differ".into()));
    }
    let delta1 = inp.rho_prev[0] - inp.rho[0];
    if !(delta1 > 1e-300) {
        return Ok(None);
    }
    let m = nb - 1;
    let e: Vec<f64> = inp.rho[1..].iter().map(|r| r - inp.rho_next_first).collect();
    if e.iter().any(|v| !(*v > 0.0)) {
        return Ok(None);
    }
    let dprev: Vec<f64> = (1..nb).map(|i| inp.rho_prev[i] - inp.rho[i]).collect();

    // Gamma = X_k^H X_{k-1}, with column phases making its diagonal positive
    let mut gamma = inp.x.ad_mul(inp.x_prev);
    for j in 0..nb {
        let d = gamma[(j, j)];
        let a = d.modulus();
        if a > 0.0 {
            let phase = d.conjugate() * T::from_real(a.recip());
            let mut col = gamma.column_mut(j);
            col *= phase;
        }
    }
    let h = gamma.view((1, 0), (m, 1)).into_owned();
    let hh = gamma.view((1, 1), (m, m)).into_owned();

    let e_inv: Vec<f64> = e.iter().map(|v| v.recip()).collect();
    let tail: Vec<f64> = (0..m).map(|i| dprev[i] / (e[i] * (e[i] + dprev[i]))).collect();
    let mk = diag::<T>(&e_inv) - &hh * diag::<T>(&e_inv) * hh.adjoint() + diag::<T>(&tail);
    let mk = (&mk + mk.adjoint()).scale(0.5);
    let (mk_inv, _, m_lo, m_hi) = hermitian_pinv(&mk, 1e-14);
    let m_condition = if m_lo > 0.0 { m_hi / m_lo } else { f64::INFINITY };
    let tau_sq = (h.ad_mul(&(&mk_inv * &h)))[(0, 0)].real() / delta1;

    let r1 = inp.r.column(0).into_owned();
    let ar1 = inp.ar.column(0).into_owned();
    let rr = r1.norm_squared();
    if !(rr > 0.0) {
        return Ok(None);
    }
    let r2 = inp.r.columns(1, m).into_owned();
    let ar2 = inp.ar.columns(1, m).into_owned();
    let coef = r1.ad_mul(&r2) * T::from_real(rr.recip());
    let rperp = &r2 - &r1 * &coef;
    let arperp = &ar2 - &ar1 * &coef;
    let gram = rperp.ad_mul(&rperp);
    let g = rperp.ad_mul(&arperp) - &gram * T::from_real(inp.rho_next_first);
    let g = (&g + g.adjoint()).scale(0.5);
    let (g_inv, g_rank_deficient, _, _) = hermitian_pinv(&g, 1e-12);

    let einv = diag::<T>(&e_inv);
    let psi = &einv * &gram * &g_inv * &gram * &einv;
    let v = &ar1 - &r1 * T::from_real(inp.rho[0]);
    let inv_rr = T::from_real(rr.recip());
    let phi1 = &einv * (r2.ad_mul(&r1) - &gram * &g_inv * rperp.ad_mul(&v)) * inv_rr;
    let pv = rperp.ad_mul(&v) * inv_rr;
    let phi2_psi22_phi2 = pv.ad_mul(&(&g_inv * &pv))[(0, 0)].real();

    let inv_delta = T::from_real(delta1.recip());
    let u = &h * inv_delta + phi1;
    let full = &mk - (&h * h.adjoint()) * inv_delta - psi;
    let full = (&full + full.adjoint()).scale(0.5);
    let (full_inv, _, _, _) = hermitian_pinv(&full, 1e-14);
    let gamma_sq_full = delta1 * (u.ad_mul(&(&full_inv * &u))[(0, 0)].real() + phi2_psi22_phi2);
    let gamma_sq_shrink = tau_sq / (1.0 - tau_sq) + delta1 * phi2_psi22_phi2;

    let precondition_violated = m_lo < -1e-10 * m_hi.abs().max(1.0) || !(0.0..1.0).contains(&tau_sq);
    let terms = BlockTerms {
        tau_sq,
        gamma_sq_full,
        gamma_sq_shrink,
        phi2_psi22_phi2,
        m_min_eig: m_lo,
        m_condition,
        h_scaled: h.norm() / delta1.sqrt(),
        g_rank_deficient,
        precondition_violated,
    };
    Ok(Some(SigmaDiagnostic {
        iter,
        gammas: Vec::new(),
        sigma: 1.0 + gamma_sq_shrink,
        variant: SigmaVariant::BlockFirstColumn,
        gamma1_warning: false,
        block: Some(terms),
    }))
}

/// One row of [`rate_report`], for the step producing iterate `iter`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub iter: usize,
    /// `eps_k = rho_{k,1} - lambda_1`.
    pub err: f64,
    /// `eps_k / eps_{k-1}`.
    pub ratio: f64,
    /// `sqrt(chi(sigma, C))`, or `C` without history.
    pub bound: f64,
    pub ratio_vs_bound: f64,
    /// `eps_k / eps_{k-1-m_h}`, when far enough into the run.
    pub span_ratio: Option<f64>,
    /// `min(chi(sigma, C), chi1(C))`, or `C` without history.
    pub span_bound: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub c_cheb: f64,
    pub rows: Vec<RateRow>,
    /// Iterations in the second half that sat on the roundoff floor.
    pub excluded: usize,
}

impl RateReport {
    pub fn median_ratio_vs_bound(&self) -> Option<f64> {
        median(self.rows.iter().map(|r| r.ratio_vs_bound).collect())
    }

    pub fn geometric_mean_span_ratio(&self) -> Option<f64> {
        let logs: Vec<f64> = self.rows.iter().filter_map(|r| r.span_ratio).map(f64::ln).collect();
        if logs.is_empty() {
            return None;
        }
        Some((logs.iter().sum::<f64>() / logs.len() as f64).exp())
    }
}

pub fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Observed versus predicted contraction of the smallest Ritz value over the
/// second half of the run.
pub fn rate_report(trace: &ConvergenceTrace, summary: &SpectralSummary, m_e: u32, m_h: u32) -> Result<RateReport> {
    let c = bound_c(summary, m_e)?;
    let lambda = summary.lambda_1;
    let floor = 1e2 * f64::EPSILON * lambda.abs().max(f64::MIN_POSITIVE);
    let errs: Vec<f64> = trace.ritz_sequence(0).iter().map(|r| r - lambda).collect();
    let n = trace.records.len();
    let mut rows = Vec::new();
    let mut excluded = 0;
    for i in n / 2..n {
        let rec = &trace.records[i];
        let (now, before) = (errs[i + 1], errs[i]);
        if now < floor || before < floor {
            excluded += 1;
            continue;
        }
        let sigma = rec.sigma.as_ref().map(|s| s.sigma).unwrap_or(if m_h == 0 { 0.0 } else { 1.0 });
        let bound = per_step_bound(c, m_h, sigma);
        let ratio = now / before;
        let span = m_h as usize;
        let span_ratio = (i >= span && errs[i - span] >= floor).then(|| now / errs[i - span]);
        rows.push(RateRow {
            iter: rec.iter,
            err: now,
            ratio,
            bound,
            ratio_vs_bound: ratio / bound,
            span_ratio,
            span_bound: span_bound(c, m_h, sigma),
            sigma,
        });
    }
    Ok(RateReport { c_cheb: c, rows, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;

    // the rational forms as first written, kept here as oracles
    fn chi_raw(s: f64, c: f64) -> f64 {
        let q = 2.0 * (s * (s + c)).sqrt();
        (2.0 * s + c - q) / (2.0 * s + 1.0 - q)
    }

    fn omega_raw(s: f64, c: f64) -> f64 {
        (s + c - (1.0 - c) * (s * (s + c)).sqrt()) / (1.0 + s * (2.0 - c))
    }

    fn chebyshev_rec(m: u32, t: f64) -> f64 {
        let (mut a, mut b) = (1.0, t);
        if m == 0 {
            return a;
        }
        for _ in 1..m {
            let c = 2.0 * t * b - a;
            a = b;
            b = c;
        }
        b
    }

    #[test]
    fn chebyshev_basics() {
        assert_eq!(chebyshev_t(1, 3.7).unwrap(), 3.7);
        assert_eq!(chebyshev_t(0, -5.0).unwrap(), 1.0);
        assert!(matches!(chebyshev_t(2, 0.5), Err(LocgError::ChebyshevDomain(_))));
        for m in 0..=8 {
            for t in [1.0, 1.2, 3.0, 77.0, 1e4, -1.0, -2.5] {
                let a = chebyshev_t(m, t).unwrap();
                let b = chebyshev_rec(m, t);
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "m={m} t={t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn chebyshev_outlier_cluster() {
        let delta = 9.98 / 11.98;
        let t = 1.0 / delta;
        let t2 = chebyshev_t(2, t).unwrap();
        assert!((t2 - (2.0 * t * t - 1.0)).abs() < 1e-13);
        assert!((1.0 / (t2 * t2) - 0.2824).abs() < 5e-5);
    }

    #[test]
    fn chi_known_values() {
        assert_eq!(chi(3.0, 0.0), 0.0);
        assert!((chi(1.0, 0.5) - 0.0917517).abs() < 1e-7);
        assert!((chi_raw(1.0, 0.5) - 0.0917517).abs() < 1e-7);
        for c in [0.1, 0.5, 0.9] {
            assert!(chi(1.0, c) < (c / (2.0 - c)).powi(2));
        }
    }

    #[test]
    fn omega_known_values() {
        assert_eq!(omega(2.0, 0.0), 0.0);
        let independent = 0.5 / (1.0 + 0.5 * 1.5f64.powf(-0.5));
        assert!((omega(1.0, 0.5) - independent).abs() < 1e-15);
        assert!((omega(1.0, 0.5) - 0.3550510).abs() < 1e-7);
        for c in [0.1, 0.5, 0.9] {
            assert!(omega(1.0, c) < c);
        }
    }

    #[test]
    fn forms_agree_on_grid() {
        for s in [1.0, 1.5, 4.0, 25.0] {
            for c in [0.01, 0.5, 0.99] {
                let (a, b) = (chi(s, c), chi_raw(s, c));
                // both raw differences cancel: numerator for small C, denominator for large sigma
                let q = 2.0 * (s * (s + c)).sqrt();
                let loss = (2.0 * s + c) / (2.0 * s + c - q) + (2.0 * s + 1.0) / (2.0 * s + 1.0 - q);
                assert!((a - b).abs() <= 1e-14 * loss * a, "chi {s} {c}");
                let (a, b) = (omega(s, c), omega_raw(s, c));
                assert!((a - b).abs() <= 1e-12 * a, "omega {s} {c}");
            }
        }
    }

    #[test]
    fn chi1_values() {
        assert_eq!(chi1(0.3, 1), chi(1.0, 0.3));
        assert!((chi1(0.5, 2) - 0.0458758).abs() < 1e-7);
        assert_eq!(chi1(0.4, 0), 0.4);
    }

    #[test]
    fn gamma_synthetic() {
        let e = |i: usize| {
            let mut v = DVector::<f64>::zeros(3);
            v[i] = 1.0;
            v
        };
        let rk = e(0);
        let r1 = e(1);
        let r2 = e(1) + e(0) * 0.3;
        let g = gamma_history(&[rk.clone(), r1.clone(), r2]).unwrap();
        assert!((g[0] + 1.0).abs() < 1e-15);
        assert!((g[1] - 0.3).abs() < 1e-15);
        let g = gamma_history(&[rk.clone(), r1.clone(), r1.clone()]).unwrap();
        assert_eq!(g[1], 0.0);
        assert!(gamma_history(&[DVector::<f64>::zeros(3), r1]).is_err());
    }

    #[test]
    fn gamma_tilde_reduces() {
        let rk = DVector::from_vec(vec![1.0, 0.5, 0.0, 0.0]);
        let r1 = DVector::from_vec(vec![0.0, 0.0, 1.0, 0.2]);
        let r2 = DVector::from_vec(vec![0.3, -1.0, 0.4, 0.0]);
        let hist = [rk.clone(), r1.clone(), r2.clone()];
        assert_eq!(gamma_tilde_history(&hist, &rk).unwrap(), gamma_history(&hist).unwrap());
        let w = DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0]);
        let q = &rk + &w * 0.7;
        let g = gamma_tilde_history(&hist, &q).unwrap();
        let nr = rk.norm_squared();
        let direct: Vec<f64> = vec![(&r1 - &rk).dot(&q) / nr, (&r2 - &r1).dot(&q) / nr];
        assert!((g[0] - direct[0]).abs() < 1e-15 && (g[1] - direct[1]).abs() < 1e-15);
    }

    #[test]
    fn sigma_values() {
        assert_eq!(sigma_scalar::<f64>(&[]), 1.0);
        assert!((sigma_scalar(&[0.3, -0.2]) - 2.25).abs() < 1e-15);
        let d = SigmaDiagnostic::scalar(3, &[-1.0, 0.3], SigmaVariant::ScalarHistory);
        assert!(!d.gamma1_warning);
        assert!((d.sigma - 1.69).abs() < 1e-15);
        assert!(SigmaDiagnostic::scalar(3, &[-0.9], SigmaVariant::ScalarHistory).gamma1_warning);
    }

    #[test]
    fn rate_bound_fields() {
        let s = crate::eig::spectral_summary(&crate::problems::outlier_cluster_values(1000)).unwrap();
        let b = RateBound::new(&s, 1, 1, 1.0).unwrap();
        assert!((b.c_cheb - 0.6940).abs() < 5e-5);
        assert_eq!(b.chi, b.chi1);
        assert!(b.omega < b.c_cheb);
        assert!(RateBound::new(&s, 1, 1, 0.5).is_err());
        let sd = RateBound::new(&s, 2, 0, 7.0).unwrap();
        assert_eq!(sd.sigma, 0.0);
        assert_eq!(sd.per_step(), sd.c_cheb);
    }

    #[test]
    fn block_gamma_stagnated_is_unavailable() {
        let x = Block::<f64>::identity(4, 2);
        let r = Block::<f64>::zeros(4, 2);
        let inp = BlockGammaInput { x: &x, x_prev: &x, r: &r, ar: &r, rho: &[1.0, 2.0], rho_prev: &[1.0, 2.0], rho_next_first: 1.0 };
        assert_eq!(block_gamma_first(0, &inp).unwrap(), None);
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(vec![]), None);
    }
}

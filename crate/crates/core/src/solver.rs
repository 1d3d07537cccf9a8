//! The LOCG(n_b, m_e, m_h) iteration.
//!
//! Each step builds an orthonormal basis `Z` of
//! `K_{m_e}(K A, X_k) + R([X_{k-1}, ..., X_{k-m_h}])`, runs Rayleigh-Ritz on
//! it and keeps the `n_b` smallest Ritz pairs.
//!
//! Images `A Z` are carried through Gram-Schmidt, so a step costs exactly
//! `(m_e + 1)` applications per active column: one for each Krylov block and
//! one fresh `A X_{k+1}`. History enters as the implicit directions
//! `P_{k+1} = X_{k+1} - X_k Y_x` (the part of the new iterate outside
//! `R(X_k)`), which span the same space as the raw past blocks together with
//! `X_{k+1}` but stay well conditioned as the iteration converges. Their
//! images are combinations of columns of `A Z` and cost nothing.
//!
//! Converged columns are soft-locked: frozen, kept as an orthogonality prefix
//! of `Z`, and excluded from the Krylov and history blocks.

use std::collections::VecDeque;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::eig::eigh_symmetrized;
use crate::error::{LocgError, Result};
use crate::linalg::{column_norms, gram_inv_sqrt, orthonormality_defect, orthonormalize_against, DEFAULT_DROP_TOL};
use crate::operator::{HermitianOperator, Preconditioner};
use crate::rate::{block_gamma_first, gamma_history, gamma_tilde_history, BlockGammaInput, SigmaDiagnostic, SigmaVariant};
use crate::scalar::{is_finite, max_abs, Block, Scalar};
use crate::trace::{ConvergenceTrace, InitialRecord, IterationRecord, Outcome};

/// Projected matrices less symmetric than this signal nonreal Ritz values.
pub const NONREAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// `n_b`
    pub block_size: usize,
    /// `m_e`
    pub krylov_degree: usize,
    /// `m_h`; zero gives steepest descent and its Krylov-extended variants.
    pub history_depth: usize,
    pub max_iter: usize,
    pub stop_rel: f64,
    pub drop_tol: f64,
    /// Columns with `||r|| <= residual_tol * scale` are locked.
    pub residual_tol: f64,
    /// Leading columns that must stagnate or lock before the solve stops
    /// (all `n_b` when `None`).
    pub target_count: Option<usize>,
}

impl SolverConfig {
    pub fn new(block_size: usize, krylov_degree: usize, history_depth: usize) -> Self {
        Self {
            block_size,
            krylov_degree,
            history_depth,
            max_iter: 1000,
            stop_rel: 1e-15,
            drop_tol: DEFAULT_DROP_TOL,
            residual_tol: 1e-12,
            target_count: None,
        }
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_target_count(mut self, count: usize) -> Self {
        self.target_count = Some(count);
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |m: String| Err(LocgError::Config(m));
        if self.block_size == 0 {
            return bad("block size must be at least 1".into());
        }
        if self.krylov_degree == 0 {
            return bad("krylov degree must be at least 1".into());
        }
        let width = self.block_size * (self.krylov_degree + 1 + self.history_depth);
        if width > n {
            return bad(format!(
                "search subspace n_b(m_e + 1 + m_h) = {width} exceeds the dimension {n}"
            ));
        }
        if !(self.stop_rel > 0.0) {
            return bad(format!("stop_rel must be positive, got {}", self.stop_rel));
        }
        if !(self.drop_tol > 0.0) || !(self.residual_tol >= 0.0) {
            return bad("drop_tol must be positive and residual_tol nonnegative".into());
        }
        if let Some(t) = self.target_count {
            if t == 0 || t > self.block_size {
                return bad(format!("target count {t} outside 1..={}", self.block_size));
            }
        }
        Ok(())
    }

    fn targets(&self) -> usize {
        self.target_count.unwrap_or(self.block_size)
    }
}

/// A momentum block and its image.
#[derive(Debug, Clone)]
pub struct HistoryEntry<T: Scalar> {
    pub dir: Block<T>,
    pub image: Block<T>,
}

/// Iterate `X_k` with everything the next step needs. Columns are kept in
/// ascending Ritz order, locked ones included.
#[derive(Debug, Clone)]
pub struct SolverState<T: Scalar> {
    pub iter: usize,
    pub x: Block<T>,
    pub ax: Block<T>,
    pub rho: Vec<f64>,
    pub r: Block<T>,
    pub locked: Vec<bool>,
    /// Momentum directions, most recent first, at most `m_h` entries.
    pub history: VecDeque<HistoryEntry<T>>,
    /// `X_{k-1}, X_{k-2}, ...` for diagnostics.
    pub past_x: VecDeque<Block<T>>,
    /// `R_{k-1}, R_{k-2}, ...` for diagnostics.
    pub past_r: VecDeque<Block<T>>,
    pub past_rho: VecDeque<Vec<f64>>,
}

fn diag_real<T: Scalar>(v: &[f64]) -> DMatrix<T> {
    DMatrix::from_diagonal(&DVector::from_iterator(v.len(), v.iter().map(|&x| T::from_real(x))))
}

fn select<T: Scalar>(b: &Block<T>, cols: &[usize]) -> Block<T> {
    b.select_columns(cols.iter())
}

fn hcat<T: Scalar>(blocks: &[&Block<T>]) -> Block<T> {
    let n = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Block::zeros(n, cols);
    let mut at = 0;
    for b in blocks {
        out.columns_mut(at, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    out
}

/// Rotates `x` onto the Ritz vectors of `R(x)` using the image `ax`.
fn tidy<T: Scalar>(x: &Block<T>, ax: &Block<T>) -> (Block<T>, Block<T>, Vec<f64>, DMatrix<T>) {
    let g = x.ad_mul(ax);
    let (vals, w) = eigh_symmetrized(&g);
    (x * &w, ax * &w, vals, w)
}

impl<T: Scalar> SolverState<T> {
    /// Starts from `x0`, which is orthonormalized first if needed and then
    /// rotated onto its Ritz vectors. Costs `n_b` applications.
    pub fn new<O: HermitianOperator<T> + ?Sized>(op: &O, x0: &Block<T>, cfg: &SolverConfig) -> Result<Self> {
        let n = op.dim();
        cfg.validate(n)?;
        if x0.nrows() != n || x0.ncols() != cfg.block_size {
            return Err(LocgError::Dimension(format!(
                "start block is {}x{}, expected {n}x{}",
                x0.nrows(),
                x0.ncols(),
                cfg.block_size
            )));
        }
        if !is_finite(x0) {
            return Err(LocgError::NonFinite("start block"));
        }
        let x = if orthonormality_defect(x0) > 1e-12 { x0 * gram_inv_sqrt(x0)? } else { x0.clone() };
        let ax = op.apply(&x);
        let (x, ax, rho, _) = tidy(&x, &ax);
        let r = &ax - &x * diag_real::<T>(&rho);
        let lock_at = cfg.residual_tol * op.scale();
        let locked = column_norms(&r).iter().map(|&v| v <= lock_at).collect();
        Ok(Self {
            iter: 0,
            x,
            ax,
            rho,
            r,
            locked,
            history: VecDeque::new(),
            past_x: VecDeque::new(),
            past_r: VecDeque::new(),
            past_rho: VecDeque::new(),
        })
    }

    pub fn active(&self) -> Vec<usize> {
        (0..self.locked.len()).filter(|&j| !self.locked[j]).collect()
    }

    pub fn residual_norms(&self) -> Vec<f64> {
        column_norms(&self.r)
    }
}

/// Search subspace of one step together with its image.
struct Subspace<T: Scalar> {
    z: Block<T>,
    az: Block<T>,
    /// Leading columns of `z` that came from the active part of `X_k`.
    x_group: usize,
    krylov: Vec<Block<T>>,
    krylov_images: Vec<Block<T>>,
    applications: usize,
}

fn assemble<T: Scalar, O, K>(op: &O, k: &K, state: &SolverState<T>, cfg: &SolverConfig) -> Result<Subspace<T>>
where
    O: HermitianOperator<T> + ?Sized,
    K: Preconditioner<T> + ?Sized,
{
    let active = state.active();
    let locked: Vec<usize> = (0..state.locked.len()).filter(|&j| state.locked[j]).collect();
    let xa = select(&state.x, &active);
    let axa = select(&state.ax, &active);
    let ra = select(&state.r, &active);
    let rho_a: Vec<f64> = active.iter().map(|&j| state.rho[j]).collect();
    let shift = diag_real::<T>(&rho_a);

    let mut krylov = Vec::with_capacity(cfg.krylov_degree);
    let mut krylov_images = Vec::with_capacity(cfg.krylov_degree);
    let mut applications = 0;
    let mut s = k.apply(&ra);
    for t in 0..cfg.krylov_degree {
        let as_ = op.apply(&s);
        applications += s.ncols();
        let next = (t + 1 < cfg.krylov_degree).then(|| k.apply(&(&as_ - &s * &shift)));
        krylov.push(s);
        krylov_images.push(as_);
        match next {
            Some(v) => s = v,
            None => break,
        }
    }

    let mut parts: Vec<&Block<T>> = vec![&xa];
    let mut images: Vec<&Block<T>> = vec![&axa];
    for (s, a) in krylov.iter().zip(&krylov_images) {
        parts.push(s);
        images.push(a);
    }
    for h in state.history.iter().take(cfg.history_depth) {
        if h.dir.ncols() > 0 {
            parts.push(&h.dir);
            images.push(&h.image);
        }
    }
    let b = hcat(&parts);
    let ab = hcat(&images);
    if !is_finite(&b) || !is_finite(&ab) {
        return Err(LocgError::NonFinite("search subspace"));
    }
    let xl = select(&state.x, &locked);
    let axl = select(&state.ax, &locked);
    let prefix = (!locked.is_empty()).then_some((&xl, Some(&axl)));
    let orth = orthonormalize_against(prefix, &b, Some(&ab), cfg.drop_tol).map_err(|e| match e {
        LocgError::EmptyBasis => LocgError::SubspaceCollapse,
        other => other,
    })?;
    let x_group = orth.kept.iter().filter(|&&c| c < active.len()).count();
    let az = orth.image.expect("image carried");
    Ok(Subspace { z: orth.basis, az, x_group, krylov, krylov_images, applications })
}

/// Orthonormal basis of the search subspace of the next step and its rank.
pub fn build_search_subspace<T: Scalar, O, K>(op: &O, k: &K, state: &SolverState<T>, cfg: &SolverConfig) -> Result<(Block<T>, usize)>
where
    O: HermitianOperator<T> + ?Sized,
    K: Preconditioner<T> + ?Sized,
{
    if state.active().is_empty() {
        return Err(LocgError::SubspaceCollapse);
    }
    let sub = assemble(op, k, state, cfg)?;
    let rank = sub.z.ncols();
    Ok((sub.z, rank))
}

/// Ritz values (ascending) and vectors.
#[derive(Debug, Clone)]
pub struct RitzDecomposition<T: Scalar> {
    pub values: Vec<f64>,
    pub vectors: Block<T>,
    /// Coordinates of `vectors` in the basis.
    pub coords: DMatrix<T>,
}

fn projected_asymmetry<T: Scalar>(g: &DMatrix<T>, scale: f64) -> f64 {
    max_abs(&(g - g.adjoint())) / scale.max(max_abs(g)).max(f64::MIN_POSITIVE)
}

fn ritz_from_image<T: Scalar>(z: &Block<T>, az: &Block<T>, count: usize, scale: f64) -> Result<(RitzDecomposition<T>, f64)> {
    if z.ncols() < count {
        return Err(LocgError::SubspaceCollapse);
    }
    let g = z.ad_mul(az);
    let asymmetry = projected_asymmetry(&g, scale);
    if !(asymmetry <= NONREAL_TOL) {
        return Err(LocgError::NonrealRitz { asymmetry });
    }
    let (vals, vecs) = eigh_symmetrized(&g);
    let coords = vecs.columns(0, count).into_owned();
    let vectors = z * &coords;
    Ok((RitzDecomposition { values: vals[..count].to_vec(), vectors, coords }, asymmetry))
}

/// The `count` smallest Ritz pairs of `A` from the orthonormal basis `z`.
pub fn rayleigh_ritz<T: Scalar, O: HermitianOperator<T> + ?Sized>(op: &O, z: &Block<T>, count: usize) -> Result<RitzDecomposition<T>> {
    if z.nrows() != op.dim() {
        return Err(LocgError::Dimension("basis rows differ from operator dimension".into()));
    }
    let az = op.apply(z);
    Ok(ritz_from_image(z, &az, count, op.scale())?.0)
}

/// Everything one step computed, for the verification code.
#[derive(Debug, Clone)]
pub struct StepDetail<T: Scalar> {
    pub z: Block<T>,
    pub az: Block<T>,
    /// Coordinates of the new active columns in `z`.
    pub y: DMatrix<T>,
    /// Leading columns of `z` spanning the active part of `X_k`.
    pub x_group: usize,
    /// Active columns of `X_k`, `A X_k`, `R_k` and their Ritz values.
    pub x: Block<T>,
    pub ax: Block<T>,
    pub r: Block<T>,
    pub rho: Vec<f64>,
    /// `S_1 = K R_k` and further Krylov blocks with their images.
    pub krylov: Vec<Block<T>>,
    pub krylov_images: Vec<Block<T>>,
    /// New active columns, their images and Ritz values.
    pub x_new: Block<T>,
    pub ax_new: Block<T>,
    pub rho_new: Vec<f64>,
    /// Number of columns that were locked before the step.
    pub locked_before: usize,
}

pub struct StepOutput<T: Scalar> {
    pub state: SolverState<T>,
    pub record: IterationRecord,
    pub detail: Option<StepDetail<T>>,
}

/// One step `X_k -> X_{k+1}`.
pub fn locg_step<T: Scalar, O, K>(op: &O, k: &K, state: &SolverState<T>, cfg: &SolverConfig) -> Result<(SolverState<T>, IterationRecord)>
where
    O: HermitianOperator<T> + ?Sized,
    K: Preconditioner<T> + ?Sized,
{
    let out = step_impl(op, k, state, cfg, false)?;
    Ok((out.state, out.record))
}

/// Like [`locg_step`] but also returns the step's basis and coordinates.
pub fn locg_step_detailed<T: Scalar, O, K>(op: &O, k: &K, state: &SolverState<T>, cfg: &SolverConfig) -> Result<StepOutput<T>>
where
    O: HermitianOperator<T> + ?Sized,
    K: Preconditioner<T> + ?Sized,
{
    step_impl(op, k, state, cfg, true)
}

fn step_impl<T: Scalar, O, K>(op: &O, k: &K, state: &SolverState<T>, cfg: &SolverConfig, keep_detail: bool) -> Result<StepOutput<T>>
where
    O: HermitianOperator<T> + ?Sized,
    K: Preconditioner<T> + ?Sized,
{
    let nb = cfg.block_size;
    let scale = op.scale();
    let active = state.active();
    if active.is_empty() {
        let mut next = state.clone();
        next.iter += 1;
        let record = IterationRecord {
            iter: next.iter,
            ritz_values: state.rho.clone(),
            residual_norms: state.residual_norms(),
            errors_rel: None,
            sigma: None,
            subspace_dim: 0,
            applications: 0,
            galerkin: 0.0,
            projected_asymmetry: 0.0,
            newly_locked: Vec::new(),
            wall_time: 0.0,
        };
        return Ok(StepOutput { state: next, record, detail: None });
    }
    let na = active.len();
    let locked_before = nb - na;
    let sub = assemble(op, k, state, cfg)?;
    let mut applications = sub.applications;
    let (ritz, asymmetry) = ritz_from_image(&sub.z, &sub.az, na, scale)?;

    let xa = select(&state.x, &active);
    let x_new = ritz.vectors;
    let ax_new = op.apply(&x_new);
    applications += na;
    if !is_finite(&ax_new) {
        return Err(LocgError::NonFinite("operator image"));
    }
    let (mut x_new, mut ax_new, rho_new, w) = tidy(&x_new, &ax_new);
    let mut y = &ritz.coords * w;
    for j in 0..na {
        let c = xa.column(j).dotc(&x_new.column(j));
        let m = c.modulus();
        if m > 0.0 {
            let phase = c.conjugate() * T::from_real(m.recip());
            x_new.column_mut(j).iter_mut().for_each(|v| *v *= phase);
            ax_new.column_mut(j).iter_mut().for_each(|v| *v *= phase);
            y.column_mut(j).iter_mut().for_each(|v| *v *= phase);
        }
    }
    let r_new = &ax_new - &x_new * diag_real::<T>(&rho_new);
    let mut galerkin = max_abs(&sub.z.ad_mul(&r_new));
    let locked_idx: Vec<usize> = (0..nb).filter(|&j| state.locked[j]).collect();
    if !locked_idx.is_empty() {
        galerkin = galerkin.max(max_abs(&select(&state.x, &locked_idx).ad_mul(&r_new)));
    }
    galerkin /= scale.max(f64::MIN_POSITIVE);

    // momentum: the part of each new column outside R(X_k)
    let rest = sub.z.ncols() - sub.x_group;
    let mut momentum = None;
    if cfg.history_depth > 0 && rest > 0 {
        let y_rest = y.rows(sub.x_group, rest).into_owned();
        let mut keep = Vec::new();
        let mut coeffs = Vec::new();
        for j in 0..na {
            let c = y_rest.column(j).into_owned();
            let nrm = c.norm();
            if nrm > 0.0 {
                keep.push(j);
                coeffs.push(c * T::from_real(nrm.recip()));
            }
        }
        if !coeffs.is_empty() {
            let cmat = DMatrix::from_columns(&coeffs);
            let z_rest = sub.z.columns(sub.x_group, rest);
            let az_rest = sub.az.columns(sub.x_group, rest);
            momentum = Some((keep, HistoryEntry { dir: z_rest * &cmat, image: az_rest * &cmat }));
        }
    }

    // scalar and block alignment diagnostics
    let sigma = sigma_diagnostic(k, state, cfg, &sub, &y, &rho_new, locked_before)?;

    // locking and merge into ascending order
    let lock_at = cfg.residual_tol * scale;
    let res_new = column_norms(&r_new);
    let mut entries: Vec<(f64, usize, bool, Option<usize>)> = Vec::with_capacity(nb);
    for (j, &locked) in state.locked.iter().enumerate() {
        if locked {
            entries.push((state.rho[j], j, true, None));
        }
    }
    for (i, &j) in active.iter().enumerate() {
        entries.push((rho_new[i], j, res_new[i] <= lock_at, Some(i)));
    }
    entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let n = op.dim();
    let mut x = Block::zeros(n, nb);
    let mut ax = Block::zeros(n, nb);
    let mut r = Block::zeros(n, nb);
    let mut rho = Vec::with_capacity(nb);
    let mut locked = Vec::with_capacity(nb);
    let mut newly_locked = Vec::new();
    let mut newly_locked_active = Vec::new();
    for (pos, &(value, old, is_locked, new_col)) in entries.iter().enumerate() {
        match new_col {
            Some(i) => {
                x.set_column(pos, &x_new.column(i));
                ax.set_column(pos, &ax_new.column(i));
                r.set_column(pos, &r_new.column(i));
                if is_locked {
                    newly_locked.push(pos);
                    newly_locked_active.push(i);
                }
            }
            None => {
                x.set_column(pos, &state.x.column(old));
                ax.set_column(pos, &state.ax.column(old));
                r.set_column(pos, &state.r.column(old));
            }
        }
        rho.push(value);
        locked.push(is_locked);
    }

    let mut history = state.history.clone();
    if let Some((cols, entry)) = momentum {
        let keep: Vec<usize> = (0..cols.len()).filter(|&c| !newly_locked_active.contains(&cols[c])).collect();
        if !keep.is_empty() {
            history.push_front(HistoryEntry { dir: select(&entry.dir, &keep), image: select(&entry.image, &keep) });
        }
    }
    history.truncate(cfg.history_depth);
    let depth = cfg.history_depth.max(1);
    let mut past_x = state.past_x.clone();
    let mut past_r = state.past_r.clone();
    let mut past_rho = state.past_rho.clone();
    past_x.push_front(state.x.clone());
    past_r.push_front(state.r.clone());
    past_rho.push_front(state.rho.clone());
    past_x.truncate(depth);
    past_r.truncate(depth);
    past_rho.truncate(depth);

    let next = SolverState { iter: state.iter + 1, x, ax, rho, r, locked, history, past_x, past_r, past_rho };
    let record = IterationRecord {
        iter: next.iter,
        ritz_values: next.rho.clone(),
        residual_norms: next.residual_norms(),
        errors_rel: None,
        sigma,
        subspace_dim: sub.z.ncols(),
        applications,
        galerkin,
        projected_asymmetry: asymmetry,
        newly_locked,
        wall_time: 0.0,
    };
    let detail = keep_detail.then(|| StepDetail {
        z: sub.z,
        az: sub.az,
        y,
        x_group: sub.x_group,
        x: xa,
        ax: select(&state.ax, &active),
        r: select(&state.r, &active),
        rho: active.iter().map(|&j| state.rho[j]).collect(),
        krylov: sub.krylov,
        krylov_images: sub.krylov_images,
        x_new,
        ax_new,
        rho_new,
        locked_before,
    });
    Ok(StepOutput { state: next, record, detail })
}

/// `q_k = r_k + (I - P_k)(I - Q_k) W_k c / alpha`: the residual plus the
/// Krylov-extension part of the step, normalized by the residual
/// coefficient. Recovered by least squares of the step direction onto the
/// orthogonal basis pieces of the search subspace.
fn extended_residual<T: Scalar>(state: &SolverState<T>, sub: &Subspace<T>, y: &DMatrix<T>, cfg: &SolverConfig) -> Option<DVector<T>> {
    if sub.x_group != 1 {
        return None;
    }
    let yx = y[(0, 0)];
    if yx.modulus() < 1e-300 {
        return None;
    }
    let rest = sub.z.ncols() - 1;
    let d = sub.z.columns(1, rest) * y.view((1, 0), (rest, 1)) * (T::one() / yx);
    let x = state.x.column(0).into_owned();
    let r = state.r.column(0).into_owned();
    let rr = r.norm_squared();
    if !(rr > 0.0) {
        return None;
    }
    let proj = |v: DVector<T>, with_q: bool| {
        let mut v = &v - &x * x.dotc(&v);
        if with_q {
            v = &v - &r * (r.dotc(&v) * T::from_real(rr.recip()));
        }
        v
    };
    let mut cols = vec![r.clone()];
    let mut w_count = 0;
    for s in sub.krylov.iter().skip(1) {
        cols.push(proj(s.column(0).into_owned(), true));
        w_count += 1;
    }
    for h in state.history.iter().take(cfg.history_depth) {
        for c in h.dir.column_iter() {
            cols.push(proj(c.into_owned(), false));
        }
    }
    let norms: Vec<f64> = cols.iter().map(|c| c.norm()).collect();
    let usable: Vec<usize> = (0..cols.len()).filter(|&i| norms[i] > 0.0).collect();
    if !usable.contains(&0) {
        return None;
    }
    let unit: Vec<DVector<T>> = usable.iter().map(|&i| &cols[i] * T::from_real(norms[i].recip())).collect();
    let b = DMatrix::from_columns(&unit);
    let svd = b.svd(true, true);
    let tol = 1e-13 * svd.singular_values.max();
    let coef = svd.solve(&d, tol).ok()?;
    let coef_of = |i: usize| usable.iter().position(|&u| u == i).map(|p| coef[p] * T::from_real(norms[i].recip()));
    let alpha = coef_of(0)?;
    if alpha.modulus() < 1e-300 {
        return None;
    }
    let mut q = r;
    for i in 1..=w_count {
        if let Some(c) = coef_of(i) {
            q += &cols[i] * (c / alpha);
        }
    }
    Some(q)
}

fn sigma_diagnostic<T: Scalar, K: Preconditioner<T> + ?Sized>(
    k: &K,
    state: &SolverState<T>,
    cfg: &SolverConfig,
    sub: &Subspace<T>,
    y: &DMatrix<T>,
    rho_new: &[f64],
    locked_before: usize,
) -> Result<Option<SigmaDiagnostic>> {
    let step = state.iter;
    if cfg.history_depth == 0 {
        return Ok(Some(SigmaDiagnostic::no_history(step)));
    }
    if !k.is_identity() || locked_before > 0 {
        return Ok(None);
    }
    if cfg.block_size == 1 {
        let mut residuals = vec![state.r.column(0).into_owned()];
        residuals.extend(state.past_r.iter().take(cfg.history_depth).map(|r| r.column(0).into_owned()));
        if cfg.krylov_degree == 1 {
            let g = gamma_history(&residuals)?;
            return Ok(Some(SigmaDiagnostic::scalar(step, &g, SigmaVariant::ScalarHistory)));
        }
        return Ok(extended_residual(state, sub, y, cfg)
            .map(|q| gamma_tilde_history(&residuals, &q))
            .transpose()?
            .map(|g| SigmaDiagnostic::scalar(step, &g, SigmaVariant::ExtendedHistory)));
    }
    if cfg.krylov_degree == 1 && cfg.history_depth == 1 {
        let (Some(x_prev), Some(rho_prev)) = (state.past_x.front(), state.past_rho.front()) else {
            return Ok(None);
        };
        let input = BlockGammaInput {
            x: &state.x,
            x_prev,
            r: &state.r,
            ar: &sub.krylov_images[0],
            rho: &state.rho,
            rho_prev,
            rho_next_first: rho_new[0],
        };
        return block_gamma_first(step, &input);
    }
    Ok(None)
}

/// Runs the iteration from `x0` until stagnation, residual convergence,
/// `max_iter` or breakdown.
///
/// `reference` holds the smallest exact eigenvalues (ascending) and enables
/// relative errors in the trace.
pub fn locg_solve<T: Scalar, O, K>(
    op: &O,
    k: &K,
    x0: &Block<T>,
    cfg: &SolverConfig,
    reference: Option<&[f64]>,
) -> Result<(SolverState<T>, ConvergenceTrace)>
where
    O: HermitianOperator<T> + ?Sized,
    K: Preconditioner<T> + ?Sized,
{
    let start = Instant::now();
    let mut state = SolverState::new(op, x0, cfg)?;
    if let Some(reference) = reference {
        if reference.len() < cfg.block_size {
            return Err(LocgError::Dimension("reference spectrum shorter than the block".into()));
        }
    }
    let initial = InitialRecord { ritz_values: state.rho.clone(), residual_norms: state.residual_norms() };
    let targets = cfg.targets();
    let mut records = Vec::new();
    let done_locked = |s: &SolverState<T>| (0..targets).all(|j| s.locked[j]);
    let mut outcome = if done_locked(&state) { Some(Outcome::ResidualConverged) } else { None };
    while outcome.is_none() {
        if state.iter >= cfg.max_iter {
            outcome = Some(Outcome::MaxIter);
            break;
        }
        let (next, mut record) = match locg_step(op, k, &state, cfg) {
            Ok(v) => v,
            Err(e) => {
                outcome = Some(Outcome::Breakdown { iter: state.iter + 1, reason: e.to_string() });
                break;
            }
        };
        if let Some(reference) = reference {
            record.errors_rel = Some(
                (0..cfg.block_size)
                    .map(|j| {
                        let span = initial.ritz_values[j] - reference[j];
                        if span == 0.0 { 0.0 } else { (next.rho[j] - reference[j]) / span }
                    })
                    .collect(),
            );
        }
        record.wall_time = start.elapsed().as_secs_f64();
        let stagnated = (0..targets).all(|j| state.rho[j] - next.rho[j] < cfg.stop_rel * next.rho[j].abs());
        records.push(record);
        state = next;
        if done_locked(&state) {
            outcome = Some(Outcome::ResidualConverged);
        } else if stagnated {
            outcome = Some(Outcome::Stagnated);
        }
    }
    let outcome = outcome.expect("loop sets an outcome");
    Ok((state, ConvergenceTrace { initial, records, outcome }))
}

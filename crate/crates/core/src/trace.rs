//! Per-iteration records produced by [`crate::solver::locg_solve`].

use crate::rate::SigmaDiagnostic;

/// How a solve ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    /// The Rayleigh quotient stopped decreasing: `rho_{k-1} - rho_k < stop_rel |rho_k|`.
    Stagnated,
    /// Every target column reached the residual threshold and was locked.
    ResidualConverged,
    MaxIter,
    /// Nonreal Ritz values, subspace collapse or non-finite data.
    Breakdown { iter: usize, reason: String },
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Stagnated => "stagnated",
            Outcome::ResidualConverged => "residual_converged",
            Outcome::MaxIter => "max_iter",
            Outcome::Breakdown { .. } => "breakdown",
        }
    }

    pub fn is_breakdown(&self) -> bool {
        matches!(self, Outcome::Breakdown { .. })
    }
}

/// Quantities recorded for the step that produced iterate `iter`.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    /// Index of the new iterate (`k + 1` for the step `k -> k + 1`).
    pub iter: usize,
    pub ritz_values: Vec<f64>,
    pub residual_norms: Vec<f64>,
    /// `(rho_{k,j} - lambda_j) / (rho_{0,j} - lambda_j)`, when a reference spectrum is given.
    pub errors_rel: Option<Vec<f64>>,
    /// Alignment diagnostic of step `k`; absent when undefined for the configuration.
    pub sigma: Option<SigmaDiagnostic>,
    /// Columns of the search subspace after dropping.
    pub subspace_dim: usize,
    /// Single-vector operator applications spent in this step.
    pub applications: usize,
    /// `max |Z^H r(X_{k+1})| / scale`.
    pub galerkin: f64,
    /// Relative asymmetry of the projected matrix.
    pub projected_asymmetry: f64,
    /// Positions (in sorted order) that were locked during this step.
    pub newly_locked: Vec<usize>,
    /// Seconds since the start of the solve.
    pub wall_time: f64,
}

/// Ritz values and residual norms of the starting block.
#[derive(Debug, Clone)]
pub struct InitialRecord {
    pub ritz_values: Vec<f64>,
    pub residual_norms: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTrace {
    pub initial: InitialRecord,
    pub records: Vec<IterationRecord>,
    pub outcome: Outcome,
}

impl ConvergenceTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// Ritz values of column `j`, starting with the initial block.
    pub fn ritz_sequence(&self, j: usize) -> Vec<f64> {
        std::iter::once(self.initial.ritz_values[j])
            .chain(self.records.iter().map(|r| r.ritz_values[j]))
            .collect()
    }

    /// Relative errors of column `j`, starting with `1` for the initial block.
    pub fn error_sequence(&self, j: usize) -> Option<Vec<f64>> {
        let mut out = vec![1.0];
        for r in &self.records {
            out.push(r.errors_rel.as_ref()?[j]);
        }
        Some(out)
    }

    pub fn final_error(&self, j: usize) -> Option<f64> {
        match self.records.last() {
            Some(r) => r.errors_rel.as_ref().map(|e| e[j]),
            None => Some(1.0),
        }
    }
}

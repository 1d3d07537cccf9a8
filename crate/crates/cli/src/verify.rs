use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Result};
use locg::linesearch::{
    block_witness_from_step, verify_block_identities, verify_vector_identities, vector_witness_from_step, IdentityCheck,
    IdentityReport,
};
use locg::problems::start_block;
use locg::solver::locg_step_detailed;
use locg::{IdentityPreconditioner, Problem, SolverState};

use crate::manifest::{build_problem, ensure_dir, RunManifest, Triple};
use crate::run::file_stem;
use crate::tracefile::{check_trace, read_trace, TraceIssue};

pub const IDENTITY_TOL: f64 = 1e-8;
pub const GALERKIN_TOL: f64 = 1e-10;
pub const MONOTONE_SLACK: f64 = 1e-13;
/// Largest problem checked with per-iteration dense work.
pub const MAX_VERIFY_DIM: usize = 2000;

#[derive(Debug, Clone)]
pub struct VerifyRow {
    pub triple: Triple,
    pub seed: u64,
    pub iter: usize,
    /// `None` when no witness exists (locked columns).
    pub identities: Option<IdentityReport>,
    pub galerkin: f64,
    pub monotone: bool,
}

impl VerifyRow {
    pub fn pass(&self) -> bool {
        self.identities.as_ref().is_none_or(|r| r.pass()) && self.galerkin <= GALERKIN_TOL && self.monotone
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub rows: Vec<VerifyRow>,
    /// Solves that stopped on a breakdown, with the message.
    pub breakdowns: Vec<(Triple, u64, String)>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.breakdowns.is_empty() && self.rows.iter().all(VerifyRow::pass)
    }

    pub fn failures(&self) -> Vec<&VerifyRow> {
        self.rows.iter().filter(|r| !r.pass()).collect()
    }
}

fn check_cell(c: &IdentityCheck) -> String {
    match c {
        IdentityCheck::Residual(v) => format!("{v:.3e}"),
        IdentityCheck::Vacuous => "vacuous".into(),
        IdentityCheck::NotCheckable(_) => "not_checkable".into(),
    }
}

/// Replays the solver step by step with every check on.
pub fn verify_trial(problem: &Problem, manifest: &RunManifest, triple: Triple, seed: u64) -> Result<(Vec<VerifyRow>, Option<String>)> {
    let cfg = manifest.solver_config(triple);
    let targets = cfg.target_count.unwrap_or(triple.nb);
    let op = &*problem.operator;
    let mut state = SolverState::new(op, &start_block(problem.dim(), triple.nb, seed)?, &cfg)?;
    let mut rows = Vec::new();
    while state.iter < cfg.max_iter && !(0..targets).all(|j| state.locked[j]) {
        let out = match locg_step_detailed(op, &IdentityPreconditioner, &state, &cfg) {
            Ok(o) => o,
            Err(e) => return Ok((rows, Some(e.to_string()))),
        };
        let detail = out.detail.as_ref().expect("detailed step");
        let identities = if detail.locked_before > 0 {
            None
        } else if triple.nb == 1 {
            vector_witness_from_step(op, detail).ok().map(|w| verify_vector_identities(op, &w, IDENTITY_TOL))
        } else {
            block_witness_from_step(detail).ok().map(|w| verify_block_identities(op, &w, IDENTITY_TOL))
        };
        let monotone = (0..triple.nb)
            .filter(|&j| !state.locked[j])
            .all(|j| out.state.rho[j] <= state.rho[j] + MONOTONE_SLACK * state.rho[j].abs());
        rows.push(VerifyRow { triple, seed, iter: out.record.iter, identities, galerkin: out.record.galerkin, monotone });
        let stagnated = (0..targets).all(|j| state.rho[j] - out.state.rho[j] < cfg.stop_rel * out.state.rho[j].abs());
        state = out.state;
        if stagnated {
            break;
        }
    }
    Ok((rows, None))
}

fn render_rows(rows: &[VerifyRow]) -> String {
    let mut out = String::from("iter,a,b,c,d,e,condition,galerkin,monotone,pass\n");
    for r in rows {
        let ids = match &r.identities {
            Some(rep) => {
                let cells: Vec<String> = rep.checks.iter().map(check_cell).collect();
                format!("{},{:.3e}", cells.join(","), rep.condition)
            }
            None => "skipped,skipped,skipped,skipped,skipped,".into(),
        };
        let _ = writeln!(out, "{},{ids},{:.3e},{},{}", r.iter, r.galerkin, r.monotone, r.pass());
    }
    out
}

/// Verifies every (triple, seed) of the manifest, writing one CSV per trial.
pub fn cmd_verify(manifest: &RunManifest) -> Result<VerifyReport> {
    manifest.validate()?;
    if !manifest.precond.is_identity() {
        bail!("verify checks the unpreconditioned iteration; use --precond identity");
    }
    let problem = build_problem(&manifest.problem)?;
    if problem.dim() > MAX_VERIFY_DIM {
        bail!("verify needs n <= {MAX_VERIFY_DIM}, got {}", problem.dim());
    }
    ensure_dir(&manifest.out)?;
    let mut report = VerifyReport { rows: Vec::new(), breakdowns: Vec::new() };
    for &triple in &manifest.triples {
        for seed in manifest.trial_seeds() {
            let (rows, breakdown) = verify_trial(&problem, manifest, triple, seed)?;
            let path = manifest.out.join(format!("{}.verify.csv", file_stem(&problem.label, triple, seed)));
            std::fs::write(&path, render_rows(&rows))?;
            if let Some(msg) = breakdown {
                report.breakdowns.push((triple, seed, msg));
            }
            report.rows.extend(rows);
        }
    }
    Ok(report)
}

/// Checks the invariants of a trace file already on disk.
pub fn verify_trace_file(path: &Path) -> Result<Vec<TraceIssue>> {
    Ok(check_trace(&read_trace(path)?))
}

//! Trace CSV files.
//!
//! Main trace, one row per iterate (row `0` is the start block):
//!
//! ```text
//! iter,rho_1..rho_nb,resnorm_1..resnorm_nb,err_rel_1..err_rel_nb,sigma,ratio_two_step,ratio_vs_bound
//! ```
//!
//! `sigma` on row `k + 1` is the diagnostic of step `k`; `ratio_two_step` is
//! `eps_k / eps_{k-2}` and `ratio_vs_bound` is `(eps_k / eps_{k-1})` over the
//! per-step bound for that `sigma`. Undefined cells are empty. Floats carry
//! 17 significant digits so the files round-trip exactly. Wall times live in
//! a sibling `*.timing.csv` so the main trace stays byte-reproducible.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use locg::{ConvergenceTrace, RateBound, SpectralSummary};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn cell(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn trace_header(nb: usize) -> String {
    let mut cols = vec!["iter".to_string()];
    for prefix in ["rho", "resnorm", "err_rel"] {
        cols.extend((1..=nb).map(|j| format!("{prefix}_{j}")));
    }
    cols.extend(["sigma", "ratio_two_step", "ratio_vs_bound"].map(String::from));
    cols.join(",")
}

/// Renders the main trace. `summary` enables the bound column.
pub fn render_trace(trace: &ConvergenceTrace, summary: Option<&SpectralSummary>, me: usize, mh: usize) -> String {
    let nb = trace.initial.ritz_values.len();
    let mut out = trace_header(nb);
    out.push('\n');
    let errs = trace.error_sequence(0);
    let eps = |k: usize| errs.as_ref().map(|e| e[k]);
    let ratio = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) if b > 0.0 && a.is_finite() => Some(a / b),
        _ => None,
    };

    let row0: Vec<String> = std::iter::once("0".to_string())
        .chain(trace.initial.ritz_values.iter().map(|&v| fmt_f64(v)))
        .chain(trace.initial.residual_norms.iter().map(|&v| fmt_f64(v)))
        .chain((0..nb).map(|_| if errs.is_some() { fmt_f64(1.0) } else { String::new() }))
        .chain(["", "", ""].map(String::from))
        .collect();
    out.push_str(&row0.join(","));
    out.push('\n');

    for (i, rec) in trace.records.iter().enumerate() {
        let k = i + 1;
        let sigma = rec.sigma.as_ref().map(|s| s.sigma);
        let two_step = if k >= 2 { ratio(eps(k), eps(k - 2)) } else { None };
        let bound = summary.and_then(|s| {
            let sig = if mh == 0 { Some(0.0) } else { sigma };
            RateBound::new(s, me as u32, mh as u32, sig?).ok().map(|b| b.per_step())
        });
        let vs_bound = match (ratio(eps(k), eps(k - 1)), bound) {
            (Some(r), Some(b)) if b > 0.0 => Some(r / b),
            _ => None,
        };
        let mut line = k.to_string();
        for v in rec.ritz_values.iter().chain(&rec.residual_norms) {
            let _ = write!(line, ",{}", fmt_f64(*v));
        }
        for j in 0..nb {
            let _ = write!(line, ",{}", cell(rec.errors_rel.as_ref().map(|e| e[j])));
        }
        let _ = write!(line, ",{},{},{}", cell(sigma), cell(two_step), cell(vs_bound));
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn render_timing(trace: &ConvergenceTrace) -> String {
    let mut out = String::from("iter,wall_time,applications,subspace_dim\n");
    for r in &trace.records {
        let _ = writeln!(out, "{},{},{},{}", r.iter, fmt_f64(r.wall_time), r.applications, r.subspace_dim);
    }
    out
}

/// A parsed main trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub nb: usize,
    pub iters: Vec<usize>,
    /// `rho[k][j]`
    pub rho: Vec<Vec<f64>>,
    pub resnorm: Vec<Vec<f64>>,
    pub err_rel: Vec<Vec<Option<f64>>>,
    pub sigma: Vec<Option<f64>>,
    pub ratio_two_step: Vec<Option<f64>>,
    pub ratio_vs_bound: Vec<Option<f64>>,
}

impl TraceTable {
    pub fn len(&self) -> usize {
        self.iters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iters.is_empty()
    }

    /// First-column relative errors, where present.
    pub fn errors(&self) -> Vec<Option<f64>> {
        self.err_rel.iter().map(|e| e[0]).collect()
    }
}

fn parse_cell(s: &str, row: usize, col: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).with_context(|| format!("row {row}: bad number '{s}' in {col}"))
}

pub fn parse_trace(text: &str) -> Result<TraceTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let nb = header.iter().filter(|h| h.starts_with("rho_")).count();
    if nb == 0 || header.len() != 1 + 3 * nb + 3 || header.join(",") != trace_header(nb) {
        bail!("unexpected trace header '{}'", header.join(","));
    }
    let mut t = TraceTable {
        nb,
        iters: vec![],
        rho: vec![],
        resnorm: vec![],
        err_rel: vec![],
        sigma: vec![],
        ratio_two_step: vec![],
        ratio_vs_bound: vec![],
    };
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("row {row}"))?;
        let f = |c: usize| parse_cell(&rec[c], row, &header[c]);
        let req = |c: usize| f(c)?.with_context(|| format!("row {row}: empty {}", header[c]));
        t.iters.push(rec[0].parse().with_context(|| format!("row {row}: bad iteration '{}'", &rec[0]))?);
        t.rho.push((0..nb).map(|j| req(1 + j)).collect::<Result<_>>()?);
        t.resnorm.push((0..nb).map(|j| req(1 + nb + j)).collect::<Result<_>>()?);
        t.err_rel.push((0..nb).map(|j| f(1 + 2 * nb + j)).collect::<Result<_>>()?);
        t.sigma.push(f(1 + 3 * nb)?);
        t.ratio_two_step.push(f(2 + 3 * nb)?);
        t.ratio_vs_bound.push(f(3 + 3 * nb)?);
    }
    Ok(t)
}

pub fn read_trace(path: &Path) -> Result<TraceTable> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_trace(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Wall time per iteration from a timing file.
pub fn read_timing(path: &Path) -> Result<Vec<(usize, f64)>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.push((rec[0].parse()?, rec[1].parse()?));
    }
    Ok(out)
}

/// A violated trace invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceIssue {
    pub iter: usize,
    pub what: String,
}

/// Checks a parsed trace: consecutive iterations, finite values,
/// non-negative residuals and non-increasing Ritz values.
pub fn check_trace(t: &TraceTable) -> Vec<TraceIssue> {
    let mut issues = Vec::new();
    let mut push = |iter, what: String| issues.push(TraceIssue { iter, what });
    for (k, &it) in t.iters.iter().enumerate() {
        if it != k {
            push(it, format!("expected iteration {k}"));
        }
        if t.rho[k].iter().any(|v| !v.is_finite()) || t.resnorm[k].iter().any(|v| !v.is_finite()) {
            push(it, "non-finite value".into());
        }
        if t.resnorm[k].iter().any(|&v| v < 0.0) {
            push(it, "negative residual norm".into());
        }
        if k > 0 {
            for j in 0..t.nb {
                let (a, b) = (t.rho[k - 1][j], t.rho[k][j]);
                if b > a + 1e-13 * a.abs() {
                    push(it, format!("rho_{} increased from {a:e} to {b:e}", j + 1));
                }
            }
        }
    }
    issues
}

//! Table of `sigma - 1` statistics over the second half of each run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::run::TrialSummary;
use crate::tracefile::read_trace;

/// Values below this print as `0`.
pub const ZERO_BELOW: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum SigmaStats {
    /// `m_h = 0`: sigma is zero by convention and not tabulated.
    NoHistory,
    /// Fewer than four iterations, or no defined sigma in the window.
    Insufficient,
    Values { min: f64, mean: f64, max: f64, count: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaRow {
    pub problem: String,
    pub nb: usize,
    pub me: usize,
    pub mh: usize,
    pub seed: u64,
    pub stats: SigmaStats,
}

/// `sigma - 1` over the last half of the iterations (row `0` excluded).
pub fn sigma_stats(sigma: &[Option<f64>], mh: usize) -> SigmaStats {
    if mh == 0 {
        return SigmaStats::NoHistory;
    }
    let steps = sigma.len().saturating_sub(1);
    if steps < 4 {
        return SigmaStats::Insufficient;
    }
    let window: Vec<f64> = sigma[1 + steps / 2..].iter().flatten().map(|s| s - 1.0).collect();
    if window.is_empty() {
        return SigmaStats::Insufficient;
    }
    let min = window.iter().copied().fold(f64::INFINITY, f64::min);
    let max = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    SigmaStats::Values { min, mean, max, count: window.len() }
}

/// `0` below the threshold, a trailing `*` above one.
pub fn render_value(v: f64) -> String {
    if v.abs() < ZERO_BELOW {
        "0".to_string()
    } else if v > 1.0 {
        format!("{v:.1e}*")
    } else {
        format!("{v:.1e}")
    }
}

fn summaries_in(dir: &Path) -> Result<Vec<(PathBuf, TrialSummary)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") {
            let text = std::fs::read_to_string(&path)?;
            if let Ok(s) = serde_json::from_str::<TrialSummary>(&text) {
                out.push((path, s));
            }
        }
    }
    out.sort_by(|a, b| (&a.1.problem, a.1.nb, a.1.me, a.1.mh, a.1.seed).cmp(&(&b.1.problem, b.1.nb, b.1.me, b.1.mh, b.1.seed)));
    Ok(out)
}

/// `dir/stem{to}` for `dir/stem{from}`; stems may contain dots.
pub fn sibling(path: &Path, from: &str, to: &str) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = name.strip_suffix(from).unwrap_or(&name);
    path.with_file_name(format!("{stem}{to}"))
}

/// Builds rows from the `*.json` / `*.trace.csv` pairs in `dir`.
pub fn sigma_rows(dir: &Path) -> Result<Vec<SigmaRow>> {
    let mut rows = Vec::new();
    for (json, s) in summaries_in(dir)? {
        let trace_path = sibling(&json, ".json", ".trace.csv");
        let stats = match read_trace(&trace_path) {
            Ok(t) => sigma_stats(&t.sigma, s.mh),
            Err(e) => {
                eprintln!("warning: skipping {}: {e:#}", trace_path.display());
                continue;
            }
        };
        rows.push(SigmaRow { problem: s.problem, nb: s.nb, me: s.me, mh: s.mh, seed: s.seed, stats });
    }
    Ok(rows)
}

pub fn render_table(rows: &[SigmaRow]) -> String {
    let mut out = format!("{:<28} {:<9} {:>5}  {:>9} {:>9} {:>9}\n", "problem", "triple", "seed", "min", "mean", "max");
    for r in rows {
        let triple = format!("({},{},{})", r.nb, r.me, r.mh);
        let cols = match &r.stats {
            SigmaStats::NoHistory => ["-".into(), "-".into(), "-".into()],
            SigmaStats::Insufficient => ["insufficient".into(), String::new(), String::new()],
            SigmaStats::Values { min, mean, max, .. } => [render_value(*min), render_value(*mean), render_value(*max)],
        };
        let _ = writeln!(out, "{:<28} {:<9} {:>5}  {:>9} {:>9} {:>9}", r.problem, triple, r.seed, cols[0], cols[1], cols[2]);
    }
    out
}

pub fn render_csv(rows: &[SigmaRow]) -> String {
    let mut out = String::from("problem,nb,me,mh,seed,status,min,mean,max\n");
    for r in rows {
        let (status, vals) = match &r.stats {
            SigmaStats::NoHistory => ("no_history", String::from(",,")),
            SigmaStats::Insufficient => ("insufficient", String::from(",,")),
            SigmaStats::Values { min, mean, max, .. } => ("ok", format!("{min:.16e},{mean:.16e},{max:.16e}")),
        };
        let _ = writeln!(out, "{},{},{},{},{},{status},{vals}", r.problem, r.nb, r.me, r.mh, r.seed);
    }
    out
}

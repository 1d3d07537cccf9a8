use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use locg::problems::start_block;
use locg::rate::rate_report;
use locg::{locg_solve, ConvergenceTrace, Outcome, Problem, SpectralSummary};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::manifest::{build_problem, ensure_dir, RunManifest, Triple};
use crate::tracefile::{fmt_f64, render_timing, render_trace};

/// Per-trial JSON summary.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrialSummary {
    pub problem: String,
    pub nb: usize,
    pub me: usize,
    pub mh: usize,
    pub seed: u64,
    pub outcome: String,
    pub iters: usize,
    pub final_err_rel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub breakdown_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub breakdown_reason: Option<String>,
    pub c_cheb: Option<f64>,
    pub median_ratio_vs_bound: Option<f64>,
    pub geometric_mean_span_ratio: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub triple: Triple,
    pub seed: u64,
    pub trace: ConvergenceTrace,
    pub summary: TrialSummary,
    pub trace_path: PathBuf,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub trials: Vec<TrialResult>,
}

impl RunOutcome {
    pub fn breakdowns(&self) -> usize {
        self.trials.iter().filter(|t| t.trace.outcome.is_breakdown()).count()
    }

    pub fn exit_code(&self) -> i32 {
        i32::from(self.breakdowns() > 0)
    }
}

pub fn file_stem(problem: &str, triple: Triple, seed: u64) -> String {
    format!("{problem}__{}__s{seed}", triple.label())
}

/// Threads for sweeps: `LOCG_THREADS` when set, else rayon's default.
pub fn sweep_threads() -> Option<usize> {
    std::env::var("LOCG_THREADS").ok()?.parse().ok().filter(|&n| n > 0)
}

fn rate_csv(trace: &ConvergenceTrace, summary: &SpectralSummary, triple: Triple) -> Result<(String, locg::rate::RateReport)> {
    let rep = rate_report(trace, summary, triple.me as u32, triple.mh as u32)?;
    let mut out = String::from("iter,err,ratio,bound,ratio_vs_bound,span_ratio,span_bound,sigma\n");
    for r in &rep.rows {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.iter,
            fmt_f64(r.err),
            fmt_f64(r.ratio),
            fmt_f64(r.bound),
            fmt_f64(r.ratio_vs_bound),
            opt(r.span_ratio),
            fmt_f64(r.span_bound),
            fmt_f64(r.sigma)
        ));
    }
    Ok((out, rep))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Runs one trial and writes its four files.
pub fn run_trial(problem: &Problem, manifest: &RunManifest, triple: Triple, seed: u64) -> Result<TrialResult> {
    let summary = problem.summary().transpose()?;
    let precond = manifest.precond.build(problem)?;
    let cfg = manifest.solver_config(triple);
    let x0 = start_block(problem.dim(), triple.nb, seed)?;
    let (_, trace) = locg_solve(&*problem.operator, &*precond, &x0, &cfg, problem.spectrum.as_deref())
        .with_context(|| format!("{} {triple} seed {seed}", problem.label))?;

    let stem = file_stem(&problem.label, triple, seed);
    let dir = &manifest.out;
    let trace_path = dir.join(format!("{stem}.trace.csv"));
    write(&trace_path, &render_trace(&trace, summary.as_ref(), triple.me, triple.mh))?;
    write(&dir.join(format!("{stem}.timing.csv")), &render_timing(&trace))?;

    let mut report = None;
    if let Some(s) = &summary {
        let (csv, rep) = rate_csv(&trace, s, triple)?;
        write(&dir.join(format!("{stem}.rate.csv")), &csv)?;
        report = Some(rep);
    }
    let (breakdown_iter, breakdown_reason) = match &trace.outcome {
        Outcome::Breakdown { iter, reason } => (Some(*iter), Some(reason.clone())),
        _ => (None, None),
    };
    let ts = TrialSummary {
        problem: problem.label.clone(),
        nb: triple.nb,
        me: triple.me,
        mh: triple.mh,
        seed,
        outcome: trace.outcome.label().to_string(),
        iters: trace.iterations(),
        final_err_rel: summary.as_ref().and_then(|_| trace.final_error(0)),
        breakdown_iter,
        breakdown_reason,
        c_cheb: report.as_ref().map(|r| r.c_cheb),
        median_ratio_vs_bound: report.as_ref().and_then(|r| r.median_ratio_vs_bound()),
        geometric_mean_span_ratio: report.as_ref().and_then(|r| r.geometric_mean_span_ratio()),
    };
    write(&dir.join(format!("{stem}.json")), &serde_json::to_string_pretty(&ts)?)?;
    Ok(TrialResult { triple, seed, trace, summary: ts, trace_path })
}

/// Runs every (triple, seed) of the manifest, in parallel across trials.
pub fn cmd_run(manifest: &RunManifest) -> Result<RunOutcome> {
    manifest.validate()?;
    ensure_dir(&manifest.out)?;
    let problem = build_problem(&manifest.problem)?;
    let jobs: Vec<(Triple, u64)> =
        manifest.triples.iter().flat_map(|&t| manifest.trial_seeds().into_iter().map(move |s| (t, s))).collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = sweep_threads() {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    let trials = pool.install(|| {
        jobs.par_iter().map(|&(t, s)| run_trial(&problem, manifest, t, s)).collect::<Result<Vec<_>>>()
    })?;
    Ok(RunOutcome { trials })
}

//! Three-panel SVG per trace: error against iterations, error against wall
//! time, and the measured-over-bound ratio across the second half.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Result;

use crate::run::TrialSummary;
use crate::sigma_table::sibling;
use crate::tracefile::{read_timing, read_trace, TraceTable};

const PANEL_W: f64 = 380.0;
const PANEL_H: f64 = 300.0;
const MARGIN: f64 = 48.0;

#[derive(Debug, Clone, Copy)]
struct Frame {
    x0: f64,
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl Frame {
    fn new(x0: f64, pts: &[(f64, f64)]) -> Self {
        let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
        if !xmin.is_finite() {
            (xmin, xmax, ymin, ymax) = (0.0, 1.0, 0.0, 1.0);
        }
        if xmax <= xmin {
            xmax = xmin + 1.0;
        }
        if ymax <= ymin {
            ymax = ymin + 1.0;
        }
        Self { x0, xmin, xmax, ymin, ymax }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let px = self.x0 + MARGIN + (x - self.xmin) / (self.xmax - self.xmin) * (PANEL_W - 1.5 * MARGIN);
        let py = PANEL_H - MARGIN - (y - self.ymin) / (self.ymax - self.ymin) * (PANEL_H - 2.0 * MARGIN);
        (px, py)
    }
}

fn polyline(out: &mut String, f: &Frame, pts: &[(f64, f64)], color: &str, class: &str) {
    let coords: Vec<String> = pts
        .iter()
        .map(|&(x, y)| {
            let (px, py) = f.map(x, y);
            format!("{px:.2},{py:.2}")
        })
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline class="{class}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
        coords.join(" ")
    );
}

fn axes(out: &mut String, f: &Frame, title: &str, xlabel: &str, ylabel: &str) {
    let (l, b) = (f.x0 + MARGIN, PANEL_H - MARGIN);
    let r = f.x0 + PANEL_W - 0.5 * MARGIN;
    let _ = writeln!(out, r##"<rect x="{l}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="#444"/>"##, r - l, b - MARGIN);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="13">{title}</text>"#, (l + r) / 2.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle" font-size="11">{xlabel}</text>"#, (l + r) / 2.0, PANEL_H - 10.0);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="11" transform="rotate(-90 {0} {1})">{ylabel}</text>"#,
        f.x0 + 12.0,
        PANEL_H / 2.0
    );
    let ticks = [(f.xmin, f.ymin), (f.xmax, f.ymax)];
    for (x, y) in ticks {
        let (px, _) = f.map(x, f.ymin);
        let (_, py) = f.map(f.xmin, y);
        let _ = writeln!(out, r#"<text x="{px:.1}" y="{}" text-anchor="middle" font-size="9">{}</text>"#, b + 12.0, tick(x));
        let _ = writeln!(out, r#"<text x="{}" y="{py:.1}" text-anchor="end" font-size="9">{}</text>"#, l - 3.0, tick(y));
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

/// Renders the SVG document for one trace.
pub fn render_svg(title: &str, trace: &TraceTable, timing: Option<&[(usize, f64)]>, breakdown: Option<usize>) -> String {
    let err: Vec<(usize, f64)> =
        trace.iters.iter().zip(trace.errors()).filter_map(|(&k, e)| e.filter(|v| *v > 0.0).map(|v| (k, v.log10()))).collect();
    let left: Vec<(f64, f64)> = err.iter().map(|&(k, e)| (k as f64, e)).collect();
    let middle: Vec<(f64, f64)> = match timing {
        Some(t) => err.iter().filter_map(|&(k, e)| t.iter().find(|(i, _)| *i == k).map(|&(_, w)| (w, e))).collect(),
        None => Vec::new(),
    };
    let half = trace.len() / 2;
    let right: Vec<(f64, f64)> = trace.iters[half..]
        .iter()
        .zip(&trace.ratio_vs_bound[half..])
        .filter_map(|(&k, r)| r.map(|v| (k as f64, v)))
        .collect();

    let width = 3.0 * PANEL_W;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_H}" viewBox="0 0 {width} {PANEL_H}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    let _ = writeln!(out, r#"<rect width="{width}" height="{PANEL_H}" fill="white"/>"#);

    let f1 = Frame::new(0.0, &left);
    axes(&mut out, &f1, "relative error", "iteration", "log10 error");
    polyline(&mut out, &f1, &left, "#1f5fa8", "error-vs-iter");

    let f2 = Frame::new(PANEL_W, &middle);
    axes(&mut out, &f2, "relative error", "wall time (s)", "log10 error");
    if middle.is_empty() {
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle" font-size="11">no timing data</text>"#, 1.5 * PANEL_W, PANEL_H / 2.0);
    } else {
        polyline(&mut out, &f2, &middle, "#1f5fa8", "error-vs-time");
    }

    let mut guard = right.clone();
    guard.push((right.first().map_or(0.0, |p| p.0), 1.0));
    let f3 = Frame::new(2.0 * PANEL_W, &guard);
    axes(&mut out, &f3, "measured / bound", "iteration", "ratio");
    let (gx0, gy) = f3.map(f3.xmin, 1.0);
    let (gx1, _) = f3.map(f3.xmax, 1.0);
    let _ = writeln!(out, r##"<line class="guide" x1="{gx0:.2}" y1="{gy:.2}" x2="{gx1:.2}" y2="{gy:.2}" stroke="#999" stroke-dasharray="4 3"/>"##);
    polyline(&mut out, &f3, &right, "#b0451c", "ratio");

    if let Some(k) = breakdown {
        let _ = writeln!(
            out,
            r##"<text class="breakdown" x="{}" y="{}" font-size="11" fill="#b00">breakdown at iteration {k}</text>"##,
            MARGIN + 6.0,
            MARGIN + 14.0
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Trace files named directly or found in the given directories.
pub fn collect_traces(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|q| q.to_string_lossy().ends_with(".trace.csv"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Writes one SVG per readable trace; unreadable traces are skipped with a
/// warning. Returns the files written.
pub fn cmd_plot(traces: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>> {
    crate::manifest::ensure_dir(out_dir)?;
    let mut written = Vec::new();
    for path in collect_traces(traces)? {
        let table = match read_trace(&path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("warning: skipping {}: {e:#}", path.display());
                continue;
            }
        };
        let timing = read_timing(&sibling(&path, ".trace.csv", ".timing.csv")).ok();
        let breakdown = std::fs::read_to_string(sibling(&path, ".trace.csv", ".json"))
            .ok()
            .and_then(|s| serde_json::from_str::<TrialSummary>(&s).ok())
            .and_then(|s| s.breakdown_iter);
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let stem = name.strip_suffix(".trace.csv").unwrap_or(&name).to_string();
        let svg = render_svg(&stem, &table, timing.as_deref(), breakdown);
        let target = out_dir.join(format!("{stem}.svg"));
        std::fs::write(&target, svg)?;
        written.push(target);
    }
    Ok(written)
}

//! Run manifests: what to solve, with which triples and seeds, and where to
//! write the results. Built from command-line flags layered over an optional
//! flat `key = value` config file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use locg::mtx::{load_matrix_market, LoadedMatrix};
use locg::operator::operator_diagonal;
use locg::{DiagonalPreconditioner, HermitianOperator, OperatorPreconditioner, Preconditioner, Problem, ProblemSpec, SolverConfig};

/// Bad input from the user; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub nb: usize,
    pub me: usize,
    pub mh: usize,
}

impl Triple {
    pub fn new(nb: usize, me: usize, mh: usize) -> Self {
        Self { nb, me, mh }
    }

    /// The thirteen configurations of the standard sweep.
    pub fn all13() -> Vec<Triple> {
        let mut v: Vec<_> = (1..=3).flat_map(|me| (0..=2).map(move |mh| Triple::new(1, me, mh))).collect();
        v.extend((2..=3).flat_map(|nb| (0..=1).map(move |mh| Triple::new(nb, 1, mh))));
        v
    }

    pub fn label(&self) -> String {
        format!("nb{}_me{}_mh{}", self.nb, self.me, self.mh)
    }

    pub fn config(&self) -> SolverConfig {
        SolverConfig::new(self.nb, self.me, self.mh)
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.nb, self.me, self.mh)
    }
}

/// `all13`, or triples like `1,1,1;2,1,0`.
pub fn parse_triples(s: &str) -> Result<Vec<Triple>> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("all13") {
        return Ok(Triple::all13());
    }
    let mut out = Vec::new();
    for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let nums: Vec<usize> = part
            .trim_matches(|c| c == '(' || c == ')')
            .split(',')
            .map(|v| v.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| UsageError(format!("bad triple '{part}'")))?;
        match nums.as_slice() {
            [nb, me, mh] => out.push(Triple::new(*nb, *me, *mh)),
            _ => return usage(format!("triple '{part}' needs three entries")),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum PrecondChoice {
    Identity,
    Jacobi,
    File(PathBuf),
}

impl PrecondChoice {
    pub fn is_identity(&self) -> bool {
        matches!(self, PrecondChoice::Identity)
    }

    pub fn build(&self, problem: &Problem) -> Result<Box<dyn Preconditioner<f64>>> {
        Ok(match self {
            PrecondChoice::Identity => Box::new(locg::IdentityPreconditioner),
            PrecondChoice::Jacobi => Box::new(DiagonalPreconditioner::jacobi(&operator_diagonal(&*problem.operator))?),
            PrecondChoice::File(path) => match load_matrix_market(path)? {
                LoadedMatrix::Real(op) if op.dim() == problem.dim() => Box::new(OperatorPreconditioner(op)),
                LoadedMatrix::Real(op) => anyhow::bail!("preconditioner is {0}x{0}, problem is {1}x{1}", op.dim(), problem.dim()),
                LoadedMatrix::Complex(_) => anyhow::bail!("complex preconditioners are not supported by the harness"),
            },
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub problem: ProblemSpec,
    pub triples: Vec<Triple>,
    pub trials: usize,
    /// Operator seed; trial `t` starts from seed `seed + t`.
    pub seed: u64,
    pub max_iter: usize,
    pub stop_rel: f64,
    /// Leading columns that must converge before a run stops.
    pub targets: usize,
    pub precond: PrecondChoice,
    pub out: PathBuf,
}

impl RunManifest {
    pub fn new(problem: ProblemSpec, triples: Vec<Triple>, out: impl Into<PathBuf>) -> Self {
        let max_iter = default_max_iter(&problem);
        Self {
            problem,
            triples,
            trials: 1,
            seed: 1,
            max_iter,
            stop_rel: 1e-15,
            targets: 1,
            precond: PrecondChoice::Identity,
            out: out.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.triples.is_empty() {
            return usage("no triples given");
        }
        if self.trials == 0 {
            return usage("trials must be at least 1");
        }
        if !(self.stop_rel > 0.0) {
            return usage("stop-rel must be positive");
        }
        if let Some(t) = self.triples.iter().find(|t| t.nb == 0 || t.me == 0) {
            return usage(format!("triple {t} needs nb >= 1 and me >= 1"));
        }
        self.problem.validate().map_err(|e| UsageError(e.to_string()))?;
        Ok(())
    }

    pub fn trial_seeds(&self) -> Vec<u64> {
        (0..self.trials as u64).map(|t| self.seed + t).collect()
    }

    pub fn solver_config(&self, triple: Triple) -> SolverConfig {
        let mut cfg = triple.config().with_max_iter(self.max_iter).with_target_count(self.targets.clamp(1, triple.nb));
        cfg.stop_rel = self.stop_rel;
        cfg
    }
}

/// 500 iterations for the well-conditioned synthetic problem, 3000 otherwise.
pub fn default_max_iter(problem: &ProblemSpec) -> usize {
    match problem {
        ProblemSpec::OutlierCluster { .. } => 500,
        _ => 3000,
    }
}

/// Flags shared by every subcommand. Every field is optional so that a
/// config file can fill the gaps.
#[derive(Debug, Clone, Default, Args)]
pub struct ManifestArgs {
    /// laplacian2d | cluster_outlier | outlier_cluster | file
    #[arg(long)]
    pub problem: Option<String>,
    /// Laplacian grid size (n = N^2)
    #[arg(long = "N")]
    pub grid: Option<usize>,
    /// Dimension of the synthetic problems
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub nb: Option<usize>,
    #[arg(long)]
    pub me: Option<usize>,
    #[arg(long)]
    pub mh: Option<usize>,
    /// `all13` or `nb,me,mh;nb,me,mh;...`
    #[arg(long)]
    pub triples: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    #[arg(long = "stop-rel")]
    pub stop_rel: Option<f64>,
    /// Leading eigenvalues that must converge (default 1)
    #[arg(long)]
    pub targets: Option<usize>,
    /// identity | jacobi | file
    #[arg(long)]
    pub precond: Option<String>,
    /// Matrix Market file holding K for `--precond file`
    #[arg(long = "precond-file")]
    pub precond_file: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Matrix Market file for `--problem file`
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Flat `key = value` file; flags given on the command line win
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Parses `key = value` lines; `#` starts a comment. Keys use flag names.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return usage(format!("config line {}: expected key = value", i + 1));
        };
        map.insert(k.trim().trim_start_matches("--").to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn pick<T: std::str::FromStr>(cli: Option<T>, file: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    if cli.is_some() {
        return Ok(cli);
    }
    match file.get(key) {
        None => Ok(None),
        Some(v) => v.parse().map(Some).map_err(|_| UsageError(format!("config: bad value '{v}' for {key}")).into()),
    }
}

const KNOWN_KEYS: &[&str] = &[
    "problem", "N", "n", "nb", "me", "mh", "triples", "trials", "seed", "max-iter", "stop-rel", "targets", "precond",
    "precond-file", "out", "matrix",
];

impl ManifestArgs {
    pub fn resolve(&self) -> Result<RunManifest> {
        let file = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        if let Some(k) = file.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return usage(format!("config: unknown key '{k}'"));
        }
        let problem_name = pick(self.problem.clone(), &file, "problem")?.unwrap_or_else(|| "outlier_cluster".into());
        let seed = pick(self.seed, &file, "seed")?.unwrap_or(1);
        let problem = match problem_name.as_str() {
            "laplacian2d" | "laplacian" => ProblemSpec::Laplacian2d { grid: pick(self.grid, &file, "N")?.unwrap_or(50) },
            "cluster_outlier" => ProblemSpec::ClusterOutlier { n: pick(self.n, &file, "n")?.unwrap_or(1000), seed },
            "outlier_cluster" => ProblemSpec::OutlierCluster { n: pick(self.n, &file, "n")?.unwrap_or(1000), seed },
            "file" => match pick(self.matrix.clone(), &file, "matrix")? {
                Some(path) => ProblemSpec::MatrixFile { path },
                None => return usage("--problem file needs --matrix"),
            },
            other => return usage(format!("unknown problem '{other}'")),
        };

        let single = (pick(self.nb, &file, "nb")?, pick(self.me, &file, "me")?, pick(self.mh, &file, "mh")?);
        let triples = match (pick(self.triples.clone(), &file, "triples")?, single) {
            (Some(t), _) => parse_triples(&t)?,
            (None, (None, None, None)) => vec![Triple::new(1, 1, 1)],
            (None, (nb, me, mh)) => vec![Triple::new(nb.unwrap_or(1), me.unwrap_or(1), mh.unwrap_or(1))],
        };

        let precond = match pick(self.precond.clone(), &file, "precond")?.as_deref() {
            None | Some("identity") => PrecondChoice::Identity,
            Some("jacobi") => PrecondChoice::Jacobi,
            Some("file") => match pick(self.precond_file.clone(), &file, "precond-file")? {
                Some(p) => PrecondChoice::File(p),
                None => return usage("--precond file needs --precond-file"),
            },
            Some(other) => return usage(format!("unknown preconditioner '{other}'")),
        };

        let mut m = RunManifest::new(problem, triples, pick(self.out.clone(), &file, "out")?.unwrap_or_else(|| "locg-out".into()));
        m.seed = seed;
        m.precond = precond;
        if let Some(v) = pick(self.trials, &file, "trials")? {
            m.trials = v;
        }
        if let Some(v) = pick(self.max_iter, &file, "max-iter")? {
            m.max_iter = v;
        }
        if let Some(v) = pick(self.stop_rel, &file, "stop-rel")? {
            m.stop_rel = v;
        }
        if let Some(v) = pick(self.targets, &file, "targets")? {
            m.targets = v;
        }
        m.validate()?;
        Ok(m)
    }
}

/// Builds the problem, attaching a readable error to file problems.
pub fn build_problem(spec: &ProblemSpec) -> Result<Problem> {
    spec.build().with_context(|| format!("building problem {}", spec.label()))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triple_parsing() {
        assert_eq!(parse_triples("all13").unwrap().len(), 13);
        assert_eq!(parse_triples("1,1,1; (2,1,0)").unwrap(), vec![Triple::new(1, 1, 1), Triple::new(2, 1, 0)]);
        assert!(parse_triples("").unwrap().is_empty());
        assert!(parse_triples("1,2").is_err());
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "problem = laplacian2d\nN = 12\nnb = 2\n# comment\nmax-iter = 40\nseed=7\n").unwrap();
        let args = ManifestArgs { config: Some(cfg), grid: Some(9), ..Default::default() };
        let m = args.resolve().unwrap();
        assert_eq!(m.problem, ProblemSpec::Laplacian2d { grid: 9 });
        assert_eq!(m.triples, vec![Triple::new(2, 1, 1)]);
        assert_eq!((m.max_iter, m.seed), (40, 7));
    }

    #[test]
    fn empty_triples_is_usage_error() {
        let args = ManifestArgs { triples: Some(String::new()), ..Default::default() };
        let err = args.resolve().unwrap_err();
        assert!(err.downcast_ref::<UsageError>().is_some());
    }

    #[test]
    fn default_budgets() {
        assert_eq!(default_max_iter(&ProblemSpec::OutlierCluster { n: 1000, seed: 1 }), 500);
        assert_eq!(default_max_iter(&ProblemSpec::Laplacian2d { grid: 50 }), 3000);
    }
}

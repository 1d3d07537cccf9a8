//! Shared fixtures for the criterion benches.

use locg::problems::{laplacian2d, outlier_cluster_sized, start_block};
use locg::{Block, Problem, Result, SolverConfig, SolverState};

/// A problem, a start block and a solver state one step in.
pub struct Fixture {
    pub problem: Problem,
    pub x0: Block<f64>,
    pub cfg: SolverConfig,
}

impl Fixture {
    pub fn laplacian(grid: usize, nb: usize, me: usize, mh: usize) -> Result<Self> {
        let problem = laplacian2d(grid)?;
        let x0 = start_block(problem.dim(), nb, 1)?;
        Ok(Self { problem, x0, cfg: SolverConfig::new(nb, me, mh).with_max_iter(200) })
    }

    pub fn outlier_cluster(n: usize, nb: usize, me: usize, mh: usize) -> Result<Self> {
        let problem = outlier_cluster_sized(n, 1)?;
        let x0 = start_block(n, nb, 1)?;
        Ok(Self { problem, x0, cfg: SolverConfig::new(nb, me, mh).with_max_iter(200) })
    }

    pub fn state(&self) -> Result<SolverState<f64>> {
        SolverState::new(&*self.problem.operator, &self.x0, &self.cfg)
    }
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{GridCell, SweepGrid};
use crate::dynamics::steady::{is_floored, simulate_with, SteadyOptions};
use crate::dynamics::{Generator, Model, Point, SimParams};
use crate::error::{Error, Result};

/// Current on-disk schema of [`SweepResult`].
pub const SCHEMA_VERSION: u32 = 2;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "SPINGAS_WORKERS";

/// Outcome of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub ix: usize,
    pub iy: usize,
    pub n: Option<f64>,
    pub phi: Option<f64>,
    pub j_over_gamma: f64,
    pub i_over_gamma: f64,
    pub m_signed: f64,
    pub m_abs: f64,
    /// τ (s)
    pub tau: f64,
    pub tau_floored: bool,
    pub converged: bool,
    pub seed: f64,
    pub error: Option<String>,
}

impl SweepRecord {
    fn failed(cell: &GridCell, seed: f64, err: &Error) -> Self {
        SweepRecord {
            ix: cell.ix,
            iy: cell.iy,
            n: cell.n,
            phi: cell.phi,
            j_over_gamma: cell.j_over_gamma,
            i_over_gamma: cell.i_over_gamma,
            m_signed: f64::NAN,
            m_abs: f64::NAN,
            tau: f64::NAN,
            tau_floored: false,
            converged: false,
            seed,
            error: Some(err.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub schema_version: u32,
    pub tool_version: String,
    pub params_hash: String,
    pub template: SimParams,
    pub options: SteadyOptions,
    pub grid: SweepGrid,
    pub records: Vec<SweepRecord>,
    /// Largest |M| in the grid, the reference of the τ floor.
    pub reference_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub migration_note: Option<String>,
}

impl SweepResult {
    pub fn record(&self, ix: usize, iy: usize) -> &SweepRecord {
        let (nx, _) = self.grid.shape();
        &self.records[iy * nx + ix]
    }

    pub fn failures(&self) -> impl Iterator<Item = &SweepRecord> {
        self.records.iter().filter(|r| r.error.is_some() || !r.converged)
    }
}

/// Worker count from the environment (default: all cores).
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn run_cell(model: &std::sync::Arc<Model>, template: &SimParams, cell: &GridCell, opts: &SteadyOptions) -> SweepRecord {
    let mut p = *template;
    p.i_rate = cell.i_over_gamma * p.gamma;
    p.j_rate = cell.j_over_gamma * p.gamma;
    let out = Point::new(model.clone(), &p)
        .and_then(|pt| Generator::new(&pt))
        // The floor is applied afterwards against the grid maximum.
        .and_then(|g| simulate_with(&g, p.seed, p.t1(), opts, 0.0));
    match out {
        Ok((s, _)) => SweepRecord {
            ix: cell.ix,
            iy: cell.iy,
            n: cell.n,
            phi: cell.phi,
            j_over_gamma: cell.j_over_gamma,
            i_over_gamma: cell.i_over_gamma,
            m_signed: s.m_ss,
            m_abs: s.m_ss.abs(),
            tau: s.tau,
            tau_floored: s.tau_floored,
            converged: s.converged,
            seed: p.seed,
            error: None,
        },
        Err(e) => SweepRecord::failed(cell, p.seed, &e),
    }
}

/// Steady magnetization and response time on every cell of `grid`.
/// Results do not depend on `workers`.
pub fn run_sweep(grid: &SweepGrid, template: &SimParams, opts: &SteadyOptions, workers: usize) -> Result<SweepResult> {
    grid.validate()?;
    template.validate()?;
    let cells = grid.cells(template.gamma)?;
    let model = Model::new(template)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let mut records: Vec<SweepRecord> = pool.install(|| cells.par_iter().map(|c| run_cell(&model, template, c, opts)).collect());
    let reference_m = records.iter().filter(|r| r.converged).map(|r| r.m_abs).fold(0.0, f64::max);
    for r in &mut records {
        if r.converged && is_floored(r.m_abs, reference_m) {
            r.tau = template.t1();
            r.tau_floored = true;
        }
    }
    let params_hash = crate::io::digest_json(&(template, opts, grid))?;
    Ok(SweepResult {
        schema_version: SCHEMA_VERSION,
        tool_version: crate::VERSION.to_string(),
        params_hash,
        template: *template,
        options: *opts,
        grid: grid.clone(),
        records,
        reference_m,
        migration_note: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disordered_corner_is_floored() {
        let grid = SweepGrid::rates(vec![0.5, 0.8], vec![0.5, 0.8]);
        let r = run_sweep(&grid, &SimParams::default(), &SteadyOptions::default(), 2).unwrap();
        assert_eq!(r.records.len(), 4);
        for rec in &r.records {
            assert!(rec.converged && rec.m_abs < 1e-6);
            assert_eq!(rec.tau, SimParams::default().t1());
            assert!(rec.tau_floored);
        }
    }
}

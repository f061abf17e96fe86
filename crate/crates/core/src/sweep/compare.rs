//! τ difference between the two coherence projections over one grid.

use serde::{Deserialize, Serialize};

use super::grid::SweepGrid;
use super::run::{run_sweep, SweepResult};
use crate::dynamics::steady::SteadyOptions;
use crate::dynamics::{ProjectionMode, SimParams};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionComparison {
    /// Populations-only run; its phases define the boundary.
    pub reference: SweepResult,
    /// Run keeping the Zeeman coherences.
    pub coherent: SweepResult,
    /// |τ_coherent − τ_reference| / τ_reference per cell (NaN when either run failed).
    pub relative_tau_difference: Vec<f64>,
    /// First ordered cell of each row whose ordered interval starts inside the grid.
    pub low_boundary: Vec<usize>,
    /// Last ordered cell of each row that re-enters disorder inside the grid.
    pub high_boundary: Vec<usize>,
}

fn mean_over(v: &[f64], idx: &[usize]) -> f64 {
    let vals: Vec<f64> = idx.iter().map(|&k| v[k]).filter(|x| x.is_finite()).collect();
    if vals.is_empty() {
        f64::NAN
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

impl ProjectionComparison {
    pub fn low_boundary_mean(&self) -> f64 {
        mean_over(&self.relative_tau_difference, &self.low_boundary)
    }

    pub fn high_boundary_mean(&self) -> f64 {
        mean_over(&self.relative_tau_difference, &self.high_boundary)
    }
}

/// Runs `grid` in both projection modes. `template.b_z` applies to both.
pub fn compare_projections(
    grid: &SweepGrid,
    template: &SimParams,
    opts: &SteadyOptions,
    workers: usize,
) -> Result<ProjectionComparison> {
    let mut p = *template;
    p.projection = ProjectionMode::HyperfineZeeman;
    let reference = run_sweep(grid, &p, opts, workers)?;
    p.projection = ProjectionMode::HyperfineOnly;
    let coherent = run_sweep(grid, &p, opts, workers)?;

    let relative_tau_difference = reference
        .records
        .iter()
        .zip(&coherent.records)
        .map(|(a, b)| {
            if a.converged && b.converged {
                (b.tau - a.tau).abs() / a.tau
            } else {
                f64::NAN
            }
        })
        .collect();

    let (nx, ny) = grid.shape();
    let (mut low_boundary, mut high_boundary) = (Vec::new(), Vec::new());
    for iy in 0..ny {
        let ordered: Vec<usize> = (0..nx)
            .filter(|&ix| {
                let r = reference.record(ix, iy);
                r.converged && !r.tau_floored
            })
            .collect();
        let (Some(&a), Some(&b)) = (ordered.first(), ordered.last()) else { continue };
        if a > 0 {
            low_boundary.push(iy * nx + a);
        }
        if b + 1 < nx {
            high_boundary.push(iy * nx + b);
        }
    }
    Ok(ProjectionComparison {
        reference,
        coherent,
        relative_tau_difference,
        low_boundary,
        high_boundary,
    })
}

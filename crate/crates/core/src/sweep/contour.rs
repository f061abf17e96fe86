//! Cuts through a finished sweep.

use serde::{Deserialize, Serialize};

use super::grid::SweepAxes;
use super::run::{SweepRecord, SweepResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "along", content = "value", rename_all = "kebab-case")]
pub enum Cut {
    FixedJ(f64),
    FixedI(f64),
    FixedDensity(f64),
    FixedPower(f64),
}

/// Records on one grid line, ordered along the free axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub cut: Cut,
    /// Grid-line coordinate actually used.
    pub line_value: f64,
    pub records: Vec<SweepRecord>,
}

fn nearest(axis: &[f64], v: f64) -> Result<usize> {
    let (lo, hi) = (axis[0], axis[axis.len() - 1]);
    let pad = if axis.len() > 1 { 0.5 * (hi - lo) / (axis.len() - 1) as f64 } else { 0.0 };
    if !(v >= lo - pad - 1e-12 * hi.abs() && v <= hi + pad + 1e-12 * hi.abs()) {
        return Err(Error::InvalidArgument(format!("cut value {v} outside grid range [{lo}, {hi}]")));
    }
    Ok(axis
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
        .map(|(k, _)| k)
        .unwrap_or(0))
}

pub fn extract_contour(result: &SweepResult, cut: Cut) -> Result<Contour> {
    let (nx, ny) = result.grid.shape();
    let rates = matches!(result.grid.axes, SweepAxes::Rates { .. });
    let (fix_x, v) = match (cut, rates) {
        (Cut::FixedJ(v), true) | (Cut::FixedDensity(v), false) => (true, v),
        (Cut::FixedI(v), true) | (Cut::FixedPower(v), false) => (false, v),
        _ => {
            return Err(Error::InvalidArgument(format!("cut {cut:?} does not match the grid axes")));
        }
    };
    let (line_value, records) = if fix_x {
        let ix = nearest(result.grid.x_axis(), v)?;
        (result.grid.x_axis()[ix], (0..ny).map(|iy| result.record(ix, iy).clone()).collect())
    } else {
        let iy = nearest(result.grid.y_axis(), v)?;
        (result.grid.y_axis()[iy], (0..nx).map(|ix| result.record(ix, iy).clone()).collect())
    };
    Ok(Contour { cut, line_value, records })
}

impl Contour {
    /// (free-axis value, |M|, τ) triples.
    pub fn series(&self) -> Vec<(f64, f64, f64)> {
        self.records
            .iter()
            .map(|r| {
                let x = match self.cut {
                    Cut::FixedJ(_) => r.i_over_gamma,
                    Cut::FixedI(_) => r.j_over_gamma,
                    Cut::FixedDensity(_) => r.phi.unwrap_or(f64::NAN),
                    Cut::FixedPower(_) => r.n.unwrap_or(f64::NAN),
                };
                (x, r.m_abs, r.tau)
            })
            .collect()
    }
}

use serde::{Deserialize, Serialize};

use super::conditions::{map_conditions, ConditionsMap};
use crate::error::{Error, Result};

/// The two axes of a sweep: x varies fastest in the record order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SweepAxes {
    /// x = J/Γ, y = I/Γ
    Rates { j_over_gamma: Vec<f64>, i_over_gamma: Vec<f64> },
    /// x = density (cm⁻³), y = pump power (mW)
    Conditions { densities: Vec<f64>, powers: Vec<f64>, map: ConditionsMap },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub axes: SweepAxes,
}

/// One grid cell with its derived rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub ix: usize,
    pub iy: usize,
    pub n: Option<f64>,
    pub phi: Option<f64>,
    pub j_over_gamma: f64,
    pub i_over_gamma: f64,
}

fn strictly_increasing(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidArgument(format!("{name} axis is empty")));
    }
    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidArgument(format!("{name} axis has negative or non-finite values")));
    }
    if v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(format!("{name} axis must be strictly increasing")));
    }
    Ok(())
}

/// `n` evenly spaced values from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// `n` logarithmically spaced values from `a` to `b` inclusive.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect()
}

impl SweepGrid {
    pub fn rates(j_over_gamma: Vec<f64>, i_over_gamma: Vec<f64>) -> Self {
        SweepGrid {
            axes: SweepAxes::Rates { j_over_gamma, i_over_gamma },
        }
    }

    pub fn conditions(densities: Vec<f64>, powers: Vec<f64>, map: ConditionsMap) -> Self {
        SweepGrid {
            axes: SweepAxes::Conditions { densities, powers, map },
        }
    }

    /// The desk-scale 30 × 30 grid over I/Γ, J/Γ ∈ [0.5, 6].
    pub fn desk() -> Self {
        SweepGrid::rates(linspace(0.5, 6.0, 30), linspace(0.5, 6.0, 30))
    }

    pub fn validate(&self) -> Result<()> {
        match &self.axes {
            SweepAxes::Rates { j_over_gamma, i_over_gamma } => {
                strictly_increasing("J/Γ", j_over_gamma)?;
                strictly_increasing("I/Γ", i_over_gamma)
            }
            SweepAxes::Conditions { densities, powers, map } => {
                strictly_increasing("density", densities)?;
                strictly_increasing("power", powers)?;
                map.validate()
            }
        }
    }

    pub fn x_axis(&self) -> &[f64] {
        match &self.axes {
            SweepAxes::Rates { j_over_gamma, .. } => j_over_gamma,
            SweepAxes::Conditions { densities, .. } => densities,
        }
    }

    pub fn y_axis(&self) -> &[f64] {
        match &self.axes {
            SweepAxes::Rates { i_over_gamma, .. } => i_over_gamma,
            SweepAxes::Conditions { powers, .. } => powers,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.x_axis().len(), self.y_axis().len())
    }

    pub fn len(&self) -> usize {
        let (a, b) = self.shape();
        a * b
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cells in row-major order (x fastest) with rates in units of `gamma`.
    pub fn cells(&self, gamma: f64) -> Result<Vec<GridCell>> {
        self.validate()?;
        let (nx, ny) = self.shape();
        let mut out = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                out.push(match &self.axes {
                    SweepAxes::Rates { j_over_gamma, i_over_gamma } => GridCell {
                        ix,
                        iy,
                        n: None,
                        phi: None,
                        j_over_gamma: j_over_gamma[ix],
                        i_over_gamma: i_over_gamma[iy],
                    },
                    SweepAxes::Conditions { densities, powers, map } => {
                        let (j, i) = map_conditions(densities[ix], powers[iy], map)?;
                        GridCell {
                            ix,
                            iy,
                            n: Some(densities[ix]),
                            phi: Some(powers[iy]),
                            j_over_gamma: j / gamma,
                            i_over_gamma: i / gamma,
                        }
                    }
                });
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes_are_validated() {
        assert!(SweepGrid::rates(vec![1.0, 2.0], vec![1.0]).validate().is_ok());
        assert!(SweepGrid::rates(vec![2.0, 1.0], vec![1.0]).validate().is_err());
        assert!(SweepGrid::rates(vec![], vec![1.0]).validate().is_err());
    }

    #[test]
    fn cell_order_is_x_fastest() {
        let g = SweepGrid::rates(vec![1.0, 2.0, 3.0], vec![10.0, 20.0]);
        let c = g.cells(58.0).unwrap();
        assert_eq!(c.len(), 6);
        assert_eq!((c[1].j_over_gamma, c[1].i_over_gamma), (2.0, 10.0));
        assert_eq!((c[3].ix, c[3].iy), (0, 1));
    }

    #[test]
    fn spacing_helpers() {
        assert_eq!(linspace(0.5, 6.0, 30).len(), 30);
        let l = logspace(1e10, 1e13, 4);
        assert!((l[1] / 1e11 - 1.0).abs() < 1e-12);
    }
}

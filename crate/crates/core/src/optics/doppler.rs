//! Gauss–Hermite averaging over the one-dimensional k·v distribution.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boltzmann constant, J/K.
const K_B: f64 = 1.380_649e-23;
/// Atomic mass unit, kg.
const AMU: f64 = 1.660_539_066_60e-27;

/// Doppler distribution of k·v: `exp(−(kv/width)²) / (width √π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DopplerSpec {
    /// 1/e half-width of k·v in s⁻¹.
    pub width: f64,
    pub quadrature_order: usize,
}

impl DopplerSpec {
    pub fn stationary() -> Self {
        DopplerSpec {
            width: 0.0,
            quadrature_order: 1,
        }
    }

    /// Width k·sqrt(2 k_B T / m) for a line at `wavelength_nm` and a gas at `temp_c`.
    pub fn thermal(temp_c: f64, mass_amu: f64, wavelength_nm: f64, order: usize) -> Self {
        let t = temp_c + 273.15;
        let u = (2.0 * K_B * t / (mass_amu * AMU)).sqrt();
        let k = 2.0 * std::f64::consts::PI / (wavelength_nm * 1e-9);
        DopplerSpec {
            width: k * u,
            quadrature_order: order,
        }
    }

    /// Cesium D1 at 75 °C with 40 nodes.
    pub fn cesium_d1() -> Self {
        Self::thermal(75.0, 132.905_451_96, 894.592_96, 40)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width >= 0.0 && self.width.is_finite()) || self.quadrature_order == 0 {
            return Err(Error::InvalidArgument(format!(
                "Doppler width must be ≥ 0 and order ≥ 1 (got {}, {})",
                self.width, self.quadrature_order
            )));
        }
        Ok(())
    }

    /// (k·v, weight) pairs with weights summing to one.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        if self.width == 0.0 {
            return vec![(0.0, 1.0)];
        }
        let (x, w) = gauss_hermite(self.quadrature_order);
        let norm = std::f64::consts::PI.sqrt();
        x.into_iter()
            .zip(w)
            .map(|(x, w)| (self.width * x, w / norm))
            .collect()
    }
}

impl Default for DopplerSpec {
    fn default() -> Self {
        Self::cesium_d1()
    }
}

/// Nodes and weights of the n-point physicists' Gauss–Hermite rule (Golub–Welsch).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        jac[(k, k - 1)] = b;
        jac[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_integrate_polynomials_exactly() {
        let (x, w) = gauss_hermite(20);
        let pi = std::f64::consts::PI;
        let m0: f64 = w.iter().sum();
        let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((m0 - pi.sqrt()).abs() < 1e-12);
        assert!((m2 - pi.sqrt() / 2.0).abs() < 1e-12);
        assert!((m4 - 3.0 * pi.sqrt() / 4.0).abs() < 1e-11);
    }

    #[test]
    fn three_point_rule() {
        let (x, w) = gauss_hermite(3);
        assert!((x[2] - 1.5f64.sqrt()).abs() < 1e-13);
        assert!(x[1].abs() < 1e-13);
        assert!((w[1] - 2.0 * std::f64::consts::PI.sqrt() / 3.0).abs() < 1e-13);
    }

    #[test]
    fn zero_width_is_single_node() {
        assert_eq!(DopplerSpec { width: 0.0, quadrature_order: 40 }.nodes(), vec![(0.0, 1.0)]);
    }

    #[test]
    fn cesium_width_is_about_a_quarter_gigahertz() {
        let d = DopplerSpec::cesium_d1();
        let hz = d.width / (2.0 * std::f64::consts::PI);
        assert!(hz > 2.2e8 && hz < 2.5e8, "{hz}");
    }
}

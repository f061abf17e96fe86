//! Vapor density and pump power to model rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How pump attenuation along the cell enters I.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AttenuationMode {
    /// exp(−n σ_e L), the intensity at the exit window.
    Point,
    /// (1/L)∫₀ᴸ exp(−n σ_e y) dy
    #[default]
    PathAveraged,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionsMap {
    /// ⟨σ_ex v⟩ (cm³ s⁻¹)
    pub sigma_ex_v: f64,
    /// Pumping rate per intensity, s⁻¹ per (mW/cm²).
    pub s_calib: f64,
    /// Absorption cross-section at the pump detuning (cm²).
    pub sigma_e: f64,
    /// Cell length (cm).
    pub cell_length: f64,
    /// Beam area (cm²) converting power to intensity.
    pub beam_area: f64,
    pub attenuation: AttenuationMode,
}

/// Classical electron radius × speed of light (cm² s⁻¹).
const RE_C: f64 = 2.817_940_3262e-13 * 2.997_924_58e10;
/// Cs D1 oscillator strength.
const F_D1: f64 = 0.3449;
/// F_e = 3 lies 1167.7 MHz below F_e = 4 on the D1 line.
const EXCITED_SPLITTING_HZ: f64 = 1167.68e6;

/// Lorentzian cross-section (cm²) of Cs D1 for light `detuning_hz` above the
/// F_g = 3 → F_e = 4 line, HWHM `hwhm_hz`, averaged over the unpolarized
/// ground population (7/16 in F_g = 3, split 3/4 : 1/4 between F_e = 4 and 3).
pub fn d1_cross_section(detuning_hz: f64, hwhm_hz: f64) -> f64 {
    let lorentz = |d: f64| (hwhm_hz / std::f64::consts::PI) / (d * d + hwhm_hz * hwhm_hz);
    let line = 0.75 * lorentz(detuning_hz) + 0.25 * lorentz(detuning_hz + EXCITED_SPLITTING_HZ);
    std::f64::consts::PI * RE_C * F_D1 * (7.0 / 16.0) * line
}

impl Default for ConditionsMap {
    fn default() -> Self {
        ConditionsMap {
            sigma_ex_v: 7e-10,
            s_calib: 13.7,
            sigma_e: d1_cross_section(700e6, 137e6),
            cell_length: 1.5,
            beam_area: std::f64::consts::PI * 0.5 * 0.5 * 2.0,
            attenuation: AttenuationMode::PathAveraged,
        }
    }
}

impl ConditionsMap {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_ex_v", self.sigma_ex_v),
            ("s_calib", self.s_calib),
            ("sigma_e", self.sigma_e),
            ("cell_length", self.cell_length),
            ("beam_area", self.beam_area),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be > 0")));
            }
        }
        Ok(())
    }

    /// Fraction of the entrance intensity seen by the atoms at density `n`.
    pub fn attenuation_factor(&self, n: f64) -> f64 {
        let od = n * self.sigma_e * self.cell_length;
        match self.attenuation {
            AttenuationMode::Off => 1.0,
            AttenuationMode::Point => (-od).exp(),
            AttenuationMode::PathAveraged => {
                if od < 1e-8 {
                    1.0 - od / 2.0
                } else {
                    -(-od).exp_m1() / od
                }
            }
        }
    }
}

/// (J, I) in s⁻¹ for density `n` (cm⁻³) and pump power `phi` (mW).
pub fn map_conditions(n: f64, phi: f64, map: &ConditionsMap) -> Result<(f64, f64)> {
    if !(n >= 0.0 && phi >= 0.0 && n.is_finite() && phi.is_finite()) {
        return Err(Error::InvalidArgument("density and power must be ≥ 0".into()));
    }
    let j = n * map.sigma_ex_v;
    let i = map.s_calib * (phi / map.beam_area) * map.attenuation_factor(n);
    Ok((j, i))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_density() {
        let m = ConditionsMap::default();
        let (j, _) = map_conditions(0.0, 10.0, &m).unwrap();
        assert_eq!(j, 0.0);
        assert_eq!(m.attenuation_factor(0.0), 1.0);
    }

    #[test]
    fn linear_in_power_without_attenuation() {
        let m = ConditionsMap {
            attenuation: AttenuationMode::Off,
            ..ConditionsMap::default()
        };
        let (_, a) = map_conditions(1e12, 5.0, &m).unwrap();
        let (_, b) = map_conditions(1e12, 10.0, &m).unwrap();
        assert_eq!(b / a, 2.0);
    }

    #[test]
    fn path_average_at_unit_depth() {
        let mut m = ConditionsMap::default();
        let n = 1.0 / (m.sigma_e * m.cell_length);
        assert!((m.attenuation_factor(n) - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        m.attenuation = AttenuationMode::Point;
        assert!((m.attenuation_factor(n) - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn default_cross_section_magnitude() {
        let s = ConditionsMap::default().sigma_e;
        assert!(s > 2.6e-13 && s < 2.8e-13, "{s}");
    }
}

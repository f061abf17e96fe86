//! Simulation parameters.

use serde::{Deserialize, Serialize};

use super::state::ProjectionMode;
use crate::error::{Error, Result};
use crate::optics::{CollisionParams, DopplerSpec, OpticalField};
use crate::spin::{AtomSpec, HalfInt};
use crate::units::mhz;

/// Baseline spin-destruction rate Γ₀ (s⁻¹).
pub const GAMMA_0: f64 = 58.0;

/// Γ(T) = Γ₀ + slope·(T − 75 °C).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaLaw {
    pub gamma_0: f64,
    /// s⁻¹ per °C
    pub slope: f64,
    pub reference_c: f64,
}

impl GammaLaw {
    pub fn at(&self, temp_c: f64) -> f64 {
        self.gamma_0 + self.slope * (temp_c - self.reference_c)
    }
}

impl Default for GammaLaw {
    fn default() -> Self {
        GammaLaw {
            gamma_0: GAMMA_0,
            slope: 0.35,
            reference_c: 75.0,
        }
    }
}

/// Form of the Γ spin-destruction channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RelaxationForm {
    /// −Γ(½{F·F, ρ} − F·ρF)
    #[default]
    TotalSpin,
    /// −Γ(ρ − Tr ρ / n)
    Uniform,
}

/// How the symmetry-breaking bias enters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BiasModel {
    #[default]
    None,
    /// Direct pumping into |F_max, ±F_max⟩ at rate |h|; the sign of `h` picks the state.
    Ideal { h: f64 },
    /// A circularly polarized beam through the optical machinery, with its
    /// amplitude set so the unpolarized-state pumping rate of M equals `h`.
    Optical { h: f64, detuning: f64 },
}

impl BiasModel {
    pub fn rate(&self) -> f64 {
        match *self {
            BiasModel::None => 0.0,
            BiasModel::Ideal { h } | BiasModel::Optical { h, .. } => h,
        }
    }

    /// The same model with rate `h`.
    pub fn with_rate(&self, h: f64) -> BiasModel {
        match *self {
            BiasModel::None | BiasModel::Ideal { .. } => BiasModel::Ideal { h },
            BiasModel::Optical { detuning, .. } => BiasModel::Optical { h, detuning },
        }
    }

    /// The optical bias field 1.2 GHz blue of the 3 → 4 line.
    pub fn optical(h: f64) -> Self {
        BiasModel::Optical { h, detuning: mhz(1200.0) }
    }

    pub(crate) fn optical_field(detuning: f64, sign: f64, resolved: bool) -> OpticalField {
        OpticalField {
            amplitude_sq: 1.0,
            polarization: OpticalField::sigma(sign),
            detuning,
            reference: (HalfInt::from_int(3), HalfInt::from_int(4)),
            resolved,
        }
    }
}

/// Rate-axis calibration: absorption rate per unpolarized atom is `pump_scale · I`
/// and the exchange coefficient is `exchange_scale · J` (times q when the
/// slow-down is included).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub pump_scale: f64,
    pub exchange_scale: f64,
}

impl Calibration {
    /// Unit scales (raw model axes).
    pub const RAW: Calibration = Calibration {
        pump_scale: 1.0,
        exchange_scale: 1.0,
    };
}

impl Default for Calibration {
    /// Scales placing the boundary at (J = 3.7Γ, I = 1.6Γ) and (I = 4.5Γ, J = 2.39Γ)
    /// for the default model; recomputed by `calibrate`.
    fn default() -> Self {
        Calibration {
            pump_scale: super::calibrate::DEFAULT_PUMP_SCALE,
            exchange_scale: super::calibrate::DEFAULT_EXCHANGE_SCALE,
        }
    }
}

/// Model switches that resolve under-specified modelling choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelFlags {
    /// Include the Hermitian (light-shift) part of Ω†w in the ground dynamics.
    pub light_shift: bool,
    /// Let Zeeman energies enter the optical resolvent and the excited-level Liouvillian.
    pub zeeman_in_optics: bool,
    /// Exchange coefficient is q·J (otherwise J).
    pub exchange_includes_slowdown: bool,
}

impl Default for ModelFlags {
    fn default() -> Self {
        ModelFlags {
            light_shift: false,
            zeeman_in_optics: false,
            exchange_includes_slowdown: true,
        }
    }
}

/// Full parameter record of one simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub atom: AtomSpec,
    /// Pump template; its amplitude is set from `i_rate`.
    pub pump: OpticalField,
    pub bias: BiasModel,
    pub coll: CollisionParams,
    pub doppler: DopplerSpec,
    /// Γ (s⁻¹)
    pub gamma: f64,
    pub relaxation: RelaxationForm,
    /// Pumping rate I (s⁻¹)
    pub i_rate: f64,
    /// Spin-exchange rate J (s⁻¹)
    pub j_rate: f64,
    /// Magnetic field along z (G)
    pub b_z: f64,
    pub projection: ProjectionMode,
    /// Electron-spin polarization ε of the initial state.
    pub seed: f64,
    pub calibration: Calibration,
    pub flags: ModelFlags,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            atom: AtomSpec::cesium(),
            pump: OpticalField::cesium_pump(1.0),
            bias: BiasModel::None,
            coll: CollisionParams::default(),
            doppler: DopplerSpec::default(),
            gamma: GAMMA_0,
            relaxation: RelaxationForm::default(),
            i_rate: 0.0,
            j_rate: 0.0,
            b_z: 1.0,
            projection: ProjectionMode::default(),
            seed: 1e-4,
            calibration: Calibration::default(),
            flags: ModelFlags::default(),
        }
    }
}

impl SimParams {
    /// Defaults with I and J given in units of Γ.
    pub fn at(i_over_gamma: f64, j_over_gamma: f64) -> Self {
        let mut p = SimParams::default();
        p.i_rate = i_over_gamma * p.gamma;
        p.j_rate = j_over_gamma * p.gamma;
        p
    }

    pub fn with_bias(mut self, h_over_gamma: f64) -> Self {
        self.bias = self.bias.with_rate(h_over_gamma * self.gamma);
        self
    }

    pub fn with_seed(mut self, seed: f64) -> Self {
        self.seed = seed;
        self
    }

    /// Coefficient multiplying the exchange superoperator.
    pub fn exchange_coefficient(&self) -> f64 {
        let q = if self.flags.exchange_includes_slowdown {
            self.coll.q_slowdown
        } else {
            1.0
        };
        q * self.calibration.exchange_scale * self.j_rate
    }

    pub fn t1(&self) -> f64 {
        1.0 / self.gamma
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("Γ must be > 0");
        }
        if !(self.j_rate >= 0.0 && self.j_rate.is_finite()) {
            return bad("J must be ≥ 0");
        }
        if !(self.i_rate >= 0.0 && self.i_rate.is_finite()) {
            return bad("I must be ≥ 0");
        }
        if !(self.seed.abs() <= 0.01) {
            return bad("|seed polarization| must be ≤ 0.01");
        }
        if !self.b_z.is_finite() || !self.bias.rate().is_finite() {
            return bad("field and bias must be finite");
        }
        if !(self.calibration.pump_scale > 0.0 && self.calibration.exchange_scale > 0.0) {
            return bad("calibration scales must be > 0");
        }
        self.coll.validate()?;
        self.doppler.validate()?;
        self.pump.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_law() {
        let g = GammaLaw::default();
        assert_eq!(g.at(75.0), 58.0);
        assert!((g.at(95.0) - 65.0).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(SimParams::at(1.0, 2.0).validate().is_ok());
        assert!(SimParams { gamma: -1.0, ..SimParams::default() }.validate().is_err());
        assert!(SimParams::default().with_seed(0.1).validate().is_err());
    }

    #[test]
    fn exchange_convention_flag() {
        let mut p = SimParams::at(0.0, 1.0);
        p.calibration = Calibration::RAW;
        assert!((p.exchange_coefficient() - 4.57 * 58.0).abs() < 1e-9);
        p.flags.exchange_includes_slowdown = false;
        assert!((p.exchange_coefficient() - 58.0).abs() < 1e-12);
    }
}

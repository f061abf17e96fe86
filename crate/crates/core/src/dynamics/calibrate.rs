//! Placement of the rate axes on two reference boundary points.

use serde::{Deserialize, Serialize};

use super::params::{Calibration, SimParams};
use super::stability::{critical_point, ScanAxis};
use super::terms::Model;
use crate::error::{Error, Result};

/// Pumping-rate scale of the default model.
pub const DEFAULT_PUMP_SCALE: f64 = 21.176379170076665;
/// Exchange-rate scale of the default model.
pub const DEFAULT_EXCHANGE_SCALE: f64 = 3.6190393800386316;

/// Two boundary points: (J, I₀) on the fixed-J line and (I, J₀) on the fixed-I line, in units of Γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchors {
    pub fixed_j: f64,
    pub critical_i: f64,
    pub fixed_i: f64,
    pub critical_j: f64,
}

impl Default for Anchors {
    fn default() -> Self {
        Anchors {
            fixed_j: 3.7,
            critical_i: 1.6,
            fixed_i: 4.5,
            critical_j: 2.39,
        }
    }
}

const RAW_LO: f64 = 0.05;
const RAW_HI: f64 = 5000.0;
const SCAN: usize = 48;

/// Finds pump and exchange scales for which the boundary of `template`'s
/// model passes through both anchors.
pub fn calibrate(template: &SimParams, anchors: &Anchors) -> Result<Calibration> {
    let mut raw = *template;
    raw.calibration = Calibration::RAW;
    raw.bias = super::params::BiasModel::None;
    let model = Model::new(&raw)?;
    let i0 = |j: f64| critical_point(&model, &raw, ScanAxis::Pump, j, RAW_LO, RAW_HI, SCAN);
    let j0 = |i: f64| critical_point(&model, &raw, ScanAxis::Exchange, i, RAW_LO, RAW_HI, SCAN);

    // κ_I as a function of κ_J from the fixed-J anchor, then the residual of the fixed-I anchor.
    let kappa_i = |kj: f64| -> Result<Option<f64>> { Ok(i0(anchors.fixed_j * kj)?.map(|v| v / anchors.critical_i)) };
    let residual = |kj: f64| -> Result<Option<f64>> {
        let Some(ki) = kappa_i(kj)? else { return Ok(None) };
        Ok(j0(anchors.fixed_i * ki)?.map(|v| v - anchors.critical_j * kj))
    };

    let mut prev: Option<(f64, f64)> = None;
    let mut kj = 0.1;
    while kj < 1000.0 {
        if let Some(r) = residual(kj)? {
            if let Some((pk, pr)) = prev {
                if pr.signum() != r.signum() {
                    let (mut a, mut b, mut ra) = (pk, kj, pr);
                    for _ in 0..60 {
                        let m = 0.5 * (a + b);
                        let rm = residual(m)?.ok_or(Error::NoTransition("calibration anchors not bracketed".into()))?;
                        if rm.signum() == ra.signum() {
                            a = m;
                            ra = rm;
                        } else {
                            b = m;
                        }
                        if b - a < 1e-9 * b {
                            break;
                        }
                    }
                    let kj = 0.5 * (a + b);
                    let ki = kappa_i(kj)?.ok_or(Error::NoTransition("calibration anchors not bracketed".into()))?;
                    return Ok(Calibration {
                        pump_scale: ki,
                        exchange_scale: kj,
                    });
                }
            }
            prev = Some((kj, r));
        }
        kj *= 1.15;
    }
    Err(Error::NoTransition("calibration anchors not bracketed".into()))
}

//! Linear stability of the unmagnetized state and the critical line.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::generator::Generator;
use super::integrator::CVec;
use super::params::SimParams;
use super::steady::newton_fixed_point;
use super::terms::{Model, Point};
use crate::error::{Error, Result};
use crate::{CMat, C64};

/// The reflection-symmetric (M = 0) fixed point.
pub fn symmetric_state(g: &Generator) -> Result<CVec> {
    if !g.is_symmetric() {
        return Err(Error::InvalidArgument("generator has no m → −m symmetry".into()));
    }
    let n = g.dim();
    let mut aug = CMat::zeros(n + 1, n);
    aug.rows_mut(0, n).copy_from(g.linear_part());
    for k in 0..n {
        let mut e = CVec::zeros(n);
        e[k] = C64::new(1.0, 0.0);
        aug[(n, k)] = g.trace(&e);
    }
    let mut rhs = DMatrix::<C64>::zeros(n + 1, 1);
    rhs[(n, 0)] = C64::new(1.0, 0.0);
    let sol = aug
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut y = sol.column(0).into_owned();
    for k in g.n_even()..n {
        y[k] = C64::new(0.0, 0.0);
    }
    g.hermitize(&mut y);
    if g.has_exchange() {
        y = newton_fixed_point(g, &y, 30).ok_or(Error::NotConverged { t_max: 0.0, last_m: 0.0 })?;
    }
    Ok(y)
}

/// Largest real part of the spectrum of the odd-odd Jacobian block at `y`.
pub fn leading_odd_rate(g: &Generator, y: &CVec) -> f64 {
    let ne = g.n_even();
    let no = g.dim() - ne;
    if no == 0 {
        return f64::NEG_INFINITY;
    }
    let j = g.jacobian(y);
    let block = j.view((ne, ne), (no, no)).into_owned();
    block
        .schur()
        .eigenvalues()
        .map(|ev| ev.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max))
        .unwrap_or(f64::NAN)
}

/// Growth rate (s⁻¹) of a magnetization perturbation of the unmagnetized state.
pub fn instability_rate(model: &Arc<Model>, params: &SimParams) -> Result<f64> {
    let point = Point::new(model.clone(), params)?;
    let g = Generator::new(&point)?;
    let y = symmetric_state(&g)?;
    Ok(leading_odd_rate(&g, &y))
}

/// Which rate is varied when locating the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanAxis {
    /// Vary I at fixed J.
    Pump,
    /// Vary J at fixed I.
    Exchange,
}

fn with_axis(template: &SimParams, axis: ScanAxis, fixed: f64, varied: f64) -> SimParams {
    let (i, j) = match axis {
        ScanAxis::Pump => (varied, fixed),
        ScanAxis::Exchange => (fixed, varied),
    };
    let mut p = *template;
    p.i_rate = i * p.gamma;
    p.j_rate = j * p.gamma;
    p
}

/// The smallest value (in units of Γ) of the varied rate in `[lo, hi]` where
/// the unmagnetized state turns unstable, or `None` if it stays stable.
pub fn critical_point(
    model: &Arc<Model>,
    template: &SimParams,
    axis: ScanAxis,
    fixed: f64,
    lo: f64,
    hi: f64,
    scan: usize,
) -> Result<Option<f64>> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidArgument("critical-point bracket must satisfy 0 < lo < hi".into()));
    }
    let rate = |v: f64| instability_rate(model, &with_axis(template, axis, fixed, v));
    let n = scan.max(2);
    let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
    let mut prev = lo;
    let mut prev_rate = rate(lo)?;
    if prev_rate > 0.0 {
        return Ok(Some(lo));
    }
    for k in 1..n {
        let v = lo * ratio.powi(k as i32);
        let r = rate(v)?;
        if r > 0.0 {
            let (mut a, mut b) = (prev, v);
            let (mut ra, mut rb) = (prev_rate, r);
            for _ in 0..100 {
                // Illinois-style false position with bisection safeguard.
                let mut m = b - rb * (b - a) / (rb - ra);
                if !(m > a && m < b) || (b - a) > 0.5 * (v - prev) {
                    m = 0.5 * (a + b);
                }
                let rm = rate(m)?;
                if rm > 0.0 {
                    b = m;
                    rb = rm;
                } else {
                    a = m;
                    ra = rm;
                }
                if b - a <= 1e-10 * b {
                    break;
                }
            }
            return Ok(Some(0.5 * (a + b)));
        }
        prev = v;
        prev_rate = r;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::params::Calibration;

    #[test]
    fn stable_without_exchange() {
        let p = SimParams::at(3.0, 0.0);
        let model = Model::new(&p).unwrap();
        assert!(instability_rate(&model, &p).unwrap() < 0.0);
    }

    #[test]
    fn symmetric_state_is_a_fixed_point() {
        let p = SimParams::at(2.0, 4.0);
        let g = Generator::new(&Point::standalone(&p).unwrap()).unwrap();
        let y = symmetric_state(&g).unwrap();
        let f = g.field(&y);
        assert!(f.iter().map(|v| v.norm()).fold(0.0, f64::max) < 1e-9);
        assert_eq!(g.magnetization(&y), 0.0);
        assert!((g.trace(&y).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn raw_threshold_exists() {
        let mut p = SimParams::default();
        p.calibration = Calibration::RAW;
        let model = Model::new(&p).unwrap();
        let i0 = critical_point(&model, &p, ScanAxis::Pump, 20.0, 0.5, 500.0, 24).unwrap();
        assert!(i0.is_some());
    }
}

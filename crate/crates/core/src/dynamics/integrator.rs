//! Adaptive Dormand–Prince 5(4) stepping.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::C64;

pub type CVec = DVector<C64>;

/// A first-order system y' = f(t, y).
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &CVec, dy: &mut CVec) -> Result<()>;

    /// Called after each accepted step; may modify the state in place.
    fn post_step(&self, _t: f64, _y: &mut CVec) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest step before giving up (s).
    pub min_step: f64,
    /// Largest step (s).
    pub max_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-8,
            atol: 1e-10,
            min_step: 1e-14,
            max_step: f64::MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Sets `out = y + h Σ c_j k_j`.
fn combine(out: &mut CVec, y: &CVec, h: f64, terms: &[(f64, &CVec)]) {
    out.copy_from(y);
    for &(c, k) in terms {
        if c != 0.0 {
            out.axpy(C64::new(h * c, 0.0), k, C64::new(1.0, 0.0));
        }
    }
}

fn error_norm(err: &CVec, y0: &CVec, y1: &CVec, tol: &Tolerances) -> f64 {
    let n = err.len().max(1) as f64;
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1.iter()))
        .map(|(e, (a, b))| {
            let sc = tol.atol + tol.rtol * a.norm().max(b.norm());
            (e.norm() / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

/// Integrates `sys` from `t0` to `t_end`, calling `observe(t, y, dy)` at the
/// start and after every accepted step. The observer returns `true` to stop.
/// Returns the final time, state and statistics.
pub fn dopri5<S, O>(
    sys: &S,
    t0: f64,
    y0: CVec,
    t_end: f64,
    tol: &Tolerances,
    mut observe: O,
) -> Result<(f64, CVec, StepStats)>
where
    S: OdeSystem + ?Sized,
    O: FnMut(f64, &CVec, &CVec) -> Result<bool>,
{
    if !(t_end > t0) {
        return Err(Error::InvalidArgument("integration end must exceed start".into()));
    }
    let n = sys.dim();
    let mut stats = StepStats::default();
    let mut y = y0;
    let mut t = t0;
    let mut k1 = CVec::zeros(n);
    sys.rhs(t, &y, &mut k1)?;
    stats.evaluations += 1;
    if observe(t, &y, &k1)? {
        return Ok((t, y, stats));
    }
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        CVec::zeros(n),
        CVec::zeros(n),
        CVec::zeros(n),
        CVec::zeros(n),
        CVec::zeros(n),
        CVec::zeros(n),
    );
    let mut tmp = CVec::zeros(n);
    let mut y_new = CVec::zeros(n);
    let mut err = CVec::zeros(n);

    let mut h = initial_step(sys, t, &y, &k1, tol, &mut stats)?.min(t_end - t).min(tol.max_step);
    let mut last_rejected = false;
    loop {
        if h < tol.min_step {
            return Err(Error::StepUnderflow { time: t, step: h });
        }
        combine(&mut tmp, &y, h, &[(A21, &k1)]);
        sys.rhs(t + C2 * h, &tmp, &mut k2)?;
        combine(&mut tmp, &y, h, &[(A31, &k1), (A32, &k2)]);
        sys.rhs(t + C3 * h, &tmp, &mut k3)?;
        combine(&mut tmp, &y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        sys.rhs(t + C4 * h, &tmp, &mut k4)?;
        combine(&mut tmp, &y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        sys.rhs(t + C5 * h, &tmp, &mut k5)?;
        combine(&mut tmp, &y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        sys.rhs(t + h, &tmp, &mut k6)?;
        combine(&mut y_new, &y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        sys.rhs(t + h, &y_new, &mut k7)?;
        stats.evaluations += 6;

        err.fill(C64::new(0.0, 0.0));
        for (c, k) in [(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)] {
            err.axpy(C64::new(h * c, 0.0), k, C64::new(1.0, 0.0));
        }
        let e = error_norm(&err, &y, &y_new, tol);
        if !e.is_finite() {
            stats.rejected += 1;
            h *= 0.2;
            last_rejected = true;
            continue;
        }
        if e <= 1.0 {
            stats.accepted += 1;
            t = if (t_end - (t + h)).abs() <= 1e-12 * t_end.abs().max(1e-300) { t_end } else { t + h };
            std::mem::swap(&mut y, &mut y_new);
            sys.post_step(t, &mut y)?;
            // FSAL unless post_step changed the state.
            if y == y_new {
                std::mem::swap(&mut k1, &mut k7);
            } else {
                sys.rhs(t, &y, &mut k1)?;
                stats.evaluations += 1;
            }
            if observe(t, &y, &k1)? || t >= t_end {
                return Ok((t, y, stats));
            }
            let mut fac = if e == 0.0 { 5.0 } else { 0.9 * e.powf(-0.2) };
            fac = fac.clamp(0.2, 5.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            last_rejected = false;
            h = (h * fac).min(tol.max_step).min(t_end - t);
        } else {
            stats.rejected += 1;
            last_rejected = true;
            h *= (0.9 * e.powf(-0.2)).clamp(0.2, 1.0);
        }
    }
}

/// Hairer–Wanner starting step.
fn initial_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    y: &CVec,
    f0: &CVec,
    tol: &Tolerances,
    stats: &mut StepStats,
) -> Result<f64> {
    let sc = |v: &C64| tol.atol + tol.rtol * v.norm();
    let n = y.len().max(1) as f64;
    let rms = |a: &CVec| (a.iter().zip(y.iter()).map(|(x, yy)| (x.norm() / sc(yy)).powi(2)).sum::<f64>() / n).sqrt();
    let d0 = rms(y);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1 = y + f0 * C64::new(h0, 0.0);
    let mut f1 = CVec::zeros(y.len());
    sys.rhs(t + h0, &y1, &mut f1)?;
    stats.evaluations += 1;
    let d2 = rms(&(&f1 - f0)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay(f64);
    impl OdeSystem for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &CVec, dy: &mut CVec) -> Result<()> {
            dy[0] = y[0] * -self.0;
            Ok(())
        }
    }

    struct Rotor;
    impl OdeSystem for Rotor {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &CVec, dy: &mut CVec) -> Result<()> {
            dy[0] = y[0] * C64::new(0.0, 2.0);
            Ok(())
        }
    }

    #[test]
    fn exponential_decay_to_tolerance() {
        let y0 = CVec::from_element(1, C64::new(1.0, 0.0));
        let (t, y, stats) = dopri5(&Decay(3.0), 0.0, y0, 2.0, &Tolerances::default(), |_, _, _| Ok(false)).unwrap();
        assert_eq!(t, 2.0);
        assert!((y[0].re - (-6.0f64).exp()).abs() < 1e-9);
        assert!(stats.accepted > 10);
    }

    #[test]
    fn complex_rotation_keeps_modulus() {
        let y0 = CVec::from_element(1, C64::new(1.0, 0.0));
        let (_, y, _) = dopri5(&Rotor, 0.0, y0, 10.0, &Tolerances::default(), |_, _, _| Ok(false)).unwrap();
        let want = C64::new(0.0, 20.0).exp();
        assert!((y[0] - want).norm() < 1e-7);
    }

    #[test]
    fn observer_stops_early() {
        let y0 = CVec::from_element(1, C64::new(1.0, 0.0));
        let (t, y, _) = dopri5(&Decay(1.0), 0.0, y0, 100.0, &Tolerances::default(), |_, y, _| Ok(y[0].re < 0.5)).unwrap();
        assert!(t < 5.0 && y[0].re < 0.5);
    }

    #[test]
    fn underflow_is_reported() {
        struct Blowup;
        impl OdeSystem for Blowup {
            fn dim(&self) -> usize {
                1
            }
            fn rhs(&self, _t: f64, y: &CVec, dy: &mut CVec) -> Result<()> {
                dy[0] = y[0] * y[0];
                Ok(())
            }
        }
        let y0 = CVec::from_element(1, C64::new(1.0, 0.0));
        let tol = Tolerances { min_step: 1e-9, ..Tolerances::default() };
        let r = dopri5(&Blowup, 0.0, y0, 2.0, &tol, |_, _, _| Ok(false));
        assert!(matches!(r, Err(Error::StepUnderflow { .. })));
    }
}

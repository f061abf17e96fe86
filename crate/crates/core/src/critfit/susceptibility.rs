//! χ = dM/dH at H = 0 from steady states under a small bias.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::stability::instability_rate;
use crate::dynamics::steady::{steady_state, SteadyOptions};
use crate::dynamics::{Generator, Model, Point, SimParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Susceptibility {
    /// Central difference with step `dh` (s).
    pub chi: f64,
    /// The same with step `dh/2`.
    pub chi_half: f64,
    /// (4 χ(dh/2) − χ(dh)) / 3
    pub richardson: f64,
    /// |χ(dh/2) − χ(dh)| / |χ(dh)|
    pub step_sensitivity: f64,
    /// Bias step (s⁻¹).
    pub dh: f64,
    pub m_plus: f64,
    pub m_minus: f64,
}

fn steady_m(model: &Arc<Model>, p: &SimParams, h: f64, seed: f64, opts: &SteadyOptions) -> Result<f64> {
    let mut q = *p;
    q.bias = q.bias.with_rate(h);
    let g = Generator::new(&Point::new(model.clone(), &q)?)?;
    let ss = steady_state(&g, seed, opts)?;
    if !ss.converged {
        return Err(Error::NotConverged {
            t_max: opts.t_max,
            last_m: ss.m,
        });
    }
    Ok(ss.m)
}

/// Spontaneous magnetization at H = 0, or `None` in the disordered phase.
fn spontaneous(model: &Arc<Model>, p: &SimParams, opts: &SteadyOptions) -> Result<Option<f64>> {
    let mut q = *p;
    q.bias = q.bias.with_rate(0.0);
    let seed = if p.seed != 0.0 { p.seed.abs() } else { 1e-4 };
    let g = Generator::new(&Point::new(model.clone(), &q)?)?;
    if g.is_symmetric() {
        if instability_rate(model, &q)? > 0.0 {
            return Ok(Some(steady_m(model, &q, 0.0, seed, opts)?));
        }
        return Ok(None);
    }
    let up = steady_m(model, &q, 0.0, seed, opts)?;
    let down = steady_m(model, &q, 0.0, -seed, opts)?;
    Ok(((up - down).abs() > 1e-4).then_some(up))
}

/// χ at `params` (their bias rate is ignored) with bias step `dh` in s⁻¹.
/// Runs start unpolarized so only the bias breaks the symmetry.
pub fn susceptibility(params: &SimParams, dh: f64, opts: &SteadyOptions) -> Result<Susceptibility> {
    if !(dh > 0.0 && dh.is_finite()) {
        return Err(Error::InvalidArgument("dH must be > 0".into()));
    }
    let mut p = *params;
    if matches!(p.bias, crate::dynamics::BiasModel::None) {
        p.bias = p.bias.with_rate(0.0);
    }
    let model = Model::new(&p)?;
    if let Some(m) = spontaneous(&model, &p, opts)? {
        return Err(Error::OrderedPhase(m));
    }
    let chi_at = |h: f64| -> Result<(f64, f64, f64)> {
        let mp = steady_m(&model, &p, h, 0.0, opts)?;
        let mm = steady_m(&model, &p, -h, 0.0, opts)?;
        Ok(((mp - mm) / (2.0 * h), mp, mm))
    };
    let (chi, m_plus, m_minus) = chi_at(dh)?;
    let (chi_half, _, _) = chi_at(0.5 * dh)?;
    Ok(Susceptibility {
        chi,
        chi_half,
        richardson: (4.0 * chi_half - chi) / 3.0,
        step_sensitivity: (chi_half - chi).abs() / chi.abs(),
        dh,
        m_plus,
        m_minus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unpumped_response() {
        let p = SimParams::at(0.0, 2.3);
        let s = susceptibility(&p, 1e-3 * p.gamma, &SteadyOptions::default()).unwrap();
        assert!((s.chi * p.gamma - 1.0).abs() < 0.01, "{}", s.chi * p.gamma);
        assert!(s.step_sensitivity < 0.01);
    }

    #[test]
    fn ordered_point_is_flagged() {
        let p = SimParams::at(4.5, 3.8);
        assert!(matches!(
            susceptibility(&p, 1e-3 * p.gamma, &SteadyOptions::default()),
            Err(Error::OrderedPhase(_))
        ));
    }
}

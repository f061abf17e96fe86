//! Randomized invariant suite over valid parameter sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::steady::{integrate_steps, SteadyOptions, Stop};
use crate::dynamics::{spin_exchange_term, Generator, InvariantReport, Model, Point, ProjectionMode, SimParams};
use crate::error::Result;
use crate::{CMat, C64};

/// Pass thresholds of the suite.
pub const TRACE_LIMIT: f64 = 1e-9;
pub const HERMITICITY_LIMIT: f64 = 1e-10;
pub const EIGENVALUE_LIMIT: f64 = -1e-9;
pub const EXCHANGE_LIMIT: f64 = 1e-10;
pub const ZERO_SEED_LIMIT: f64 = 1e-9;
pub const EQUIVARIANCE_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub sets: usize,
    pub steps: usize,
    pub rng_seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            sets: 100,
            steps: 100,
            rng_seed: 20_211_010,
        }
    }
}

/// Worst values over all sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub sets: usize,
    pub invariants: InvariantReport,
    /// max |Tr(F_z · exchange(ρ))| over random full density matrices
    pub exchange_fz: f64,
    /// max |M(t)| from an unpolarized start
    pub zero_seed_m: f64,
    /// max |M₊(t) + M₋(t)| for opposite seeds
    pub equivariance: f64,
    pub failures: Vec<String>,
}

impl SuiteReport {
    pub fn passes_invariants(&self) -> bool {
        self.invariants.trace_error < TRACE_LIMIT
            && self.invariants.hermiticity_error < HERMITICITY_LIMIT
            && self.invariants.min_eigenvalue >= EIGENVALUE_LIMIT
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
            && self.passes_invariants()
            && self.exchange_fz < EXCHANGE_LIMIT
            && self.zero_seed_m < ZERO_SEED_LIMIT
            && self.equivariance < EQUIVARIANCE_LIMIT
    }
}

/// A random valid parameter set. Symmetric sets have no bias and use the
/// populations-only projection.
pub fn random_params(rng: &mut impl Rng, symmetric: bool) -> SimParams {
    let mut p = SimParams::at(rng.random_range(0.0..8.0), rng.random_range(0.0..10.0));
    p.seed = rng.random_range(-0.01..0.01);
    p.b_z = rng.random_range(0.0..2.0);
    if !symmetric {
        p.projection = if rng.random_bool(0.5) {
            ProjectionMode::HyperfineOnly
        } else {
            ProjectionMode::HyperfineZeeman
        };
        if p.projection == ProjectionMode::HyperfineOnly {
            p.b_z = rng.random_range(0.0..1e-3);
        }
        p = p.with_bias(rng.random_range(0.0..2.0));
    }
    p
}

/// ρ = G G† / Tr(G G†) with Gaussian-like random entries.
pub fn random_density(rng: &mut impl Rng, n: usize) -> CMat {
    let g = CMat::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    rho / tr
}

fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    match times.binary_search_by(|v| v.total_cmp(&t)) {
        Ok(k) => values[k],
        Err(0) => values[0],
        Err(k) if k >= times.len() => values[times.len() - 1],
        Err(k) => {
            let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
            values[k - 1] + w * (values[k] - values[k - 1])
        }
    }
}

pub fn run_suite(opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
    let steady = SteadyOptions {
        check_invariants: true,
        ..SteadyOptions::default()
    };
    let mut report = SuiteReport {
        sets: opts.sets,
        invariants: InvariantReport::CLEAN,
        exchange_fz: 0.0,
        zero_seed_m: 0.0,
        equivariance: 0.0,
        failures: Vec::new(),
    };
    let t_end = 1e4 / SimParams::default().gamma;
    for k in 0..opts.sets {
        let p = random_params(&mut rng, false);
        let run = Model::new(&p)
            .and_then(|m| Point::new(m, &p))
            .and_then(|pt| Generator::new(&pt))
            .and_then(|g| integrate_steps(&g, g.seeded_state(p.seed), t_end, &steady, Stop::Never, opts.steps));
        match run {
            Ok(traj) => report.invariants = report.invariants.worst(&traj.invariants),
            Err(e) => report.failures.push(format!("set {k} (invariants): {e}")),
        }

        let model = Model::new(&p)?;
        let rho = random_density(&mut rng, model.sys.ground_ops.f.z.matrix.nrows());
        let out = spin_exchange_term(&rho, 1.0, &model.sys.ground_ops.s);
        let tr = (&model.sys.ground_ops.f.z.matrix * out).trace().norm();
        report.exchange_fz = report.exchange_fz.max(tr);

        let q = random_params(&mut rng, true);
        let sym = Point::standalone(&q).and_then(|pt| Generator::new(&pt)).and_then(|g| {
            let zero = integrate_steps(&g, g.seeded_state(0.0), t_end, &steady, Stop::Never, opts.steps)?;
            let up = integrate_steps(&g, g.seeded_state(q.seed), t_end, &steady, Stop::Never, opts.steps)?;
            let down = integrate_steps(&g, g.seeded_state(-q.seed), t_end, &steady, Stop::Never, opts.steps)?;
            Ok((zero, up, down))
        });
        match sym {
            Ok((zero, up, down)) => {
                let z = zero.magnetization.iter().map(|m| m.abs()).fold(0.0, f64::max);
                report.zero_seed_m = report.zero_seed_m.max(z);
                let t_common = up.final_time().min(down.final_time());
                let e = up
                    .times
                    .iter()
                    .zip(&up.magnetization)
                    .filter(|(t, _)| **t <= t_common)
                    .map(|(&t, &m)| (m + interpolate(&down.times, &down.magnetization, t)).abs())
                    .fold(0.0, f64::max);
                report.equivariance = report.equivariance.max(e);
                report.invariants = report
                    .invariants
                    .worst(&zero.invariants)
                    .worst(&up.invariants)
                    .worst(&down.invariants);
            }
            Err(e) => report.failures.push(format!("set {k} (symmetry): {e}")),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        let r = run_suite(&SuiteOptions {
            sets: 4,
            steps: 30,
            rng_seed: 1,
        })
        .unwrap();
        assert!(r.passed(), "{r:?}");
    }
}

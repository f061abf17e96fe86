//! Trajectories, steady states and response times.

use std::cell::Cell;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::generator::{Generator, InvariantReport};
use super::integrator::{dopri5, CVec, OdeSystem, StepStats, Tolerances};
use super::state::{DensityMatrix, ProjectionMode};
use super::terms::Point;
use crate::error::{Error, Result};
use crate::{CMat, C64};

/// Fraction (1 − 1/e ≈ 63%) of the steady magnetization defining the response time.
pub const RESPONSE_FRACTION: f64 = 1.0 - 1.0 / std::f64::consts::E;
/// Responses below this fraction of the reference magnetization get τ = T₁.
pub const FLOOR_FRACTION: f64 = 1e-3;
/// Steady |M| below this is numerically zero (the decayed seed).
pub const MIN_RESPONSE: f64 = 1e-6;

/// Whether a run with steady magnetization `m_ss` takes the τ = T₁ floor.
pub fn is_floored(m_ss: f64, reference: f64) -> bool {
    m_ss.abs() < (FLOOR_FRACTION * reference.abs()).max(MIN_RESPONSE)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyOptions {
    pub tolerances: Tolerances,
    /// Convergence window in units of T₁.
    pub window: f64,
    /// Relative slope threshold (per Γ).
    pub rel_tol: f64,
    /// Absolute slope threshold (per Γ).
    pub abs_tol: f64,
    /// Give up after this many T₁.
    pub t_max: f64,
    /// Refine the converged state by Newton iteration.
    pub polish: bool,
    /// Check the density-matrix invariants after every step.
    pub check_invariants: bool,
    /// Stored samples per trajectory lie between this and twice this.
    pub max_samples: usize,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        SteadyOptions {
            tolerances: Tolerances::default(),
            window: 5.0,
            rel_tol: 1e-6,
            abs_tol: 1e-9,
            t_max: 1e4,
            polish: true,
            check_invariants: true,
            max_samples: 20_000,
        }
    }
}

/// The recorded history of one integration.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub magnetization: Vec<f64>,
    pub final_state: DensityMatrix,
    pub final_coordinates: CVec,
    pub steady: bool,
    pub invariants: InvariantReport,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("at least the initial sample")
    }
}

/// The generator with per-step Hermitization that remembers the largest
/// pre-Hermitization error.
struct Checked<'a> {
    g: &'a Generator,
    herm: Cell<f64>,
}

impl OdeSystem for Checked<'_> {
    fn dim(&self) -> usize {
        self.g.dim()
    }

    fn rhs(&self, _t: f64, y: &CVec, dy: &mut CVec) -> Result<()> {
        self.g.eval(y, dy);
        Ok(())
    }

    fn post_step(&self, _t: f64, y: &mut CVec) -> Result<()> {
        let e = self.g.hermiticity_error(y);
        self.herm.set(self.herm.get().max(e));
        self.g.hermitize(y);
        Ok(())
    }
}

/// Stopping rule applied after each step.
pub enum Stop {
    /// Run to the end time.
    Never,
    /// Stop once |dM/dt| < Γ(rel |M| + abs) holds over a trailing window.
    Steady { window: f64, rel_tol: f64, abs_tol: f64 },
}

/// Integrates from `y0` over `[0, t_end]`.
pub fn integrate(g: &Generator, y0: CVec, t_end: f64, opts: &SteadyOptions, stop: Stop) -> Result<Trajectory> {
    integrate_steps(g, y0, t_end, opts, stop, usize::MAX)
}

/// As [`integrate`], stopping after at most `max_steps` accepted steps.
pub fn integrate_steps(
    g: &Generator,
    y0: CVec,
    t_end: f64,
    opts: &SteadyOptions,
    stop: Stop,
    max_steps: usize,
) -> Result<Trajectory> {
    let sys = Checked { g, herm: Cell::new(0.0) };
    let mut times = Vec::new();
    let mut mags = Vec::new();
    let mut report = InvariantReport::CLEAN;
    let mut quiet_since: Option<f64> = None;
    let mut steady = false;
    let mut steps = 0usize;
    let gamma = g.gamma;
    let budget = opts.max_samples.max(16);
    let mut stride = 1usize;
    let (t_fin, y_fin, stats) = dopri5(&sys, 0.0, y0, t_end, &opts.tolerances, |t, y, dy| {
        let m = g.magnetization(y);
        if steps % stride == 0 {
            times.push(t);
            mags.push(m);
            if times.len() > 2 * budget {
                // Halve the stored history and the sampling rate.
                let keep = |v: &mut Vec<f64>| {
                    let mut k = 0;
                    v.retain(|_| {
                        k += 1;
                        (k - 1) % 2 == 0
                    })
                };
                keep(&mut times);
                keep(&mut mags);
                stride *= 2;
            }
        }
        if opts.check_invariants {
            let mut r = g.invariants(y);
            r.hermiticity_error = sys.herm.get();
            report = report.worst(&r);
            r.check(t)?;
        }
        if m.abs() > 1.0 + 1e-9 || !m.is_finite() {
            return Err(Error::InvariantViolation { time: t, detail: format!("|M| = {m}") });
        }
        steps += 1;
        if steps > max_steps {
            return Ok(true);
        }
        if let Stop::Steady { window, rel_tol, abs_tol } = stop {
            let slope = g.magnetization(dy);
            if slope.abs() < gamma * (rel_tol * m.abs() + abs_tol) {
                let since = *quiet_since.get_or_insert(t);
                if t - since >= window / gamma {
                    steady = true;
                    return Ok(true);
                }
            } else {
                quiet_since = None;
            }
        }
        Ok(false)
    })?;
    if times.last() != Some(&t_fin) {
        times.push(t_fin);
        mags.push(g.magnetization(&y_fin));
    }
    if !opts.check_invariants {
        report = g.invariants(&y_fin);
        report.hermiticity_error = sys.herm.get();
    }
    Ok(Trajectory {
        times,
        magnetization: mags,
        final_state: g.density(&y_fin),
        final_coordinates: y_fin,
        steady,
        invariants: report,
        stats,
    })
}

/// Newton iteration on y' = 0 with the trace fixed to 1.
pub fn newton_fixed_point(g: &Generator, y0: &CVec, max_iter: usize) -> Option<CVec> {
    let n = g.dim();
    let tr = CVec::from_iterator(n, (0..n).map(|k| {
        let mut e = CVec::zeros(n);
        e[k] = C64::new(1.0, 0.0);
        g.trace(&e)
    }));
    let mut y = y0.clone();
    let scale = g.linear_part().iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
    for _ in 0..max_iter {
        let f = g.field(&y);
        let fnorm = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let terr = g.trace(&y) - C64::new(1.0, 0.0);
        if fnorm < 1e-14 * scale && terr.norm() < 1e-15 {
            return Some(y);
        }
        let j = g.jacobian(&y);
        let mut aug = CMat::zeros(n + 1, n);
        aug.rows_mut(0, n).copy_from(&j);
        aug.row_mut(n).copy_from(&tr.transpose());
        let mut rhs = DMatrix::<C64>::zeros(n + 1, 1);
        for k in 0..n {
            rhs[(k, 0)] = -f[k];
        }
        rhs[(n, 0)] = -terr;
        let svd = aug.svd(true, true);
        let delta = svd.solve(&rhs, 1e-14).ok()?;
        let step = delta.column(0).into_owned();
        y += &step;
        if g.is_symmetric() && g.odd_norm(y0) == 0.0 {
            // Keep a symmetric start exactly symmetric.
            for k in g.n_even()..n {
                y[k] = C64::new(0.0, 0.0);
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return None;
        }
    }
    let f = g.field(&y);
    let fnorm = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
    (fnorm < 1e-10 * scale).then_some(y)
}

/// A steady-state run.
#[derive(Debug, Clone)]
pub struct SteadyState {
    /// Signed Tr(ρ F_z)/F_max.
    pub m: f64,
    pub rho: DensityMatrix,
    pub coordinates: CVec,
    /// Time at which the window test passed (or t_max).
    pub t_converge: f64,
    pub converged: bool,
    pub polished: bool,
    pub trajectory: Trajectory,
}

/// Integrates from the seeded unpolarized state until M is stationary.
pub fn steady_state(g: &Generator, seed: f64, opts: &SteadyOptions) -> Result<SteadyState> {
    steady_state_from(g, g.seeded_state(seed), opts)
}

pub fn steady_state_from(g: &Generator, y0: CVec, opts: &SteadyOptions) -> Result<SteadyState> {
    let t_max = opts.t_max / g.gamma;
    let stop = Stop::Steady {
        window: opts.window,
        rel_tol: opts.rel_tol,
        abs_tol: opts.abs_tol,
    };
    let traj = integrate(g, y0, t_max, opts, stop)?;
    let mut y = traj.final_coordinates.clone();
    let mut polished = false;
    if traj.steady && opts.polish {
        if let Some(p) = newton_fixed_point(g, &y, 30) {
            let dist = (0..p.len()).map(|k| (p[k] - y[k]).norm()).fold(0.0, f64::max);
            let ok = g.invariants(&p);
            if dist < 1e-3 && ok.min_eigenvalue > -1e-9 && ok.trace_error < 1e-9 {
                y = p;
                g.hermitize(&mut y);
                polished = true;
            }
        }
    }
    Ok(SteadyState {
        m: g.magnetization(&y),
        rho: g.density(&y),
        coordinates: y,
        t_converge: traj.final_time(),
        converged: traj.steady,
        polished,
        trajectory: traj,
    })
}

/// Response time of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseTime {
    /// τ (s)
    pub tau: f64,
    /// τ was set to T₁ because the response was too small.
    pub floored: bool,
}

/// First time `m(t)` reaches 63% of `m_ss`, linearly interpolated between samples.
pub fn crossing_time(times: &[f64], m: &[f64], m_ss: f64) -> Option<f64> {
    let target = RESPONSE_FRACTION * m_ss.abs();
    let sgn = m_ss.signum();
    let v = |k: usize| sgn * m[k];
    if v(0) >= target {
        return Some(times[0]);
    }
    for k in 1..times.len() {
        if v(k) >= target {
            let (a, b) = (v(k - 1), v(k));
            let f = if b > a { (target - a) / (b - a) } else { 1.0 };
            return Some(times[k - 1] + f * (times[k] - times[k - 1]));
        }
    }
    None
}

/// τ from a trajectory, with the T₁ floor when |M_ss| < 10⁻³ · `reference`.
pub fn response_time(traj: &Trajectory, m_ss: f64, t1: f64, reference: f64) -> Result<ResponseTime> {
    if is_floored(m_ss, reference) {
        return Ok(ResponseTime { tau: t1, floored: true });
    }
    if !traj.steady {
        return Err(Error::NotConverged {
            t_max: traj.final_time(),
            last_m: traj.magnetization.last().copied().unwrap_or(0.0),
        });
    }
    crossing_time(&traj.times, &traj.magnetization, m_ss)
        .map(|tau| ResponseTime { tau, floored: false })
        .ok_or_else(|| Error::NoTransition("magnetization never reached 63% of its steady value".into()))
}

/// Summary of one simulated parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub m_ss: f64,
    pub converged: bool,
    pub polished: bool,
    pub t_converge: f64,
    pub tau: f64,
    pub tau_floored: bool,
    pub seed: f64,
    pub invariants: InvariantReport,
    pub steps: usize,
}

/// Steady state and response time at `point`'s parameters; the floor uses
/// `reference` as the maximal magnetization.
pub fn simulate(point: &Point, opts: &SteadyOptions, reference: f64) -> Result<(Simulation, SteadyState)> {
    let g = Generator::new(point)?;
    simulate_with(&g, point.params.seed, point.params.t1(), opts, reference)
}

pub fn simulate_with(g: &Generator, seed: f64, t1: f64, opts: &SteadyOptions, reference: f64) -> Result<(Simulation, SteadyState)> {
    let ss = steady_state(g, seed, opts)?;
    let rt = if ss.converged {
        response_time(&ss.trajectory, ss.m, t1, reference)?
    } else {
        ResponseTime { tau: f64::NAN, floored: false }
    };
    Ok((
        Simulation {
            m_ss: ss.m,
            converged: ss.converged,
            polished: ss.polished,
            t_converge: ss.t_converge,
            tau: rt.tau,
            tau_floored: rt.floored,
            seed,
            invariants: ss.trajectory.invariants,
            steps: ss.trajectory.stats.accepted,
        },
        ss,
    ))
}

/// τ at seeds ε and ε/10; near the boundary τ grows like ln(1/ε).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedSensitivity {
    pub seed: f64,
    pub tau: f64,
    pub tau_tenth_seed: f64,
    /// (τ(ε/10) − τ(ε)) / τ(ε)
    pub relative_shift: f64,
}

pub fn seed_sensitivity(g: &Generator, seed: f64, t1: f64, opts: &SteadyOptions, reference: f64) -> Result<SeedSensitivity> {
    let (a, _) = simulate_with(g, seed, t1, opts, reference)?;
    let (b, _) = simulate_with(g, seed / 10.0, t1, opts, reference)?;
    Ok(SeedSensitivity {
        seed,
        tau: a.tau,
        tau_tenth_seed: b.tau,
        relative_shift: (b.tau - a.tau) / a.tau,
    })
}

/// Projection used by a generator, for reporting.
pub fn projection_label(mode: ProjectionMode) -> &'static str {
    match mode {
        ProjectionMode::HyperfineOnly => "hyperfine-only",
        ProjectionMode::HyperfineZeeman => "hyperfine+zeeman",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::params::SimParams;

    fn gen(params: &SimParams) -> Generator {
        Generator::new(&Point::standalone(params).unwrap()).unwrap()
    }

    #[test]
    fn synthetic_exponential_response() {
        struct Relax(f64, f64);
        impl OdeSystem for Relax {
            fn dim(&self) -> usize {
                1
            }
            fn rhs(&self, _t: f64, y: &CVec, dy: &mut CVec) -> Result<()> {
                dy[0] = (C64::new(self.0, 0.0) - y[0]) / self.1;
                Ok(())
            }
        }
        let tau0 = 0.1;
        let (mut ts, mut ms) = (Vec::new(), Vec::new());
        let y0 = CVec::from_element(1, C64::new(0.0, 0.0));
        dopri5(&Relax(0.4, tau0), 0.0, y0, 2.0, &Tolerances::default(), |t, y, _| {
            ts.push(t);
            ms.push(y[0].re);
            Ok(false)
        })
        .unwrap();
        let tau = crossing_time(&ts, &ms, 0.4).unwrap();
        assert!((tau - tau0).abs() / tau0 < 0.005);
    }

    #[test]
    fn zero_seed_stays_unmagnetized() {
        let g = gen(&SimParams::at(4.5, 3.8));
        let opts = SteadyOptions { t_max: 60.0, ..SteadyOptions::default() };
        let traj = integrate(&g, g.seeded_state(0.0), 60.0 / g.gamma, &opts, Stop::Never).unwrap();
        assert!(traj.magnetization.iter().all(|m| *m == 0.0));
    }

    #[test]
    fn dark_decay_at_gamma() {
        let g = gen(&SimParams::at(0.0, 0.0));
        let y0 = g.coordinates(&DensityMatrix::basis_state(16, 15).0);
        let opts = SteadyOptions::default();
        let traj = integrate(&g, y0, 2.0 / g.gamma, &opts, Stop::Never).unwrap();
        for (t, m) in traj.times.iter().zip(&traj.magnetization).skip(1) {
            let rate = -(m.ln()) / t;
            assert!((rate / g.gamma - 1.0).abs() < 1e-6, "{rate}");
        }
    }
}

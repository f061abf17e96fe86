//! Three-stage weighted power-law fits.

use serde::{Deserialize, Serialize};

use super::forms::{FitForm, Weights};
use super::optimize::{minimize, Problem};
use crate::error::{Error, Result};

/// Form, weighting and near-maximum exclusion of one fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub form: FitForm,
    pub weights: Weights,
    /// Number of points nearest the maximum of the data that are dropped.
    pub exclusion: usize,
}

impl FitSpec {
    /// Default weights and exclusion for `form`.
    pub fn for_form(form: FitForm) -> Self {
        match form {
            FitForm::Beta | FitForm::Delta => FitSpec {
                form,
                weights: Weights::Uniform,
                exclusion: 0,
            },
            FitForm::Gamma | FitForm::Znu => FitSpec {
                form,
                weights: Weights::InverseCube,
                exclusion: 2,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: u8,
    /// `[amplitude, X₀, exponent]`
    pub params: [f64; 3],
    pub cost: f64,
    pub method: String,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preferred {
    PowerLaw,
    Linear,
}

/// Power law against M ∝ H on the same log-log data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub slope: f64,
    pub slope_err: f64,
    pub aic_power_law: f64,
    pub aic_linear: f64,
    pub preferred: Preferred,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub form: FitForm,
    pub exponent: f64,
    pub exponent_err: f64,
    pub critical_value: Option<f64>,
    pub critical_err: Option<f64>,
    pub amplitude: f64,
    pub amplitude_err: f64,
    /// sqrt(Σ wᵢ rᵢ²)
    pub residual_norm: f64,
    pub points_used: usize,
    /// Indices into the input series.
    pub excluded: Vec<usize>,
    pub weights: Weights,
    pub stages: Vec<StageReport>,
    pub comparison: Option<ModelComparison>,
}

impl FitResult {
    /// `[amplitude, X₀, exponent]`
    pub fn params(&self) -> [f64; 3] {
        [self.amplitude, self.critical_value.unwrap_or(0.0), self.exponent]
    }
}

fn check_series(x: &[f64], y: &[f64], min_points: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!("series lengths differ: {} vs {}", x.len(), y.len())));
    }
    if x.len() < min_points {
        return Err(Error::InvalidArgument(format!("need at least {min_points} points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("series contains non-finite values".into()));
    }
    if x.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidArgument("abscissa values must be > 0".into()));
    }
    Ok(())
}

/// Indices of the `count` points whose abscissa is nearest that of the maximum of `y`.
pub fn exclusion_indices(x: &[f64], y: &[f64], count: usize) -> Vec<usize> {
    if count == 0 || x.is_empty() {
        return Vec::new();
    }
    let imax = (0..y.len()).max_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap_or(0);
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| (x[a] - x[imax]).abs().total_cmp(&(x[b] - x[imax]).abs()).then(a.cmp(&b)));
    idx.truncate(count);
    idx.sort_unstable();
    idx
}

fn candidates(form: FitForm, x: &[f64], y: &[f64]) -> Vec<f64> {
    let (xmin, xmax) = x.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let span = |lo: f64, hi: f64, n: usize| super::super::sweep::linspace(lo, hi, n);
    match form {
        FitForm::Beta => {
            let ymax = y.iter().cloned().fold(0.0, f64::max);
            let thr = 1e-6 * ymax;
            let first_nz = x
                .iter()
                .zip(y)
                .filter(|(_, &v)| v > thr)
                .map(|(&v, _)| v)
                .fold(f64::INFINITY, f64::min);
            let last_zero = x
                .iter()
                .zip(y)
                .filter(|(&xv, &v)| v <= thr && xv < first_nz)
                .map(|(&v, _)| v)
                .fold(f64::NAN, f64::max);
            let lo = if last_zero.is_nan() { 0.5 * xmin } else { last_zero };
            span(0.8 * lo, (1.2 * first_nz).min(xmax), 61)
        }
        FitForm::Gamma => span(xmax * (1.0 + 1e-6), 1.5 * xmax, 61),
        FitForm::Znu => span(xmin / 1.5, xmin * (1.0 - 1e-6), 61),
        FitForm::Delta => Vec::new(),
    }
}

/// Amplitude and exponent from a log-log regression at fixed X₀.
fn log_start(form: FitForm, x: &[f64], y: &[f64], x0: f64) -> Option<[f64; 3]> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter_map(|(&xi, &yi)| {
            let t = match form {
                FitForm::Gamma => x0 / xi - 1.0,
                _ => 1.0 - x0 / xi,
            };
            (t > 0.0 && yi > 0.0).then(|| (t.ln(), yi.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let (s, c, _) = linear_regression(&pts)?;
    let e = match form {
        FitForm::Beta => s,
        _ => -s,
    };
    (e.is_finite() && e > 0.0).then(|| [c.exp(), x0, e])
}

/// Slope, intercept and slope standard error of an unweighted line fit.
fn linear_regression(pts: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let s = sxy / sxx;
    let c = my - s * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - c - s * p.0).powi(2)).sum();
    let err = if pts.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    Some((s, c, err))
}

fn stage(n: u8, o: &super::optimize::Outcome) -> StageReport {
    StageReport {
        stage: n,
        params: o.p,
        cost: o.cost,
        method: o.method.into(),
        iterations: o.iterations,
    }
}

/// Stage 1 fits the exponent over a grid of fixed X₀, stage 2 fits X₀ at
/// that exponent, stage 3 frees all parameters.
pub fn three_step_fit(x: &[f64], y: &[f64], spec: &FitSpec) -> Result<FitResult> {
    if spec.form == FitForm::Delta {
        return fit_delta(x, y);
    }
    check_series(x, y, 6)?;
    let ymax = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ymin = y.iter().cloned().fold(f64::INFINITY, f64::min);
    match spec.form {
        FitForm::Beta if ymax <= 0.0 => {
            return Err(Error::NoTransition("all-zero magnetization series".into()));
        }
        FitForm::Gamma | FitForm::Znu if ymin <= 0.0 => {
            return Err(Error::InvalidArgument(format!("{} series must be positive", spec.form.name())));
        }
        FitForm::Znu if ymax - ymin <= 1e-9 * ymax => {
            return Err(Error::NoTransition("no divergence detected: constant response time".into()));
        }
        FitForm::Gamma if ymax - ymin <= 1e-9 * ymax => {
            return Err(Error::NoTransition("no divergence detected: constant susceptibility".into()));
        }
        _ => {}
    }

    let excluded = exclusion_indices(x, y, spec.exclusion);
    let (xs, ys): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .enumerate()
        .filter(|(i, _)| !excluded.contains(i))
        .map(|(_, (&a, &b))| (a, b))
        .unzip();
    if xs.len() < 4 {
        return Err(Error::InvalidArgument("fewer than 4 points left after exclusion".into()));
    }
    let pb = Problem {
        form: spec.form,
        weights: spec.weights,
        x: &xs,
        y: &ys,
    };

    let s1 = candidates(spec.form, &xs, &ys)
        .into_iter()
        .filter_map(|x0| log_start(spec.form, &xs, &ys, x0).and_then(|p| minimize(&pb, p, &[0, 2])))
        .filter(|o| o.cost.is_finite())
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .ok_or_else(|| Error::FitFailed {
            stage: 1,
            detail: "no X₀ candidate gave a finite fit".into(),
        })?;
    let s2 = minimize(&pb, s1.p, &[0, 1]).ok_or_else(|| Error::FitFailed {
        stage: 2,
        detail: format!("from {:?}", s1.p),
    })?;
    let s3 = minimize(&pb, s2.p, &[0, 1, 2]).ok_or_else(|| Error::FitFailed {
        stage: 3,
        detail: format!("from {:?}", s2.p),
    })?;
    if !(s3.p.iter().all(|v| v.is_finite()) && s3.cost.is_finite()) {
        return Err(Error::FitFailed {
            stage: 3,
            detail: "non-finite parameters".into(),
        });
    }

    let errs = pb
        .sandwich_covariance(&s3.p, &[0, 1, 2])
        .map(|c| [0, 1, 2].map(|k| c[(k, k)].max(0.0).sqrt()))
        .unwrap_or([f64::NAN; 3]);
    Ok(FitResult {
        form: spec.form,
        exponent: s3.p[2],
        exponent_err: errs[2],
        critical_value: Some(s3.p[1]),
        critical_err: Some(errs[1]),
        amplitude: s3.p[0],
        amplitude_err: errs[0],
        residual_norm: s3.cost.sqrt(),
        points_used: xs.len(),
        excluded,
        weights: spec.weights,
        stages: vec![stage(1, &s1), stage(2, &s2), stage(3, &s3)],
        comparison: None,
    })
}

pub fn fit_beta(x: &[f64], m: &[f64]) -> Result<FitResult> {
    three_step_fit(x, m, &FitSpec::for_form(FitForm::Beta))
}

pub fn fit_gamma(x: &[f64], chi: &[f64]) -> Result<FitResult> {
    three_step_fit(x, chi, &FitSpec::for_form(FitForm::Gamma))
}

pub fn fit_znu(x: &[f64], tau: &[f64]) -> Result<FitResult> {
    three_step_fit(x, tau, &FitSpec::for_form(FitForm::Znu))
}

/// log M = log A + (1/δ) log(H/Γ), compared against M ∝ H.
pub fn fit_delta(h: &[f64], m: &[f64]) -> Result<FitResult> {
    check_series(h, m, 3)?;
    if m.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidArgument("δ fit needs positive M".into()));
    }
    let pts: Vec<(f64, f64)> = h.iter().zip(m).map(|(a, b)| (a.ln(), b.ln())).collect();
    let (s, c, s_err) =
        linear_regression(&pts).ok_or_else(|| Error::InvalidArgument("bias values must not all be equal".into()))?;
    if !(s > 0.0) {
        return Err(Error::NoTransition(format!("M does not grow with H (log-log slope {s:.3e})")));
    }
    let n = pts.len() as f64;
    let rss: f64 = pts.iter().map(|p| (p.1 - c - s * p.0).powi(2)).sum();
    let c1 = pts.iter().map(|p| p.1 - p.0).sum::<f64>() / n;
    let rss1: f64 = pts.iter().map(|p| (p.1 - c1 - p.0).powi(2)).sum();
    let aic = |r: f64, k: f64| n * (r.max(1e-300) / n).ln() + 2.0 * k;
    let se = if s_err.is_finite() { s_err } else { 0.0 };
    let preferred = if (s - 1.0).abs() <= (3.0 * se).max(0.1) {
        Preferred::Linear
    } else {
        Preferred::PowerLaw
    };
    let amp_err = c.exp() * {
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        se * (sxx / n + mx * mx).sqrt()
    };
    Ok(FitResult {
        form: FitForm::Delta,
        exponent: 1.0 / s,
        exponent_err: se / (s * s),
        critical_value: None,
        critical_err: None,
        amplitude: c.exp(),
        amplitude_err: amp_err,
        residual_norm: rss.sqrt(),
        points_used: pts.len(),
        excluded: Vec::new(),
        weights: Weights::Uniform,
        stages: Vec::new(),
        comparison: Some(ModelComparison {
            slope: s,
            slope_err: se,
            aic_power_law: aic(rss, 2.0),
            aic_linear: aic(rss1, 1.0),
            preferred,
        }),
    })
}

/// Exponent and X₀ under different exclusion counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionShift {
    pub exclusion: usize,
    pub exponent: f64,
    pub critical_value: Option<f64>,
    /// Exponent minus the exponent at the first count.
    pub exponent_shift: f64,
}

pub fn exclusion_sensitivity(x: &[f64], y: &[f64], spec: &FitSpec, counts: &[usize]) -> Result<Vec<ExclusionShift>> {
    let mut out: Vec<ExclusionShift> = Vec::new();
    for &k in counts {
        let r = three_step_fit(x, y, &FitSpec { exclusion: k, ..*spec })?;
        let base = out.first().map_or(r.exponent, |b| b.exponent);
        out.push(ExclusionShift {
            exclusion: k,
            exponent: r.exponent,
            critical_value: r.critical_value,
            exponent_shift: r.exponent - base,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::linspace;

    fn sample(form: FitForm, p: [f64; 3], x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| form.eval(v, &p)).collect()
    }

    #[test]
    fn noiseless_beta() {
        let x = linspace(1.0, 4.0, 40);
        let p = [0.6, 1.6, 0.5];
        let r = fit_beta(&x, &sample(FitForm::Beta, p, &x)).unwrap();
        assert!(r.residual_norm < 1e-10, "{}", r.residual_norm);
        for (a, b) in r.params().iter().zip(p) {
            assert!((a / b - 1.0).abs() < 1e-6, "{:?}", r.params());
        }
    }

    #[test]
    fn noiseless_gamma_and_znu() {
        let x = linspace(0.5, 1.35, 30);
        let p = [2.0, 1.4, 1.0];
        let r = fit_gamma(&x, &sample(FitForm::Gamma, p, &x)).unwrap();
        assert!((r.exponent - 1.0).abs() < 1e-6 && (r.critical_value.unwrap() - 1.4).abs() < 1e-6);
        let x = linspace(1.7, 4.0, 30);
        let p = [0.02, 1.6, 1.0];
        let r = fit_znu(&x, &sample(FitForm::Znu, p, &x)).unwrap();
        assert!((r.exponent - 1.0).abs() < 1e-6 && (r.critical_value.unwrap() - 1.6).abs() < 1e-6);
    }

    #[test]
    fn delta_and_linear_comparison() {
        let h: Vec<f64> = crate::sweep::logspace(1e-3, 1e-1, 20);
        let m: Vec<f64> = h.iter().map(|v| v.powf(1.0 / 3.0)).collect();
        let r = fit_delta(&h, &m).unwrap();
        assert!((r.exponent - 3.0).abs() < 1e-9);
        assert_eq!(r.comparison.unwrap().preferred, Preferred::PowerLaw);
        let lin: Vec<f64> = h.iter().map(|v| v / (v + 1.0)).collect();
        assert_eq!(fit_delta(&h, &lin).unwrap().comparison.unwrap().preferred, Preferred::Linear);
    }

    #[test]
    fn degenerate_series() {
        let x = linspace(1.0, 2.0, 10);
        assert!(matches!(fit_beta(&x, &[0.0; 10]), Err(Error::NoTransition(_))));
        let e = fit_znu(&x, &[0.017; 10]).unwrap_err();
        assert!(e.to_string().contains("no divergence detected"));
    }

    #[test]
    fn exclusion_picks_neighbours_of_maximum() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [1.0, 2.0, 9.0, 3.0, 1.0];
        assert_eq!(exclusion_indices(&x, &y, 1), vec![2]);
        assert_eq!(exclusion_indices(&x, &y, 3), vec![1, 2, 3]);
    }
}

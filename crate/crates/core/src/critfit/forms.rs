//! Power-law forms and their parameter derivatives.

use serde::{Deserialize, Serialize};

/// Parameters are always ordered `[amplitude, X₀, exponent]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitForm {
    /// M = M₀(1 − X₀/X)^β for X > X₀, else 0
    Beta,
    /// χ = χ₀(X₀/X − 1)^(−γ) for X < X₀
    Gamma,
    /// τ = τ₀(1 − X₀/X)^(−zν) for X > X₀
    Znu,
    /// M = A (H/Γ)^(1/δ), fitted in log-log coordinates
    Delta,
}

impl FitForm {
    pub fn name(self) -> &'static str {
        match self {
            FitForm::Beta => "beta",
            FitForm::Gamma => "gamma",
            FitForm::Znu => "znu",
            FitForm::Delta => "delta",
        }
    }

    /// Whether `x` lies in the form's domain for critical value `x0`.
    pub fn in_domain(self, x: f64, x0: f64) -> bool {
        match self {
            FitForm::Beta => x > 0.0,
            FitForm::Gamma => x > 0.0 && x < x0,
            FitForm::Znu => x > 0.0 && x > x0,
            FitForm::Delta => x > 0.0,
        }
    }

    /// f(x; p), NaN outside the domain.
    pub fn eval(self, x: f64, p: &[f64; 3]) -> f64 {
        let [a, x0, e] = *p;
        if !self.in_domain(x, x0) {
            return f64::NAN;
        }
        match self {
            FitForm::Beta => {
                let u = 1.0 - x0 / x;
                if u > 0.0 {
                    a * u.powf(e)
                } else {
                    0.0
                }
            }
            FitForm::Gamma => a * (x0 / x - 1.0).powf(-e),
            FitForm::Znu => a * (1.0 - x0 / x).powf(-e),
            FitForm::Delta => a * x.powf(1.0 / e),
        }
    }

    /// ∂f/∂p at x.
    pub fn gradient(self, x: f64, p: &[f64; 3]) -> [f64; 3] {
        let [a, x0, e] = *p;
        if !self.in_domain(x, x0) {
            return [f64::NAN; 3];
        }
        match self {
            FitForm::Beta => {
                let u = 1.0 - x0 / x;
                if u <= 0.0 {
                    return [0.0; 3];
                }
                let f = u.powf(e);
                [f, -a * e * u.powf(e - 1.0) / x, a * f * u.ln()]
            }
            FitForm::Gamma => {
                let v = x0 / x - 1.0;
                let f = v.powf(-e);
                [f, -a * e * v.powf(-e - 1.0) / x, -a * f * v.ln()]
            }
            FitForm::Znu => {
                let u = 1.0 - x0 / x;
                let f = u.powf(-e);
                [f, a * e * u.powf(-e - 1.0) / x, -a * f * u.ln()]
            }
            FitForm::Delta => {
                let f = x.powf(1.0 / e);
                [f, 0.0, -a * f * x.ln() / (e * e)]
            }
        }
    }
}

/// Weight scheme of the least-squares residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Weights {
    #[default]
    Uniform,
    /// (Γ/X)³ with X in units of Γ
    InverseCube,
}

impl Weights {
    pub fn at(self, x: f64) -> f64 {
        match self {
            Weights::Uniform => 1.0,
            Weights::InverseCube => x.powi(-3),
        }
    }
}

/// Σ wᵢ (f(xᵢ) − yᵢ)²
pub fn weighted_cost(form: FitForm, weights: Weights, x: &[f64], y: &[f64], p: &[f64; 3]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let r = form.eval(xi, p) - yi;
            weights.at(xi) * r * r
        })
        .sum()
}

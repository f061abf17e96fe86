//! Half-integer quantum numbers and Clebsch–Gordan coefficients.

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul};
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// A half-integer stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "f64", try_from = "f64")]
pub struct HalfInt(i32);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);
    pub const HALF: HalfInt = HalfInt(1);

    pub const fn from_doubled(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub const fn from_int(v: i32) -> Self {
        HalfInt(2 * v)
    }

    /// Accepts any finite value that is an exact multiple of 1/2.
    pub fn new(value: f64) -> Result<Self> {
        let twice = 2.0 * value;
        if !twice.is_finite() || (twice - twice.round()).abs() > 1e-9 || twice.abs() > 1e6 {
            return Err(Error::NotHalfInteger(value));
        }
        Ok(HalfInt(twice.round() as i32))
    }

    pub const fn doubled(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    /// The projections −j, −j+1, …, j in ascending order.
    pub fn projections(self) -> impl Iterator<Item = HalfInt> {
        let j = self.0;
        (0..=j).map(move |k| HalfInt(-j + 2 * k))
    }

    /// j(j+1)
    pub fn casimir(self) -> f64 {
        let j = self.value();
        j * (j + 1.0)
    }
}

impl std::ops::Add for HalfInt {
    type Output = HalfInt;
    fn add(self, o: HalfInt) -> HalfInt {
        HalfInt(self.0 + o.0)
    }
}

impl std::ops::Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, o: HalfInt) -> HalfInt {
        HalfInt(self.0 - o.0)
    }
}

impl std::ops::Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt(-self.0)
    }
}

impl From<HalfInt> for f64 {
    fn from(h: HalfInt) -> f64 {
        h.value()
    }
}

impl TryFrom<f64> for HalfInt {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        HalfInt::new(v)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// A Clebsch–Gordan coefficient held as `sign · sqrt(square)`.
///
/// `square` is exact when the factorials fit in `i128`; otherwise it carries the
/// floating fallback and `exact` is `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub exact: Option<Ratio<i128>>,
    pub value: f64,
}

impl Coupling {
    const ZERO: Coupling = Coupling {
        exact: Some(Ratio::new_raw(0, 1)),
        value: 0.0,
    };

    /// The squared coefficient as a float.
    pub fn square(&self) -> f64 {
        match self.exact {
            Some(r) => *r.numer() as f64 / *r.denom() as f64,
            None => self.value * self.value,
        }
    }
}

fn triangle(a: HalfInt, b: HalfInt, c: HalfInt) -> bool {
    let (a, b, c) = (a.0, b.0, c.0);
    c <= a + b && c >= (a - b).abs() && (a + b + c) % 2 == 0
}

fn factorial_i128(n: i32) -> Option<i128> {
    let mut acc: i128 = 1;
    for k in 2..=n as i128 {
        acc = acc.checked_mul(k)?;
    }
    Some(acc)
}

fn ln_factorial(n: i32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// ⟨j1 m1; j2 m2 | J M⟩ in the Condon–Shortley convention (Racah's formula).
pub fn clebsch_gordan(
    j1: HalfInt,
    m1: HalfInt,
    j2: HalfInt,
    m2: HalfInt,
    j: HalfInt,
    m: HalfInt,
) -> Coupling {
    if m1 + m2 != m
        || m1.0.abs() > j1.0
        || m2.0.abs() > j2.0
        || m.0.abs() > j.0
        || (j1.0 + m1.0) % 2 != 0
        || (j2.0 + m2.0) % 2 != 0
        || (j.0 + m.0) % 2 != 0
        || !triangle(j1, j2, j)
    {
        return Coupling::ZERO;
    }
    // All factorial arguments below are integers by the parity checks above.
    let h = |x: i32| x / 2;
    let (a, b, c) = (j1.0, j2.0, j.0);
    let (x1, x2, xm) = (m1.0, m2.0, m.0);

    let pref_num = [
        h(c + a - b),
        h(c - a + b),
        h(a + b - c),
        h(c + xm),
        h(c - xm),
        h(a - x1),
        h(a + x1),
        h(b - x2),
        h(b + x2),
    ];
    let pref_den = h(a + b + c) + 1;

    let kmin = 0.max(h(b - c - x1)).max(h(a - c + x2));
    let kmax = h(a + b - c).min(h(a - x1)).min(h(b + x2));
    let term_args = |k: i32| {
        [
            k,
            h(a + b - c) - k,
            h(a - x1) - k,
            h(b + x2) - k,
            h(c - b + x1) + k,
            h(c - a - x2) + k,
        ]
    };

    // Exact path: C² = (2J+1) Π num! / (J1+J2+J+1)! · S², S = Σ (−1)^k / Π den!.
    let exact = (|| {
        let mut pref = Ratio::from_integer((c + 1) as i128);
        for &n in &pref_num {
            pref = pref.checked_mul(&Ratio::from_integer(factorial_i128(n)?))?;
        }
        pref = pref.checked_div(&Ratio::from_integer(factorial_i128(pref_den)?))?;
        let mut sum = Ratio::from_integer(0i128);
        for k in kmin..=kmax {
            let mut den: i128 = 1;
            for n in term_args(k) {
                den = den.checked_mul(factorial_i128(n)?)?;
            }
            let sign = if k % 2 == 0 { 1 } else { -1 };
            sum = sum.checked_add(&Ratio::new(sign, den))?;
        }
        let sq = pref.checked_mul(&sum.checked_mul(&sum)?)?;
        Some((sq, *sum.numer() >= 0))
    })();

    match exact {
        Some((sq, positive)) => {
            let mag = (*sq.numer() as f64 / *sq.denom() as f64).sqrt();
            Coupling {
                exact: Some(sq),
                value: if positive { mag } else { -mag },
            }
        }
        None => {
            let ln_pref = 0.5
                * (((c + 1) as f64).ln() + pref_num.iter().map(|&n| ln_factorial(n)).sum::<f64>()
                    - ln_factorial(pref_den));
            let mut sum = 0.0;
            for k in kmin..=kmax {
                let ln_den: f64 = term_args(k).iter().map(|&n| ln_factorial(n)).sum();
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sum += sign * (ln_pref - ln_den).exp();
            }
            Coupling {
                exact: None,
                value: sum,
            }
        }
    }
}

/// Floating-point convenience wrapper that validates half-integer inputs.
pub fn clebsch_gordan_f64(j1: f64, m1: f64, j2: f64, m2: f64, j: f64, m: f64) -> Result<f64> {
    Ok(clebsch_gordan(
        HalfInt::new(j1)?,
        HalfInt::new(m1)?,
        HalfInt::new(j2)?,
        HalfInt::new(m2)?,
        HalfInt::new(j)?,
        HalfInt::new(m)?,
    )
    .value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(x: f64) -> HalfInt {
        HalfInt::new(x).unwrap()
    }

    #[test]
    fn two_spin_half_triplet_zero() {
        let c = clebsch_gordan(h(0.5), h(0.5), h(0.5), h(-0.5), h(1.0), h(0.0));
        assert!((c.value - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(c.exact, Some(Ratio::new(1, 2)));
        let s = clebsch_gordan(h(0.5), h(-0.5), h(0.5), h(0.5), h(0.0), h(0.0));
        assert!((s.value + 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn stretched_state_is_unity() {
        for twice in 1..30 {
            let j = HalfInt::from_doubled(twice);
            let c = clebsch_gordan(j, j, j, j, j + j, j + j);
            assert!((c.value - 1.0).abs() < 1e-12);
            if twice < 8 {
                assert_eq!(c.exact, Some(Ratio::from_integer(1)));
            }
        }
    }

    #[test]
    fn selection_rules_give_zero() {
        assert_eq!(clebsch_gordan(h(1.0), h(1.0), h(1.0), h(0.0), h(2.0), h(0.0)).value, 0.0);
        assert_eq!(clebsch_gordan(h(1.0), h(0.0), h(1.0), h(0.0), h(3.0), h(0.0)).value, 0.0);
    }

    #[test]
    fn known_d1_value() {
        // ⟨3 3; 1 −1 | 4 2⟩² = 1/28
        let c = clebsch_gordan(h(3.0), h(3.0), h(1.0), h(-1.0), h(4.0), h(2.0));
        assert_eq!(c.exact, Some(Ratio::new(1, 28)));
    }

    #[test]
    fn unitarity_over_coupled_states() {
        let (j1, j2) = (h(3.5), h(0.5));
        for m1 in j1.projections() {
            for m2 in j2.projections() {
                let mut total = 0.0;
                for jj in [h(3.0), h(4.0)] {
                    total += clebsch_gordan(j1, m1, j2, m2, jj, m1 + m2).square();
                }
                assert!((total - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn floating_fallback_agrees_with_exact() {
        // Large enough to overflow the exact path but still well conditioned.
        let (j1, j2, j) = (h(20.0), h(19.0), h(25.0));
        let c = clebsch_gordan(j1, h(3.0), j2, h(-1.0), j, h(2.0));
        assert!(c.exact.is_none());
        let mut total = 0.0;
        for jj in 1..=39 {
            total += clebsch_gordan(j1, h(3.0), j2, h(-1.0), h(jj as f64), h(2.0)).square();
        }
        assert!((total - 1.0).abs() < 1e-8, "{total}");
    }

    #[test]
    fn rejects_non_half_integers() {
        assert!(clebsch_gordan_f64(0.3, 0.0, 0.5, 0.5, 1.0, 0.5).is_err());
        assert!(HalfInt::new(1.25).is_err());
    }
}

//! Damped Gauss–Newton with a simplex fallback.

use nalgebra::{DMatrix, DVector};

use super::forms::{FitForm, Weights};

pub(crate) struct Problem<'a> {
    pub form: FitForm,
    pub weights: Weights,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

impl Problem<'_> {
    pub fn cost(&self, p: &[f64; 3]) -> f64 {
        let c = super::forms::weighted_cost(self.form, self.weights, self.x, self.y, p);
        if c.is_finite() {
            c
        } else {
            f64::INFINITY
        }
    }

    /// Weighted residuals and Jacobian restricted to the `free` parameters.
    fn linearize(&self, p: &[f64; 3], free: &[usize]) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.x.len();
        let mut r = DVector::zeros(n);
        let mut j = DMatrix::zeros(n, free.len());
        for (i, (&xi, &yi)) in self.x.iter().zip(self.y).enumerate() {
            let sw = self.weights.at(xi).sqrt();
            r[i] = sw * (self.form.eval(xi, p) - yi);
            let g = self.form.gradient(xi, p);
            for (c, &k) in free.iter().enumerate() {
                j[(i, c)] = sw * g[k];
            }
        }
        (r, j)
    }

    /// Heteroscedasticity-consistent covariance with leverage correction (HC3):
    /// A⁻¹ (Σ rᵢ² gᵢgᵢᵀ / (1 − hᵢ)²) A⁻¹ with A = JᵀWJ and hᵢ = gᵢᵀA⁻¹gᵢ.
    pub fn sandwich_covariance(&self, p: &[f64; 3], free: &[usize]) -> Option<DMatrix<f64>> {
        let (r, j) = self.linearize(p, free);
        let a_inv = (j.transpose() * &j).try_inverse()?;
        let mut meat = DMatrix::zeros(free.len(), free.len());
        for i in 0..j.nrows() {
            let row = j.row(i);
            let h = (row * &a_inv * row.transpose())[(0, 0)].min(1.0 - 1e-12);
            meat += row.transpose() * row * (r[i] * r[i] / ((1.0 - h) * (1.0 - h)));
        }
        Some(&a_inv * meat * &a_inv)
    }
}

pub(crate) struct Outcome {
    pub p: [f64; 3],
    pub cost: f64,
    pub iterations: usize,
    pub method: &'static str,
}

fn set(p: &[f64; 3], free: &[usize], v: &DVector<f64>) -> [f64; 3] {
    let mut q = *p;
    for (c, &k) in free.iter().enumerate() {
        q[k] = v[c];
    }
    q
}

pub(crate) fn levenberg_marquardt(pb: &Problem, p0: [f64; 3], free: &[usize], max_iter: usize) -> Option<Outcome> {
    let mut p = p0;
    let mut cost = pb.cost(&p);
    if !cost.is_finite() {
        return None;
    }
    let mut lambda = 1e-3;
    for it in 0..max_iter {
        let (r, j) = pb.linearize(&p, free);
        if !j.iter().all(|v| v.is_finite()) {
            return None;
        }
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        if g.amax() <= 1e-30 {
            return Some(Outcome { p, cost, iterations: it, method: "levenberg-marquardt" });
        }
        let mut improved = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for k in 0..free.len() {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let cur = DVector::from_iterator(free.len(), free.iter().map(|&k| p[k]));
            let q = set(&p, free, &(&cur + &step));
            let c = pb.cost(&q);
            if c < cost {
                let rel = step.iter().zip(cur.iter()).map(|(s, v)| s.abs() / v.abs().max(1e-12)).fold(0.0, f64::max);
                let drop = cost - c;
                p = q;
                cost = c;
                lambda = (lambda / 5.0).max(1e-15);
                improved = true;
                if rel < 1e-13 || drop <= 1e-15 * cost {
                    return Some(Outcome { p, cost, iterations: it + 1, method: "levenberg-marquardt" });
                }
                break;
            }
            lambda *= 8.0;
            if lambda > 1e16 {
                break;
            }
        }
        if !improved {
            return Some(Outcome { p, cost, iterations: it, method: "levenberg-marquardt" });
        }
    }
    Some(Outcome { p, cost, iterations: max_iter, method: "levenberg-marquardt" })
}

/// Nelder–Mead on the free parameters.
pub(crate) fn nelder_mead(pb: &Problem, p0: [f64; 3], free: &[usize], max_iter: usize) -> Option<Outcome> {
    let d = free.len();
    let f = |v: &DVector<f64>| pb.cost(&set(&p0, free, v));
    let start = DVector::from_iterator(d, free.iter().map(|&k| p0[k]));
    let mut simplex: Vec<(DVector<f64>, f64)> = vec![(start.clone(), f(&start))];
    for k in 0..d {
        let mut v = start.clone();
        v[k] += if v[k].abs() > 1e-8 { 0.05 * v[k] } else { 1e-3 };
        let c = f(&v);
        simplex.push((v, c));
    }
    let mut it = 0;
    while it < max_iter {
        it += 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[d].1);
        if worst.is_finite() && (worst - best).abs() <= 1e-15 * best.abs().max(1e-300) {
            break;
        }
        let centroid = simplex[..d].iter().fold(DVector::zeros(d), |acc, s| acc + &s.0) / d as f64;
        let xr = &centroid + (&centroid - &simplex[d].0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = &centroid + (&xr - &centroid) * 2.0;
            let fe = f(&xe);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let xc = &centroid + (&simplex[d].0 - &centroid) * 0.5;
            let fc = f(&xc);
            if fc < simplex[d].1 {
                simplex[d] = (xc, fc);
            } else {
                let b = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    s.0 = &b + (&s.0 - &b) * 0.5;
                    s.1 = f(&s.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (v, cost) = simplex.swap_remove(0);
    cost.is_finite().then(|| Outcome {
        p: set(&p0, free, &v),
        cost,
        iterations: it,
        method: "nelder-mead",
    })
}

/// LM, then simplex when LM fails or its normal matrix is ill-conditioned;
/// the simplex result is polished by LM when possible.
pub(crate) fn minimize(pb: &Problem, p0: [f64; 3], free: &[usize]) -> Option<Outcome> {
    let lm = levenberg_marquardt(pb, p0, free, 500);
    let ill = lm.as_ref().is_none_or(|o| {
        let (_, j) = pb.linearize(&o.p, free);
        let s = (j.transpose() * &j).singular_values();
        let (mx, mn) = (s.max(), s.min());
        !(mn > 0.0 && mx / mn < 1e14)
    });
    if !ill {
        return lm;
    }
    let nm = nelder_mead(pb, lm.as_ref().map_or(p0, |o| o.p), free, 20_000)?;
    let polished = levenberg_marquardt(pb, nm.p, free, 200).filter(|o| o.cost <= nm.cost);
    let best = match (lm, polished) {
        (Some(a), Some(b)) => if a.cost < b.cost { a } else { b },
        (_, Some(b)) => b,
        (Some(a), None) => if a.cost < nm.cost { a } else { nm },
        (None, None) => nm,
    };
    Some(best)
}

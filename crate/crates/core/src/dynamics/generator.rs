//! The projected equation of motion as a quadratic vector field.
//!
//! The surviving density-matrix entries x are mapped to coordinates
//! y = Q x split into parts even and odd under the m → −m reflection, and
//! the dynamics become y' = A y + Σ_i (s_i·y) B_i y.

use nalgebra::{DMatrix, SymmetricEigen};

use super::integrator::{CVec, OdeSystem};
use super::state::{min_eigenvalue_blocks, DensityMatrix, ProjectionMode};
use super::terms::{exchange_vector_parts, Point};
use crate::error::{Error, Result};
use crate::spin::CoupledBasis;
use crate::{CMat, MatExt, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
const BLOCK_TOL: f64 = 1e-12;

/// An involution on the surviving entries: entry k maps to `image[k]` times `sign[k]`.
#[derive(Debug, Clone)]
struct Reflection {
    image: Vec<usize>,
    sign: Vec<f64>,
}

impl Reflection {
    fn apply(&self, x: &CVec) -> CVec {
        let mut out = CVec::zeros(x.len());
        for (k, v) in x.iter().enumerate() {
            out[self.image[k]] = *v * self.sign[k];
        }
        out
    }
}

/// Numerical invariants of one state.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InvariantReport {
    pub trace_error: f64,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

impl InvariantReport {
    /// Neutral element of [`InvariantReport::worst`].
    pub const CLEAN: InvariantReport = InvariantReport {
        trace_error: 0.0,
        hermiticity_error: 0.0,
        min_eigenvalue: f64::INFINITY,
    };

    pub fn worst(&self, other: &InvariantReport) -> InvariantReport {
        InvariantReport {
            trace_error: self.trace_error.max(other.trace_error),
            hermiticity_error: self.hermiticity_error.max(other.hermiticity_error),
            min_eigenvalue: self.min_eigenvalue.min(other.min_eigenvalue),
        }
    }

    pub fn check(&self, time: f64) -> Result<()> {
        use super::state::{HERMITICITY_TOL, POSITIVITY_TOL, TRACE_TOL};
        let fail = |detail: String| Err(Error::InvariantViolation { time, detail });
        if self.trace_error > TRACE_TOL {
            return fail(format!("trace drift {:.3e}", self.trace_error));
        }
        if self.hermiticity_error > HERMITICITY_TOL {
            return fail(format!("non-Hermitian by {:.3e}", self.hermiticity_error));
        }
        if self.min_eigenvalue < -POSITIVITY_TOL {
            return fail(format!("eigenvalue {:.3e}", self.min_eigenvalue));
        }
        Ok(())
    }
}


#[derive(Debug, Clone)]
pub struct Generator {
    pub mode: ProjectionMode,
    basis: CoupledBasis,
    active: Vec<(usize, usize)>,
    /// Index of the transposed entry (c, r) for each active (r, c).
    transpose: Vec<usize>,
    /// y = Q x
    q: CMat,
    n_even: usize,
    symmetric: bool,
    a: CMat,
    b: [CMat; 3],
    s: [CVec; 3],
    fz: CVec,
    sz: CVec,
    spin_z: CMat,
    tr: CVec,
    exchange: bool,
    pub gamma: f64,
}

fn matvec_into(m: &CMat, y: &CVec, out: &mut CVec, beta: C64) {
    out.gemv(C64::new(1.0, 0.0), m, y, beta);
}

impl Generator {
    pub fn new(point: &Point) -> Result<Generator> {
        let basis = point.basis().clone();
        let mode = point.params.projection;
        let n = basis.dimension();
        let mut active = Vec::new();
        for r in 0..n {
            for c in 0..n {
                if mode.keeps(&basis, r, c) {
                    active.push((r, c));
                }
            }
        }
        let na = active.len();
        let slot = |r: usize, c: usize| active.iter().position(|&e| e == (r, c));
        let transpose: Vec<usize> = active.iter().map(|&(r, c)| slot(c, r).expect("closed under transpose")).collect();

        let c_ex = point.exchange_coefficient();
        let spin = point.spin();
        let mut a = CMat::zeros(na, na);
        let mut b = [CMat::zeros(na, na), CMat::zeros(na, na), CMat::zeros(na, na)];
        let mut probe = CMat::zeros(n, n);
        for (k, &(r, c)) in active.iter().enumerate() {
            probe[(r, c)] = C64::new(1.0, 0.0);
            let out = point.linear_rhs(&probe)?;
            for (j, &(rr, cc)) in active.iter().enumerate() {
                a[(j, k)] = out[(rr, cc)];
            }
            if c_ex != 0.0 {
                let v = exchange_vector_parts(&probe, spin);
                for i in 0..3 {
                    for (j, &(rr, cc)) in active.iter().enumerate() {
                        b[i][(j, k)] = v[i][(rr, cc)] * c_ex;
                    }
                }
            }
            probe[(r, c)] = ZERO;
        }
        let comps = spin.components();
        let s: [CVec; 3] = std::array::from_fn(|i| CVec::from_iterator(na, active.iter().map(|&(r, c)| comps[i][(c, r)])));
        let f_max = point.params.atom.f_max();
        let fz = CVec::from_iterator(
            na,
            active.iter().map(|&(r, c)| if r == c { C64::new(basis.states[r].m.value() / f_max, 0.0) } else { ZERO }),
        );
        let tr = CVec::from_iterator(na, active.iter().map(|&(r, c)| if r == c { C64::new(1.0, 0.0) } else { ZERO }));
        let sz = s[2].clone();

        if mode == ProjectionMode::HyperfineZeeman {
            for m in std::iter::once(&mut a).chain(b.iter_mut()) {
                m.apply(|v| *v = C64::new(v.re, 0.0));
            }
        }

        let mut g = Generator {
            mode,
            basis,
            active,
            transpose,
            q: CMat::identity(na, na),
            n_even: na,
            symmetric: false,
            a,
            b,
            s,
            fz,
            sz,
            spin_z: comps[2].clone(),
            tr,
            exchange: c_ex != 0.0,
            gamma: point.params.gamma,
        };
        if let Some(refl) = g.find_reflection() {
            g.adapt(&refl);
        } else {
            log::debug!("no exact m → −m symmetry; odd coordinates are not decoupled");
        }
        Ok(g)
    }

    fn mirror(&self, k: usize) -> usize {
        let b = &self.basis;
        let s = b.states[k];
        b.index_of(s.f, -s.m).expect("m → −m stays in the manifold")
    }

    fn nonlinear(&self, x: &CVec) -> CVec {
        let mut out = CVec::zeros(x.len());
        if self.exchange {
            for i in 0..3 {
                let m = self.s[i].dot(x);
                if m != ZERO {
                    out.gemv(m, &self.b[i], x, C64::new(1.0, 0.0));
                }
            }
        }
        out
    }

    /// The first candidate reflection that commutes with the whole vector field
    /// and flips M.
    fn find_reflection(&self) -> Option<Reflection> {
        let na = self.active.len();
        let probe = CVec::from_iterator(
            na,
            (0..na).map(|k| C64::new((1.3 * k as f64 + 0.7).sin(), (0.9 * k as f64 + 0.2).cos()) * 0.05),
        );
        let idx = |r: usize, c: usize| self.active.iter().position(|&e| e == (r, c));
        for (transposed, phased) in [(false, false), (false, true), (true, false), (true, true)] {
            let mut image = Vec::with_capacity(na);
            let mut sign = Vec::with_capacity(na);
            for &(r, c) in &self.active {
                let (pr, pc) = (self.mirror(r), self.mirror(c));
                let target = if transposed { idx(pc, pr) } else { idx(pr, pc) };
                let Some(t) = target else { break };
                image.push(t);
                let dm = (self.basis.states[r].m - self.basis.states[c].m).doubled() / 2;
                sign.push(if phased && dm.rem_euclid(2) == 1 { -1.0 } else { 1.0 });
            }
            if image.len() != na {
                continue;
            }
            let refl = Reflection { image, sign };
            let lin = &self.a * &probe;
            let ok_lin = (refl.apply(&lin) - &self.a * refl.apply(&probe)).amax_c() <= 1e-10 * lin.amax_c().max(1e-300);
            let nl = self.nonlinear(&probe);
            let ok_nl = (refl.apply(&nl) - self.nonlinear(&refl.apply(&probe))).amax_c() <= 1e-10 * nl.amax_c().max(1e-300) + 1e-300;
            let ok_m = (refl.apply(&self.fz) + &self.fz).amax_c() < 1e-14;
            if ok_lin && ok_nl && ok_m {
                return Some(refl);
            }
        }
        None
    }

    /// Rewrites the field in reflection-adapted coordinates and zeros the
    /// couplings that the symmetry forbids.
    fn adapt(&mut self, refl: &Reflection) {
        let na = self.active.len();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut even_rows = Vec::new();
        let mut odd_rows = Vec::new();
        for k in 0..na {
            let t = refl.image[k];
            if t == k {
                let mut row = vec![0.0; na];
                row[k] = 1.0;
                if refl.sign[k] > 0.0 {
                    even_rows.push(row);
                } else {
                    odd_rows.push(row);
                }
            } else if k < t {
                let sg = refl.sign[k];
                let mut e = vec![0.0; na];
                e[k] = h;
                e[t] = sg * h;
                let mut o = vec![0.0; na];
                o[k] = h;
                o[t] = -sg * h;
                even_rows.push(e);
                odd_rows.push(o);
            }
        }
        self.n_even = even_rows.len();
        let q = DMatrix::from_fn(na, na, |i, j| {
            let row = if i < self.n_even { &even_rows[i] } else { &odd_rows[i - self.n_even] };
            C64::new(row[j], 0.0)
        });
        let qt = q.transpose();
        let ne = self.n_even;
        let clean_mat = |m: &CMat| -> CMat {
            let mut t = &q * m * &qt;
            let scale = t.max_abs();
            for (r0, c0, rn, cn) in [(0, ne, ne, na - ne), (ne, 0, na - ne, ne)] {
                let blk = t.view((r0, c0), (rn, cn)).iter().map(|v| v.norm()).fold(0.0, f64::max);
                if blk <= BLOCK_TOL * scale {
                    t.view_mut((r0, c0), (rn, cn)).fill(ZERO);
                }
            }
            t
        };
        let clean_vec = |v: &CVec| -> CVec {
            let mut t = &q * v;
            let scale = t.amax_c();
            for (r0, rn) in [(0, ne), (ne, na - ne)] {
                let part = t.rows(r0, rn).iter().map(|v| v.norm()).fold(0.0, f64::max);
                if part <= BLOCK_TOL * scale {
                    t.rows_mut(r0, rn).fill(ZERO);
                }
            }
            t
        };
        self.a = clean_mat(&self.a);
        for i in 0..3 {
            self.b[i] = clean_mat(&self.b[i]);
            self.s[i] = clean_vec(&self.s[i]);
        }
        self.fz = clean_vec(&self.fz);
        self.sz = clean_vec(&self.sz);
        self.tr = clean_vec(&self.tr);
        self.q = q;
        self.symmetric = true;
    }

    pub fn dim(&self) -> usize {
        self.active.len()
    }

    /// Number of even coordinates (all of them when no symmetry was found).
    pub fn n_even(&self) -> usize {
        self.n_even
    }

    /// Whether the m → −m reflection decouples the odd coordinates exactly.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Largest odd coordinate (0 for a reflection-symmetric state).
    pub fn odd_norm(&self, y: &CVec) -> f64 {
        y.rows(self.n_even, self.dim() - self.n_even).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn basis(&self) -> &CoupledBasis {
        &self.basis
    }

    pub fn has_exchange(&self) -> bool {
        self.exchange
    }

    pub fn linear_part(&self) -> &CMat {
        &self.a
    }

    pub fn quadratic_parts(&self) -> (&[CMat; 3], &[CVec; 3]) {
        (&self.b, &self.s)
    }

    pub fn coordinates(&self, rho: &CMat) -> CVec {
        let x = CVec::from_iterator(self.dim(), self.active.iter().map(|&(r, c)| rho[(r, c)]));
        &self.q * x
    }

    pub fn matrix(&self, y: &CVec) -> CMat {
        let x = self.q.tr_mul(y);
        let n = self.basis.dimension();
        let mut m = CMat::zeros(n, n);
        for (k, &(r, c)) in self.active.iter().enumerate() {
            m[(r, c)] = x[k];
        }
        m
    }

    pub fn density(&self, y: &CVec) -> DensityMatrix {
        DensityMatrix(self.matrix(y))
    }

    /// Tr(ρ F_z)/F_max
    pub fn magnetization(&self, y: &CVec) -> f64 {
        self.fz.dot(y).re
    }

    /// Tr(ρ S_z)
    pub fn electron_polarization(&self, y: &CVec) -> f64 {
        self.sz.dot(y).re
    }

    pub fn trace(&self, y: &CVec) -> C64 {
        self.tr.dot(y)
    }

    /// ρ₀ = P[(1 + 2ε S_z)/n]
    pub fn seeded_state(&self, epsilon: f64) -> CVec {
        let n = self.basis.dimension();
        let rho = (CMat::identity(n, n) + &self.spin_z * C64::new(2.0 * epsilon, 0.0)) / C64::new(n as f64, 0.0);
        self.coordinates(&rho)
    }

    pub fn eval(&self, y: &CVec, dy: &mut CVec) {
        matvec_into(&self.a, y, dy, ZERO);
        if self.exchange {
            for i in 0..3 {
                let m = self.s[i].dot(y);
                if m != ZERO {
                    dy.gemv(m, &self.b[i], y, C64::new(1.0, 0.0));
                }
            }
        }
    }

    pub fn field(&self, y: &CVec) -> CVec {
        let mut dy = CVec::zeros(y.len());
        self.eval(y, &mut dy);
        dy
    }

    /// ∂(y')/∂y
    pub fn jacobian(&self, y: &CVec) -> CMat {
        let mut j = self.a.clone();
        if self.exchange {
            for i in 0..3 {
                let by = &self.b[i] * y;
                j.ger(C64::new(1.0, 0.0), &by, &self.s[i], C64::new(1.0, 0.0));
                let m = self.s[i].dot(y);
                if m != ZERO {
                    j += &self.b[i] * m;
                }
            }
        }
        j
    }

    /// Makes the represented matrix exactly Hermitian (real populations in the
    /// diagonal mode).
    pub fn hermitize(&self, y: &mut CVec) {
        let x = self.q.tr_mul(y);
        let h = CVec::from_iterator(
            x.len(),
            (0..x.len()).map(|k| (x[k] + x[self.transpose[k]].conj()) * 0.5),
        );
        *y = &self.q * h;
    }

    pub fn hermiticity_error(&self, y: &CVec) -> f64 {
        let x = self.q.tr_mul(y);
        (0..x.len()).map(|k| (x[k] - x[self.transpose[k]].conj()).norm()).fold(0.0, f64::max)
    }

    pub fn invariants(&self, y: &CVec) -> InvariantReport {
        let rho = self.matrix(y);
        InvariantReport {
            trace_error: (self.trace(y) - C64::new(1.0, 0.0)).norm(),
            hermiticity_error: self.hermiticity_error(y),
            min_eigenvalue: min_eigenvalue_blocks(&rho, &self.basis, self.mode),
        }
    }

    /// Real eigenvalues of a Hermitian block (exposed for diagnostics).
    pub fn block_spectrum(&self, y: &CVec) -> Vec<f64> {
        let rho = self.matrix(y);
        let mut out = Vec::new();
        for f in self.basis.f_values() {
            let idx = self.basis.manifold(f);
            let b = CMat::from_fn(idx.len(), idx.len(), |r, c| rho[(idx[r], idx[c])]);
            out.extend(SymmetricEigen::new(b).eigenvalues.iter());
        }
        out
    }
}

trait AmaxC {
    fn amax_c(&self) -> f64;
}

impl AmaxC for CVec {
    fn amax_c(&self) -> f64 {
        self.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// The generator as an ODE system with per-step Hermitization.
pub struct Flow<'a> {
    pub generator: &'a Generator,
    pub hermitize: bool,
}

impl OdeSystem for Flow<'_> {
    fn dim(&self) -> usize {
        self.generator.dim()
    }

    fn rhs(&self, _t: f64, y: &CVec, dy: &mut CVec) -> Result<()> {
        self.generator.eval(y, dy);
        Ok(())
    }

    fn post_step(&self, _t: f64, y: &mut CVec) -> Result<()> {
        if self.hermitize {
            self.generator.hermitize(y);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::params::SimParams;
    use crate::dynamics::state::project_coherences;

    fn generator(params: &SimParams) -> (Point, Generator) {
        let p = Point::standalone(params).unwrap();
        let g = Generator::new(&p).unwrap();
        (p, g)
    }

    fn random_state(basis: &CoupledBasis, mode: ProjectionMode, seed: u64) -> CMat {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = CMat::from_fn(16, 16, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let r = &a * a.adjoint();
        let t = r.trace();
        project_coherences(&DensityMatrix(r / t), basis, mode).0
    }

    #[test]
    fn field_matches_direct_evaluation() {
        for mode in [ProjectionMode::HyperfineZeeman, ProjectionMode::HyperfineOnly] {
            let mut params = SimParams::at(2.0, 3.0);
            params.projection = mode;
            params.b_z = 1e-4;
            let (p, g) = generator(&params);
            for seed in 0..5 {
                let rho = random_state(p.basis(), mode, seed);
                let direct = project_coherences(&DensityMatrix(p.rhs(&rho).unwrap()), p.basis(), mode).0;
                let via = g.matrix(&g.field(&g.coordinates(&rho)));
                let err = (&direct - &via).max_abs();
                assert!(err < 1e-9 * direct.max_abs(), "{mode:?}: {err}");
            }
        }
    }

    #[test]
    fn reflection_symmetry_detection() {
        for (mode, b_z, want) in [
            (ProjectionMode::HyperfineZeeman, 1.0, true),
            (ProjectionMode::HyperfineOnly, 0.0, true),
            (ProjectionMode::HyperfineOnly, 1e-4, false),
        ] {
            let mut params = SimParams::at(2.0, 3.0);
            params.projection = mode;
            params.b_z = b_z;
            let (_, g) = generator(&params);
            assert_eq!(g.is_symmetric(), want, "{mode:?} at {b_z} G");
        }
        // Zeeman precession alone is symmetric under the transposed reflection.
        let mut params = SimParams::at(0.0, 3.0);
        params.projection = ProjectionMode::HyperfineOnly;
        params.b_z = 1e-4;
        assert!(generator(&params).1.is_symmetric());
        let (_, g) = generator(&SimParams::at(2.0, 3.0));
        assert_eq!((g.dim(), g.n_even()), (16, 9));
    }

    #[test]
    fn jacobian_matches_finite_difference() {
        let (_, g) = generator(&SimParams::at(2.0, 3.0));
        let y = g.seeded_state(0.05);
        let j = g.jacobian(&y);
        let h = 1e-6;
        for k in 0..g.dim() {
            let mut yp = y.clone();
            yp[k] += h;
            let mut ym = y.clone();
            ym[k] -= h;
            let fd = (g.field(&yp) - g.field(&ym)) / C64::new(2.0 * h, 0.0);
            let col = j.column(k);
            let err = (fd - col).iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(err < 1e-6 * j.max_abs(), "column {k}: {err}");
        }
    }

    #[test]
    fn coordinates_round_trip() {
        let (p, g) = generator(&SimParams::at(1.0, 1.0));
        let rho = random_state(p.basis(), ProjectionMode::HyperfineZeeman, 9);
        assert!((g.matrix(&g.coordinates(&rho)) - &rho).max_abs() < 1e-15);
        let y = g.seeded_state(1e-3);
        assert!((g.trace(&y).re - 1.0).abs() < 1e-15);
        assert!(g.electron_polarization(&y) > 0.0);
    }
}

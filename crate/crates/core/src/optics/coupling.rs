//! Quasi-steady optical coherence, excited-level elimination and repopulation.

use nalgebra::{DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::doppler::DopplerSpec;
use crate::error::{Error, Result};
use crate::spin::{
    angular_momentum_operators, build_basis, dipole_operator, hyperfine_hamiltonian,
    zeeman_hamiltonian, AngularMomenta, AtomSpec, CoupledBasis, HalfInt, Level, VectorOperator,
};
use crate::units::mhz;
use crate::{CMat, MatExt, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Collisional rates (s⁻¹) and the exchange parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionParams {
    pub gamma_c: f64,
    pub gamma_q: f64,
    pub gamma_p: f64,
    pub q_slowdown: f64,
    /// cm³ s⁻¹
    pub sigma_ex_v: f64,
}

impl CollisionParams {
    pub fn cesium_n2() -> Self {
        CollisionParams {
            gamma_c: mhz(1860.0),
            gamma_q: mhz(265.0),
            gamma_p: mhz(219.0),
            q_slowdown: 4.57,
            sigma_ex_v: 7e-10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [self.gamma_c, self.gamma_q, self.gamma_p, self.sigma_ex_v];
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::InvalidArgument("collision rates must be finite and ≥ 0".into()));
        }
        if !(self.q_slowdown > 1.0) {
            return Err(Error::InvalidArgument("slow-down factor must exceed 1".into()));
        }
        Ok(())
    }
}

impl Default for CollisionParams {
    fn default() -> Self {
        Self::cesium_n2()
    }
}

/// A monochromatic field driving the D1 line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalField {
    /// E₀² in calibrated units; only the product with the dipole normalization matters.
    pub amplitude_sq: f64,
    /// Unit complex polarization vector (x, y, z).
    pub polarization: [C64; 3],
    /// Detuning from the reference transition, s⁻¹ (positive is blue).
    pub detuning: f64,
    /// Reference transition (F_g, F_e).
    pub reference: (HalfInt, HalfInt),
    /// Couple only the reference ground manifold.
    pub resolved: bool,
}

impl OpticalField {
    pub const X: [C64; 3] = [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];

    /// σ± polarization ∓(x ± i y)/√2.
    pub fn sigma(sign: f64) -> [C64; 3] {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let s = sign.signum();
        [C64::new(-s * r, 0.0), C64::new(0.0, -r), C64::new(0.0, 0.0)]
    }

    /// The x-polarized pump 700 MHz blue of F_g = 3 → F_e = 4.
    pub fn cesium_pump(amplitude_sq: f64) -> Self {
        OpticalField {
            amplitude_sq,
            polarization: Self::X,
            detuning: mhz(700.0),
            reference: (HalfInt::from_int(3), HalfInt::from_int(4)),
            resolved: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let norm: f64 = self.polarization.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("polarization norm² is {norm}, expected 1")));
        }
        if !(self.amplitude_sq >= 0.0 && self.amplitude_sq.is_finite()) {
            return Err(Error::InvalidArgument("field amplitude² must be ≥ 0".into()));
        }
        Ok(())
    }
}

/// Rabi operator Ω = E₀·D and coherence fraction w for one field (excited × ground).
#[derive(Debug, Clone, PartialEq)]
pub struct DrivenField {
    pub omega: CMat,
    pub w: CMat,
}

impl DrivenField {
    /// Same field with E₀ multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let f = C64::new(factor, 0.0);
        DrivenField {
            omega: &self.omega * f,
            w: &self.w * f,
        }
    }

    /// i(Ω ρ w† − w ρ Ω†), the excited-level feeding.
    pub fn source(&self, rho_g: &CMat) -> CMat {
        let a = &self.omega * rho_g * self.w.adjoint();
        let b = &self.w * rho_g * self.omega.adjoint();
        (a - b) * I
    }

    /// Excitation rate Tr(source) of the unpolarized ground state.
    pub fn absorption_rate(&self) -> f64 {
        let n = self.omega.ncols();
        let rho = CMat::identity(n, n) / C64::new(n as f64, 0.0);
        self.source(&rho).trace().re
    }
}

/// Projector onto the ground manifold `f`.
fn manifold_projector(basis: &CoupledBasis, f: HalfInt) -> CMat {
    let mut p = CMat::zeros(basis.dimension(), basis.dimension());
    for k in basis.manifold(f) {
        p[(k, k)] = C64::new(1.0, 0.0);
    }
    p
}

fn eigen_hermitian(h: &CMat) -> (Vec<f64>, CMat) {
    let n = h.nrows();
    let off = (0..n)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .filter(|&(r, c)| r != c)
        .map(|(r, c)| h[(r, c)].norm())
        .fold(0.0, f64::max);
    if off == 0.0 {
        return ((0..n).map(|k| h[(k, k)].re).collect(), CMat::identity(n, n));
    }
    let eig = SymmetricEigen::new(h.clone());
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// w = ⟨𝓔⁻¹ (E₀·D)⟩ with 𝓔 = H_e − H_g + k·v − Δ − iγ_c, energies measured from the
/// reference transition.
pub fn coherence_fraction(
    field: &OpticalField,
    atom: &AtomSpec,
    basis_g: &CoupledBasis,
    h_g: &CMat,
    h_e: &CMat,
    d: &VectorOperator,
    coll: &CollisionParams,
    dop: &DopplerSpec,
) -> Result<DrivenField> {
    field.validate()?;
    dop.validate()?;
    let mut omega = d.dot(&field.polarization) * C64::new(field.amplitude_sq.sqrt(), 0.0);
    if field.resolved {
        omega = &omega * manifold_projector(basis_g, field.reference.0);
    }
    let ref_g = atom.hyperfine_energy(Level::Ground, field.reference.0);
    let ref_e = atom.hyperfine_energy(Level::Excited, field.reference.1);
    let (eg, ug) = eigen_hermitian(h_g);
    let (ee, ue) = eigen_hermitian(h_e);
    let v = ue.adjoint() * &omega * &ug;
    let nodes = dop.nodes();
    let scale = ee.iter().chain(&eg).fold(field.detuning.abs(), |a, e| a.max(e.abs()));
    let mut w = CMat::zeros(v.nrows(), v.ncols());
    for r in 0..v.nrows() {
        for c in 0..v.ncols() {
            if v[(r, c)] == C64::new(0.0, 0.0) {
                continue;
            }
            let base = (ee[r] - ref_e) - (eg[c] - ref_g) - field.detuning;
            let mut acc = C64::new(0.0, 0.0);
            for &(kv, wt) in &nodes {
                let den = C64::new(base + kv, -coll.gamma_c);
                if den.norm() <= 1e-12 * scale {
                    return Err(Error::SingularResolvent { row: r, col: c });
                }
                acc += wt / den;
            }
            w[(r, c)] = v[(r, c)] * acc;
        }
    }
    Ok(DrivenField {
        omega,
        w: ue * w * ug.adjoint(),
    })
}

/// Everything fixed by the atom and the magnetic field: bases, spin and dipole
/// operators, Hamiltonians.
#[derive(Debug, Clone)]
pub struct OpticalSystem {
    pub atom: AtomSpec,
    pub b_z: f64,
    pub ground: CoupledBasis,
    pub excited: CoupledBasis,
    pub ground_ops: AngularMomenta,
    pub excited_ops: AngularMomenta,
    pub dipole: VectorOperator,
    pub h_ground_hf: CMat,
    pub h_ground: CMat,
    pub h_excited_hf: CMat,
    pub h_excited: CMat,
}

impl OpticalSystem {
    pub fn new(atom: AtomSpec, b_z: f64) -> Self {
        let ground = build_basis(&atom, Level::Ground);
        let excited = build_basis(&atom, Level::Excited);
        let h_ground_hf = hyperfine_hamiltonian(&atom, &ground).matrix;
        let h_excited_hf = hyperfine_hamiltonian(&atom, &excited).matrix;
        let h_ground = &h_ground_hf + zeeman_hamiltonian(&atom, b_z, &ground).matrix;
        let h_excited = &h_excited_hf + zeeman_hamiltonian(&atom, b_z, &excited).matrix;
        OpticalSystem {
            ground_ops: angular_momentum_operators(&ground),
            excited_ops: angular_momentum_operators(&excited),
            dipole: dipole_operator(&ground, &excited),
            atom,
            b_z,
            ground,
            excited,
            h_ground_hf,
            h_ground,
            h_excited_hf,
            h_excited,
        }
    }

    /// Couples `field`; Zeeman energies enter the resolvent only when asked.
    pub fn drive(
        &self,
        field: &OpticalField,
        coll: &CollisionParams,
        dop: &DopplerSpec,
        zeeman_in_resolvent: bool,
    ) -> Result<DrivenField> {
        let (hg, he) = if zeeman_in_resolvent {
            (&self.h_ground, &self.h_excited)
        } else {
            (&self.h_ground_hf, &self.h_excited_hf)
        };
        coherence_fraction(field, &self.atom, &self.ground, hg, he, &self.dipole, coll, dop)
    }

    /// Dipole closure constant λ with Σ_i D_i D_i† = λ·1.
    pub fn dipole_closure(&self) -> f64 {
        dipole_closure(&self.dipole)
    }
}

fn dipole_closure(d: &VectorOperator) -> f64 {
    let [x, y, z] = d.components();
    let sum = x * x.adjoint() + y * y.adjoint() + z * z.adjoint();
    sum.trace().re / sum.nrows() as f64
}

/// (γ_q/λ) Σ_i D_i† ρ_e D_i; the 2/(3D²) prefactor with D² = 2λ/3.
pub fn repopulation(rho_e: &CMat, d: &VectorOperator, coll: &CollisionParams) -> CMat {
    let lambda = dipole_closure(d);
    let [x, y, z] = d.components();
    let sum = x.adjoint() * rho_e * x + y.adjoint() * rho_e * y + z.adjoint() * rho_e * z;
    sum * C64::new(coll.gamma_q / lambda, 0.0)
}

/// The excited-level Liouvillian, factorized once per parameter point.
#[derive(Debug, Clone)]
pub struct ExcitedSolver {
    fields: Vec<DrivenField>,
    lu: nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
    dim: usize,
}

impl ExcitedSolver {
    /// Relative residual above which a solve is reported as failed.
    pub const TOLERANCE: f64 = 1e-8;

    pub fn new(
        fields: &[DrivenField],
        h_e: &CMat,
        s_e: &VectorOperator,
        coll: &CollisionParams,
    ) -> Self {
        let n = h_e.nrows();
        let mut sup = CMat::zeros(n * n, n * n);
        let mut e = CMat::zeros(n, n);
        for k in 0..n * n {
            e[(k % n, k / n)] = C64::new(1.0, 0.0);
            let y = excited_liouvillian(&e, fields, h_e, s_e, coll);
            sup.set_column(k, &DVector::from_column_slice(y.as_slice()));
            e[(k % n, k / n)] = C64::new(0.0, 0.0);
        }
        ExcitedSolver {
            fields: fields.to_vec(),
            lu: sup.lu(),
            dim: n,
        }
    }

    pub fn fields(&self) -> &[DrivenField] {
        &self.fields
    }

    /// Total feeding Σ_f i(Ω ρ_g w† − w ρ_g Ω†).
    pub fn source(&self, rho_g: &CMat) -> CMat {
        let mut src = CMat::zeros(self.dim, self.dim);
        for f in &self.fields {
            src += f.source(rho_g);
        }
        src
    }

    /// Solves 0 = source + L_e(ρ_e).
    pub fn solve(&self, rho_g: &CMat) -> Result<CMat> {
        let src = self.source(rho_g);
        let scale = src.max_abs();
        if scale == 0.0 {
            return Ok(CMat::zeros(self.dim, self.dim));
        }
        let rhs = -DVector::from_column_slice(src.as_slice());
        let x = self.lu.solve(&rhs).ok_or(Error::ExcitedSolve {
            residual: f64::INFINITY,
            tolerance: Self::TOLERANCE,
        })?;
        let rho_e = CMat::from_column_slice(self.dim, self.dim, x.as_slice());
        Ok(rho_e)
    }

    /// Like [`solve`](Self::solve) but also verifies the residual against the
    /// directly applied Liouvillian.
    pub fn solve_checked(
        &self,
        rho_g: &CMat,
        h_e: &CMat,
        s_e: &VectorOperator,
        coll: &CollisionParams,
    ) -> Result<CMat> {
        let rho_e = self.solve(rho_g)?;
        let src = self.source(rho_g);
        let res = excited_liouvillian(&rho_e, &self.fields, h_e, s_e, coll) + &src;
        let rel = res.max_abs() / src.max_abs().max(f64::MIN_POSITIVE);
        if !(rel <= Self::TOLERANCE) {
            return Err(Error::ExcitedSolve {
                residual: rel,
                tolerance: Self::TOLERANCE,
            });
        }
        Ok(rho_e)
    }
}

/// −i[H_e, X] + i Σ(−Ω w† X + X w Ω†) − γ_q X − γ_p(¾X − S·X S).
fn excited_liouvillian(
    x: &CMat,
    fields: &[DrivenField],
    h_e: &CMat,
    s_e: &VectorOperator,
    coll: &CollisionParams,
) -> CMat {
    let mut y = (h_e * x - x * h_e) * (-I);
    for f in fields {
        let a = &f.omega * f.w.adjoint() * x;
        let b = x * &f.w * f.omega.adjoint();
        y += (b - a) * I;
    }
    let [sx, sy, sz] = s_e.components();
    let sxs = sx * x * sx + sy * x * sy + sz * x * sz;
    y - x * C64::new(coll.gamma_q + 0.75 * coll.gamma_p, 0.0) + sxs * C64::new(coll.gamma_p, 0.0)
}

/// Quasi-steady excited density matrix for `rho_g` under a single field.
pub fn excited_quasi_steady(
    rho_g: &CMat,
    field: &DrivenField,
    h_e: &CMat,
    s_e: &VectorOperator,
    coll: &CollisionParams,
) -> Result<CMat> {
    let solver = ExcitedSolver::new(std::slice::from_ref(field), h_e, s_e, coll);
    solver.solve_checked(rho_g, h_e, s_e, coll)
}

/// Ground-level optical channels for a given excited state: depletion
/// i(Xρ − ρX†) with X = Ω†w (anti-Hermitian part only unless `light_shift`),
/// stimulated return i(w†ρ_eΩ − Ω†ρ_e w) and quench repopulation.
pub fn ground_optical(
    rho_g: &CMat,
    rho_e: &CMat,
    fields: &[DrivenField],
    d: &VectorOperator,
    coll: &CollisionParams,
    light_shift: bool,
) -> CMat {
    let mut out = repopulation(rho_e, d, coll);
    for f in fields {
        let x = f.omega.adjoint() * &f.w;
        let xa = (&x - x.adjoint()) * C64::new(0.5, 0.0);
        out += (&xa * rho_g + rho_g * &xa) * I;
        if light_shift {
            let xh = (&x + x.adjoint()) * C64::new(0.5, 0.0);
            out += (&xh * rho_g - rho_g * &xh) * I;
        }
        let s = f.w.adjoint() * rho_e * &f.omega;
        let t = f.omega.adjoint() * rho_e * &f.w;
        out += (s - t) * I;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn system() -> OpticalSystem {
        OpticalSystem::new(AtomSpec::cesium(), 1.0)
    }

    fn unit_pump(sys: &OpticalSystem, dop: &DopplerSpec) -> DrivenField {
        sys.drive(&OpticalField::cesium_pump(1.0), &CollisionParams::default(), dop, false)
            .unwrap()
    }

    fn random_state(seed: u64) -> CMat {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = CMat::from_fn(16, 16, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let r = &a * a.adjoint();
        let t = r.trace();
        r / t
    }

    #[test]
    fn zero_field_gives_zero_w() {
        let sys = system();
        let mut f = OpticalField::cesium_pump(0.0);
        f.amplitude_sq = 0.0;
        let d = sys.drive(&f, &CollisionParams::default(), &DopplerSpec::default(), false).unwrap();
        assert_eq!(d.w.max_abs(), 0.0);
    }

    #[test]
    fn stationary_limit_is_single_resolvent() {
        let sys = system();
        let coll = CollisionParams::default();
        let d = unit_pump(&sys, &DopplerSpec::stationary());
        let atom = &sys.atom;
        let ref_g = atom.hyperfine_energy(Level::Ground, HalfInt::from_int(3));
        let ref_e = atom.hyperfine_energy(Level::Excited, HalfInt::from_int(4));
        for r in 0..16 {
            for c in 0..16 {
                let de = sys.h_excited_hf[(r, r)].re - ref_e;
                let dg = sys.h_ground_hf[(c, c)].re - ref_g;
                let want = d.omega[(r, c)] / C64::new(de - dg - mhz(700.0), -coll.gamma_c);
                assert!((d.w[(r, c)] - want).norm() < 1e-15 * want.norm().max(1e-12));
            }
        }
    }

    #[test]
    fn quadrature_converges() {
        let sys = system();
        let w40 = unit_pump(&sys, &DopplerSpec { quadrature_order: 40, ..DopplerSpec::default() }).w;
        let w80 = unit_pump(&sys, &DopplerSpec { quadrature_order: 80, ..DopplerSpec::default() }).w;
        let rel = (&w40 - &w80).norm() / w80.norm();
        assert!(rel < 1e-6, "{rel}");
    }

    #[test]
    fn w_is_linear_in_field() {
        let sys = system();
        let coll = CollisionParams::default();
        let dop = DopplerSpec::default();
        let a = sys.drive(&OpticalField::cesium_pump(1.0), &coll, &dop, false).unwrap();
        let b = sys.drive(&OpticalField::cesium_pump(4.0), &coll, &dop, false).unwrap();
        assert!((&a.w * C64::new(2.0, 0.0) - &b.w).max_abs() < 1e-15 * b.w.max_abs());
    }

    #[test]
    fn singular_resolvent_is_reported() {
        let sys = system();
        let coll = CollisionParams { gamma_c: 0.0, ..CollisionParams::default() };
        let mut f = OpticalField::cesium_pump(1.0);
        f.detuning = 0.0;
        let err = sys.drive(&f, &coll, &DopplerSpec::stationary(), false).unwrap_err();
        assert!(matches!(err, Error::SingularResolvent { .. }));
    }

    #[test]
    fn stretched_states_are_dark() {
        let sys = system();
        let coll = CollisionParams::default();
        let field = unit_pump(&sys, &DopplerSpec::default()).scaled(100.0);
        for idx in [7, 15] {
            let mut rho = CMat::zeros(16, 16);
            rho[(idx, idx)] = C64::new(1.0, 0.0);
            let rho_e = excited_quasi_steady(&rho, &field, &sys.h_excited, &sys.excited_ops.s, &coll).unwrap();
            assert!(rho_e.norm() < 1e-12);
        }
    }

    #[test]
    fn weak_pump_excitation_is_linear() {
        let sys = system();
        let coll = CollisionParams::default();
        let base = unit_pump(&sys, &DopplerSpec::default());
        let rho = CMat::identity(16, 16) / C64::new(16.0, 0.0);
        let tr = |s: f64| {
            let f = base.scaled(s.sqrt());
            excited_quasi_steady(&rho, &f, &sys.h_excited, &sys.excited_ops.s, &coll)
                .unwrap()
                .trace()
                .re
        };
        let e2 = 1e-6;
        let ratio = tr(2.0 * e2) / tr(e2);
        assert!((ratio - 2.0).abs() < 0.02, "{ratio}");
    }

    #[test]
    fn excited_state_is_hermitian_and_positive() {
        let sys = system();
        let coll = CollisionParams::default();
        let f = unit_pump(&sys, &DopplerSpec::default()).scaled(1e4);
        for seed in 0..5 {
            let rho = random_state(seed);
            let re = excited_quasi_steady(&rho, &f, &sys.h_excited, &sys.excited_ops.s, &coll).unwrap();
            assert!((&re - re.adjoint()).max_abs() < 1e-10 * re.max_abs());
            let ev = SymmetricEigen::new((&re + re.adjoint()) * C64::new(0.5, 0.0)).eigenvalues;
            assert!(ev.min() >= -1e-9 * re.max_abs());
        }
    }

    #[test]
    fn repopulation_conserves_atoms() {
        let sys = system();
        let coll = CollisionParams::default();
        for seed in 0..10 {
            let mut rho_e = random_state(seed + 100);
            rho_e *= C64::new(0.37, 0.0);
            let out = repopulation(&rho_e, &sys.dipole, &coll);
            let ratio = out.trace().re / (coll.gamma_q * rho_e.trace().re);
            assert!((ratio - 1.0).abs() < 1e-10);
        }
        let iso = CMat::identity(16, 16) / C64::new(16.0, 0.0);
        let out = repopulation(&iso, &sys.dipole, &coll);
        let fz = &sys.ground_ops.f.z.matrix;
        assert!((&out * fz - fz * &out).max_abs() < 1e-10 * out.max_abs());
        assert_eq!(repopulation(&CMat::zeros(16, 16), &sys.dipole, &coll).max_abs(), 0.0);
    }

    #[test]
    fn optical_channels_are_trace_free() {
        let sys = system();
        let coll = CollisionParams::default();
        let f = unit_pump(&sys, &DopplerSpec::default()).scaled(1e4);
        for seed in 0..5 {
            let rho = random_state(seed + 7);
            let re = excited_quasi_steady(&rho, &f, &sys.h_excited, &sys.excited_ops.s, &coll).unwrap();
            let out = ground_optical(&rho, &re, std::slice::from_ref(&f), &sys.dipole, &coll, true);
            assert!(out.trace().norm() < 1e-10 * out.max_abs());
        }
    }
}

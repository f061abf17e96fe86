//! Spin, Hamiltonian and dipole operators in the coupled basis.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::io::Write;

use super::angular::{clebsch_gordan, HalfInt};
use super::basis::{CoupledBasis, Level};
use crate::units::{ghz, mhz};
use crate::{CMat, MatExt, Result, C64};

/// Atomic constants. Energies are angular frequencies (s⁻¹); Zeeman couplings
/// are angular frequency per gauss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomSpec {
    pub nuclear_spin: HalfInt,
    pub electron_spin: HalfInt,
    /// Electronic angular momentum of the excited level (1/2 on D1).
    pub excited_j: HalfInt,
    pub a_ground: f64,
    pub a_excited: f64,
    pub g_ground: f64,
    pub g_excited: f64,
}

impl AtomSpec {
    /// Cesium D1 with ordinary-frequency constants converted by 2π.
    pub fn cesium() -> Self {
        AtomSpec {
            nuclear_spin: HalfInt::from_doubled(7),
            electron_spin: HalfInt::HALF,
            excited_j: HalfInt::HALF,
            a_ground: ghz(2.3),
            a_excited: mhz(290.0),
            g_ground: mhz(2.8),
            g_excited: mhz(0.9),
        }
    }

    pub fn hyperfine_constant(&self, level: Level) -> f64 {
        match level {
            Level::Ground => self.a_ground,
            Level::Excited => self.a_excited,
        }
    }

    pub fn zeeman_constant(&self, level: Level) -> f64 {
        match level {
            Level::Ground => self.g_ground,
            Level::Excited => self.g_excited,
        }
    }

    /// Interval-rule energy A/2 [F(F+1) − I(I+1) − J(J+1)] of manifold F.
    pub fn hyperfine_energy(&self, level: Level, f: HalfInt) -> f64 {
        let j = match level {
            Level::Ground => self.electron_spin,
            Level::Excited => self.excited_j,
        };
        0.5 * self.hyperfine_constant(level) * (f.casimir() - self.nuclear_spin.casimir() - j.casimir())
    }

    /// The largest ground-level F, used to normalize magnetization.
    pub fn f_max(&self) -> f64 {
        (self.nuclear_spin + self.electron_spin).value()
    }
}

impl Default for AtomSpec {
    fn default() -> Self {
        Self::cesium()
    }
}

/// A matrix between two coupled bases (square for same-level operators).
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    pub matrix: CMat,
    pub rows: Level,
    pub cols: Level,
}

impl Operator {
    pub fn new(matrix: CMat, rows: Level, cols: Level) -> Self {
        Operator { matrix, rows, cols }
    }

    pub fn square(matrix: CMat, level: Level) -> Self {
        Operator::new(matrix, level, level)
    }

    /// ‖A − A†‖₂ / max(‖A‖₂, tiny).
    pub fn hermiticity_error(&self) -> f64 {
        let m = &self.matrix;
        let diff = m - m.adjoint();
        spectral_norm(&diff) / spectral_norm(m).max(f64::MIN_POSITIVE)
    }

    /// Writes `row,col,re,im` for every entry above roundoff (1e−14 of the largest).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["row", "col", "re", "im"])?;
        let cut = 1e-14 * self.matrix.max_abs();
        for r in 0..self.matrix.nrows() {
            for c in 0..self.matrix.ncols() {
                let v = self.matrix[(r, c)];
                if v.norm() > cut {
                    w.serialize((r, c, v.re, v.im))?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Cartesian components of a vector operator.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorOperator {
    pub x: Operator,
    pub y: Operator,
    pub z: Operator,
}

impl VectorOperator {
    pub fn components(&self) -> [&CMat; 3] {
        [&self.x.matrix, &self.y.matrix, &self.z.matrix]
    }

    fn from_matrices(m: [CMat; 3], rows: Level, cols: Level) -> Self {
        let [x, y, z] = m;
        VectorOperator {
            x: Operator::new(x, rows, cols),
            y: Operator::new(y, rows, cols),
            z: Operator::new(z, rows, cols),
        }
    }

    /// Σ_k v_k A_k for a complex 3-vector v.
    pub fn dot(&self, v: &[C64; 3]) -> CMat {
        let [x, y, z] = self.components();
        x * v[0] + y * v[1] + z * v[2]
    }

    /// Σ_k A_k A_k.
    pub fn squared(&self) -> CMat {
        let [x, y, z] = self.components();
        x * x + y * y + z * z
    }
}

/// Electron, nuclear and total angular momentum of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularMomenta {
    pub s: VectorOperator,
    pub i: VectorOperator,
    pub f: VectorOperator,
}

/// (j_x, j_y, j_z) for spin j, projections ascending.
fn spin_matrices(j: HalfInt) -> [CMat; 3] {
    let ms: Vec<HalfInt> = j.projections().collect();
    let n = ms.len();
    let mut jp = CMat::zeros(n, n);
    let mut jz = CMat::zeros(n, n);
    for (a, &m) in ms.iter().enumerate() {
        jz[(a, a)] = C64::new(m.value(), 0.0);
        if a + 1 < n {
            let mv = m.value();
            jp[(a + 1, a)] = C64::new((j.casimir() - mv * (mv + 1.0)).sqrt(), 0.0);
        }
    }
    let jm = jp.adjoint();
    let jx = (&jp + &jm) * C64::new(0.5, 0.0);
    let jy = (&jp - &jm) * C64::new(0.0, -0.5);
    [jx, jy, jz]
}

fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

fn to_coupled(u: &DMatrix<f64>, x: &CMat) -> CMat {
    let uc = u.map(|v| C64::new(v, 0.0));
    &uc * x * uc.transpose()
}

/// S, I and F = I + S of `basis`, expressed in the coupled basis.
pub fn angular_momentum_operators(basis: &CoupledBasis) -> AngularMomenta {
    let se = spin_matrices(basis.electron_spin);
    let ni = spin_matrices(basis.nuclear_spin);
    let id_s = CMat::identity(se[0].nrows(), se[0].nrows());
    let id_i = CMat::identity(ni[0].nrows(), ni[0].nrows());
    let u = &basis.unitary;
    let s: [CMat; 3] = std::array::from_fn(|k| to_coupled(u, &kron(&se[k], &id_i)));
    let i: [CMat; 3] = std::array::from_fn(|k| to_coupled(u, &kron(&id_s, &ni[k])));
    let f: [CMat; 3] = std::array::from_fn(|k| &s[k] + &i[k]);
    let lvl = basis.level;
    AngularMomenta {
        s: VectorOperator::from_matrices(s, lvl, lvl),
        i: VectorOperator::from_matrices(i, lvl, lvl),
        f: VectorOperator::from_matrices(f, lvl, lvl),
    }
}

/// A I·S for the level of `basis`, assembled on the diagonal from the interval rule
/// so that it is exactly diagonal in the coupled basis.
pub fn hyperfine_hamiltonian(spec: &AtomSpec, basis: &CoupledBasis) -> Operator {
    let diag: Vec<C64> = basis
        .states
        .iter()
        .map(|st| C64::new(spec.hyperfine_energy(basis.level, st.f), 0.0))
        .collect();
    Operator::square(CMat::from_diagonal(&nalgebra::DVector::from_vec(diag)), basis.level)
}

/// g B_z S_z for the level of `basis`; `b_z` in gauss.
pub fn zeeman_hamiltonian(spec: &AtomSpec, b_z: f64, basis: &CoupledBasis) -> Operator {
    let am = angular_momentum_operators(basis);
    let g = spec.zeeman_constant(basis.level);
    Operator::square(&am.s.z.matrix * C64::new(g * b_z, 0.0), basis.level)
}

/// Spherical dipole components D_q (q = −1, 0, +1), excited rows and ground columns,
/// with unit reduced matrix element.
pub fn dipole_spherical(basis_g: &CoupledBasis, basis_e: &CoupledBasis) -> [CMat; 3] {
    let jg = basis_g.electron_spin;
    let je = basis_e.electron_spin;
    let one = HalfInt::from_int(1);
    let id_i = CMat::identity(
        basis_g.nuclear_spin.doubled() as usize + 1,
        basis_g.nuclear_spin.doubled() as usize + 1,
    );
    let ug = basis_g.unitary.map(|v| C64::new(v, 0.0));
    let ue = basis_e.unitary.map(|v| C64::new(v, 0.0));
    std::array::from_fn(|k| {
        let q = HalfInt::from_int(k as i32 - 1);
        let ng = jg.doubled() as usize + 1;
        let ne = je.doubled() as usize + 1;
        let mut d = CMat::zeros(ne, ng);
        for (a, mp) in je.projections().enumerate() {
            for (b, m) in jg.projections().enumerate() {
                d[(a, b)] = C64::new(clebsch_gordan(jg, m, one, q, je, mp).value, 0.0);
            }
        }
        &ue * kron(&d, &id_i) * ug.transpose()
    })
}

/// Cartesian dipole operator D_x, D_y, D_z (excited × ground blocks).
pub fn dipole_operator(basis_g: &CoupledBasis, basis_e: &CoupledBasis) -> VectorOperator {
    let [dm, d0, dp] = dipole_spherical(basis_g, basis_e);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let x = (&dm - &dp) * C64::new(r, 0.0);
    let y = (&dm + &dp) * C64::new(0.0, r);
    VectorOperator::from_matrices([x, y, d0], basis_e.level, basis_g.level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::basis::build_basis;

    fn ground() -> CoupledBasis {
        build_basis(&AtomSpec::cesium(), Level::Ground)
    }

    fn commutator(a: &CMat, b: &CMat) -> CMat {
        a * b - b * a
    }

    #[test]
    fn commutation_relations_hold() {
        for spec in [AtomSpec::cesium(), AtomSpec { nuclear_spin: HalfInt::from_doubled(3), ..AtomSpec::cesium() }] {
            for level in [Level::Ground, Level::Excited] {
                let b = build_basis(&spec, level);
                let am = angular_momentum_operators(&b);
                for v in [&am.s, &am.i, &am.f] {
                    let [x, y, z] = v.components();
                    let i = C64::new(0.0, 1.0);
                    assert!((commutator(x, y) - z * i).max_abs() < 1e-12);
                    assert!((commutator(y, z) - x * i).max_abs() < 1e-12);
                    assert!((commutator(z, x) - y * i).max_abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn fz_is_diagonal_with_m_values() {
        let b = ground();
        let am = angular_momentum_operators(&b);
        let fz = &am.f.z.matrix;
        for (k, st) in b.states.iter().enumerate() {
            assert!((fz[(k, k)].re - st.m.value()).abs() < 1e-12);
        }
        assert!((fz - CMat::from_diagonal(&fz.diagonal())).max_abs() < 1e-12);
        assert!(am.s.z.matrix.trace().norm() < 1e-12);
    }

    #[test]
    fn f_squared_is_casimir_per_manifold() {
        let b = ground();
        let f2 = angular_momentum_operators(&b).f.squared();
        for (k, st) in b.states.iter().enumerate() {
            for c in 0..16 {
                let want = if c == k { st.f.casimir() } else { 0.0 };
                assert!((f2[(k, c)] - C64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn hyperfine_splitting_follows_interval_rule() {
        let spec = AtomSpec::cesium();
        let b = ground();
        let h = hyperfine_hamiltonian(&spec, &b);
        assert!(h.hermiticity_error() < 1e-12);
        for (k, st) in b.states.iter().enumerate() {
            let want = spec.hyperfine_energy(Level::Ground, st.f);
            assert!((h.matrix[(k, k)].re - want).abs() < 1e-12 * spec.a_ground);
        }
        let split = h.matrix[(15, 15)].re - h.matrix[(0, 0)].re;
        assert!((split - 4.0 * spec.a_ground).abs() < 1e-9 * spec.a_ground);
        let am = angular_momentum_operators(&b);
        let f2 = am.f.squared();
        assert!(commutator(&h.matrix, &f2).max_abs() < 1e-12 * spec.a_ground);
        assert!(commutator(&h.matrix, &am.f.z.matrix).max_abs() < 1e-12 * spec.a_ground);
        let [sx, sy, sz] = am.s.components();
        let [ix, iy, iz] = am.i.components();
        let is = (ix * sx + iy * sy + iz * sz) * C64::new(spec.a_ground, 0.0);
        assert!((&is - &h.matrix).max_abs() < 1e-12 * spec.a_ground);
        let zero = hyperfine_hamiltonian(&AtomSpec { a_ground: 0.0, ..spec }, &b);
        assert_eq!(zero.matrix.max_abs(), 0.0);
    }

    #[test]
    fn zeeman_commutes_with_fz() {
        let spec = AtomSpec::cesium();
        let b = ground();
        let hz = zeeman_hamiltonian(&spec, 1.0, &b);
        let fz = angular_momentum_operators(&b).f.z.matrix;
        assert!(commutator(&hz.matrix, &fz).max_abs() < 1e-12 * spec.g_ground);
        assert!(hz.hermiticity_error() < 1e-12);
        // Electron Zeeman scale g·B·(1/2 − (−1/2)) = g·B.
        let up = hz.matrix[(15, 15)].re;
        assert!((2.0 * up - spec.g_ground).abs() < 1e-6 * spec.g_ground);
        assert_eq!(zeeman_hamiltonian(&spec, 0.0, &b).matrix.max_abs(), 0.0);
    }

    #[test]
    fn dipole_selection_rules() {
        let spec = AtomSpec::cesium();
        let g = ground();
        let e = build_basis(&spec, Level::Excited);
        let dq = dipole_spherical(&g, &e);
        for (k, d) in dq.iter().enumerate() {
            let q = k as i32 - 1;
            for (r, se) in e.states.iter().enumerate() {
                for (c, sg) in g.states.iter().enumerate() {
                    if se.m.doubled() != sg.m.doubled() + 2 * q {
                        assert!(d[(r, c)].norm() < 1e-14);
                    }
                }
            }
        }
        // x polarization carries only q = ±1.
        let dx = dipole_operator(&g, &e).x.matrix;
        for (r, se) in e.states.iter().enumerate() {
            for (c, sg) in g.states.iter().enumerate() {
                if se.m == sg.m {
                    assert!(dx[(r, c)].norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn dipole_closure_is_identity() {
        let spec = AtomSpec::cesium();
        let g = ground();
        let e = build_basis(&spec, Level::Excited);
        let d = dipole_operator(&g, &e);
        let [x, y, z] = d.components();
        let sum = x * x.adjoint() + y * y.adjoint() + z * z.adjoint();
        assert!((sum - CMat::identity(16, 16)).max_abs() < 1e-12);
    }

    #[test]
    fn csv_export_lists_nonzero_entries() {
        let b = ground();
        let fz = angular_momentum_operators(&b).f.z;
        let mut buf = Vec::new();
        fz.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        // 16 diagonal entries minus the two m = 0 zeros, plus a header.
        assert_eq!(text.lines().count(), 15);
    }
}

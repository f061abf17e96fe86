//! Ground-level density matrices and the coherence projections.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::CoupledBasis;
use crate::{CMat, MatExt, C64};

/// Which ground coherences survive the projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionMode {
    /// Zero only the F = 3 ↔ F = 4 blocks.
    HyperfineOnly,
    /// Also zero the Zeeman coherences inside each F block (populations only).
    #[default]
    HyperfineZeeman,
}

impl ProjectionMode {
    /// Whether entry (r, c) survives.
    pub fn keeps(self, basis: &CoupledBasis, r: usize, c: usize) -> bool {
        match self {
            ProjectionMode::HyperfineOnly => basis.states[r].f == basis.states[c].f,
            ProjectionMode::HyperfineZeeman => r == c,
        }
    }
}

/// Tolerances of the density-matrix invariants.
pub const TRACE_TOL: f64 = 1e-9;
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-9;

/// A ground-level density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(pub CMat);

impl DensityMatrix {
    pub fn unpolarized(n: usize) -> Self {
        DensityMatrix(CMat::identity(n, n) / C64::new(n as f64, 0.0))
    }

    /// A pure basis state |k⟩⟨k|.
    pub fn basis_state(n: usize, k: usize) -> Self {
        let mut m = CMat::zeros(n, n);
        m[(k, k)] = C64::new(1.0, 0.0);
        DensityMatrix(m)
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// max |ρ − ρ†|
    pub fn hermiticity_error(&self) -> f64 {
        (&self.0 - self.0.adjoint()).max_abs()
    }

    pub fn hermitize(&mut self) {
        self.0 = (&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        SymmetricEigen::new(h).eigenvalues.min()
    }

    /// Tr(ρ A)
    pub fn expectation(&self, op: &CMat) -> C64 {
        (&self.0 * op).trace()
    }

    /// Checks trace, Hermiticity and positivity against the fixed tolerances.
    pub fn validate(&self) -> Result<()> {
        let fail = |detail: String| Err(Error::InvariantViolation { time: 0.0, detail });
        if (self.trace() - 1.0).abs() > TRACE_TOL {
            return fail(format!("trace {}", self.trace()));
        }
        if self.hermiticity_error() > HERMITICITY_TOL {
            return fail(format!("non-Hermitian by {:.3e}", self.hermiticity_error()));
        }
        let ev = self.min_eigenvalue();
        if ev < -POSITIVITY_TOL {
            return fail(format!("eigenvalue {ev:.3e}"));
        }
        Ok(())
    }
}

/// Zeros the coherences removed by `mode`; the diagonal and the trace are untouched.
pub fn project_coherences(rho: &DensityMatrix, basis: &CoupledBasis, mode: ProjectionMode) -> DensityMatrix {
    let n = rho.dim();
    let m = CMat::from_fn(n, n, |r, c| {
        if mode.keeps(basis, r, c) {
            rho.0[(r, c)]
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let out = DensityMatrix(m);
    debug_assert!((out.0.trace() - rho.0.trace()).norm() == 0.0);
    out
}

/// Smallest eigenvalue of a block-diagonal Hermitian matrix, one block per F.
pub(crate) fn min_eigenvalue_blocks(rho: &CMat, basis: &CoupledBasis, mode: ProjectionMode) -> f64 {
    match mode {
        ProjectionMode::HyperfineZeeman => (0..rho.nrows()).map(|k| rho[(k, k)].re).fold(f64::INFINITY, f64::min),
        ProjectionMode::HyperfineOnly => {
            let mut min = f64::INFINITY;
            for f in basis.f_values() {
                let idx = basis.manifold(f);
                let b = CMat::from_fn(idx.len(), idx.len(), |r, c| {
                    0.5 * (rho[(idx[r], idx[c])] + rho[(idx[c], idx[r])].conj())
                });
                min = min.min(SymmetricEigen::new(b).eigenvalues.min());
            }
            min
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{build_basis, AtomSpec, Level};

    fn basis() -> CoupledBasis {
        build_basis(&AtomSpec::cesium(), Level::Ground)
    }

    fn random_rho(seed: u64) -> DensityMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = CMat::from_fn(16, 16, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let r = &a * a.adjoint();
        let t = r.trace();
        DensityMatrix(r / t)
    }

    #[test]
    fn diagonal_state_is_unchanged() {
        let b = basis();
        let rho = DensityMatrix::unpolarized(16);
        for mode in [ProjectionMode::HyperfineOnly, ProjectionMode::HyperfineZeeman] {
            assert_eq!(project_coherences(&rho, &b, mode), rho);
        }
    }

    #[test]
    fn hyperfine_coherences_are_removed() {
        let b = basis();
        let mut m = CMat::identity(16, 16) / C64::new(16.0, 0.0);
        m[(0, 10)] = C64::new(0.01, 0.02);
        m[(10, 0)] = C64::new(0.01, -0.02);
        let out = project_coherences(&DensityMatrix(m), &b, ProjectionMode::HyperfineOnly);
        assert_eq!(out, DensityMatrix::unpolarized(16));
    }

    #[test]
    fn projection_preserves_trace_and_diagonal() {
        let b = basis();
        for seed in 0..20 {
            let rho = random_rho(seed);
            for mode in [ProjectionMode::HyperfineOnly, ProjectionMode::HyperfineZeeman] {
                let p = project_coherences(&rho, &b, mode);
                assert_eq!(p.0.diagonal(), rho.0.diagonal());
                assert_eq!(p.0.trace(), rho.0.trace());
            }
        }
    }

    #[test]
    fn block_eigenvalues_match_full_for_projected_state() {
        let b = basis();
        let rho = project_coherences(&random_rho(3), &b, ProjectionMode::HyperfineOnly);
        let full = rho.min_eigenvalue();
        let blocks = min_eigenvalue_blocks(&rho.0, &b, ProjectionMode::HyperfineOnly);
        assert!((full - blocks).abs() < 1e-14);
    }

    #[test]
    fn validation_flags_bad_states() {
        assert!(DensityMatrix::unpolarized(16).validate().is_ok());
        let mut bad = DensityMatrix::unpolarized(16);
        bad.0[(0, 0)] = C64::new(-0.01, 0.0);
        assert!(bad.validate().is_err());
    }
}

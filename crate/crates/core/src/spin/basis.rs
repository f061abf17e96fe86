//! Coupled |F, m_F⟩ bases.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::angular::{clebsch_gordan, HalfInt};
use super::operators::AtomSpec;

/// Which electronic level a basis describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Ground,
    Excited,
}

/// One coupled-basis label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisState {
    pub f: HalfInt,
    pub m: HalfInt,
}

/// The coupled basis of one level, ordered by ascending F and then ascending m_F.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledBasis {
    pub level: Level,
    pub nuclear_spin: HalfInt,
    /// Electronic angular momentum (S for the ground level, J' for the excited one).
    pub electron_spin: HalfInt,
    pub states: Vec<BasisState>,
    /// Uncoupled labels (m_S, m_I), electron projection outer, both ascending.
    pub uncoupled: Vec<(HalfInt, HalfInt)>,
    /// Real orthogonal change of basis, `coupled = U · uncoupled`.
    pub unitary: DMatrix<f64>,
}

impl CoupledBasis {
    pub fn dimension(&self) -> usize {
        self.states.len()
    }

    /// The distinct F values in ascending order.
    pub fn f_values(&self) -> Vec<HalfInt> {
        let mut out: Vec<HalfInt> = self.states.iter().map(|s| s.f).collect();
        out.dedup();
        out
    }

    /// Index of |F, m⟩, if present.
    pub fn index_of(&self, f: HalfInt, m: HalfInt) -> Option<usize> {
        self.states.iter().position(|s| s.f == f && s.m == m)
    }

    /// Indices of the states belonging to manifold F.
    pub fn manifold(&self, f: HalfInt) -> Vec<usize> {
        (0..self.states.len())
            .filter(|&k| self.states[k].f == f)
            .collect()
    }

    /// JSON manifest listing (index, F, m_F).
    pub fn manifest(&self) -> serde_json::Value {
        let states: Vec<_> = self
            .states
            .iter()
            .enumerate()
            .map(|(k, s)| serde_json::json!({ "index": k, "F": s.f.value(), "m_F": s.m.value() }))
            .collect();
        serde_json::json!({
            "level": self.level,
            "ordering": "ascending F, then ascending m_F",
            "dimension": self.dimension(),
            "states": states,
        })
    }
}

/// Builds the coupled basis of `level` for `spec`.
pub fn build_basis(spec: &AtomSpec, level: Level) -> CoupledBasis {
    let i = spec.nuclear_spin;
    let s = match level {
        Level::Ground => spec.electron_spin,
        Level::Excited => spec.excited_j,
    };
    let uncoupled: Vec<(HalfInt, HalfInt)> = s
        .projections()
        .flat_map(|ms| i.projections().map(move |mi| (ms, mi)))
        .collect();

    let fmin = HalfInt::from_doubled((i.doubled() - s.doubled()).abs());
    let fmax = i + s;
    let mut states = Vec::with_capacity(uncoupled.len());
    let mut f = fmin;
    while f <= fmax {
        states.extend(f.projections().map(|m| BasisState { f, m }));
        f = f + HalfInt::from_int(1);
    }

    let n = states.len();
    let mut unitary = DMatrix::zeros(n, n);
    for (r, st) in states.iter().enumerate() {
        for (c, &(ms, mi)) in uncoupled.iter().enumerate() {
            unitary[(r, c)] = clebsch_gordan(i, mi, s, ms, st.f, st.m).value;
        }
    }
    CoupledBasis {
        level,
        nuclear_spin: i,
        electron_spin: s,
        states,
        uncoupled,
        unitary,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(i2: i32) -> AtomSpec {
        AtomSpec {
            nuclear_spin: HalfInt::from_doubled(i2),
            ..AtomSpec::cesium()
        }
    }

    #[test]
    fn cesium_ground_has_sixteen_states() {
        let b = build_basis(&AtomSpec::cesium(), Level::Ground);
        assert_eq!(b.dimension(), 16);
        assert_eq!(b.f_values(), vec![HalfInt::from_int(3), HalfInt::from_int(4)]);
        assert_eq!(b.manifold(HalfInt::from_int(3)).len(), 7);
        assert_eq!(b.manifold(HalfInt::from_int(4)).len(), 9);
        assert_eq!(b.states[0].m, HalfInt::from_int(-3));
        assert_eq!(b.states[15].m, HalfInt::from_int(4));
    }

    #[test]
    fn spinless_nucleus_is_uncoupled() {
        let b = build_basis(&spec(0), Level::Ground);
        assert_eq!(b.dimension(), 2);
        assert_eq!(b.f_values(), vec![HalfInt::HALF]);
    }

    #[test]
    fn dimension_matches_product_counting() {
        for i2 in 0..10 {
            let b = build_basis(&spec(i2), Level::Ground);
            assert_eq!(b.dimension(), ((i2 + 1) * 2) as usize);
            assert_eq!(b.uncoupled.len(), b.dimension());
        }
        let b = build_basis(&spec(3), Level::Ground);
        assert_eq!(b.f_values(), vec![HalfInt::from_int(1), HalfInt::from_int(2)]);
    }

    #[test]
    fn change_of_basis_is_orthogonal() {
        for level in [Level::Ground, Level::Excited] {
            let b = build_basis(&AtomSpec::cesium(), level);
            let u = &b.unitary;
            let err = (u * u.transpose() - DMatrix::<f64>::identity(16, 16)).amax();
            assert!(err < 1e-12, "{err}");
        }
    }

    #[test]
    fn manifest_lists_every_state() {
        let b = build_basis(&AtomSpec::cesium(), Level::Ground);
        let m = b.manifest();
        assert_eq!(m["states"].as_array().unwrap().len(), 16);
        assert_eq!(m["states"][7]["F"], 4.0);
    }
}

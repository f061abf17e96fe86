//! Δm = ±1 absorption probabilities of a linearly polarized pump.

use num_rational::Ratio;
use serde::Serialize;

use super::coupling::{OpticalField, OpticalSystem};
use crate::error::{Error, Result};
use crate::spin::{clebsch_gordan, dipole_operator, AtomSpec, HalfInt};

/// Probabilities of |m_F| → |m_F| ± 1 from one ground sublevel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Table2Row {
    pub abs_m: u32,
    pub up: f64,
    pub down: f64,
    #[serde(skip)]
    pub up_exact: Ratio<i128>,
    #[serde(skip)]
    pub down_exact: Ratio<i128>,
}

fn is_x_linear(pol: &[crate::C64; 3]) -> bool {
    pol[1].norm() < 1e-12 && pol[2].norm() < 1e-12 && (pol[0].norm() - 1.0).abs() < 1e-12
}

/// Exact table from Wigner–Eckart: |⟨F' m±1|D_±1|F m⟩|² ∝ ⟨F m; 1 ±1|F' m±1⟩².
/// An x-polarized field has equal σ+ and σ− weights, which cancel on normalization.
pub fn transition_probability_table(spec: &AtomSpec, pump: &OpticalField) -> Result<Vec<Table2Row>> {
    if !is_x_linear(&pump.polarization) {
        return Err(Error::InvalidArgument(
            "transition table requires an x-linear pump".into(),
        ));
    }
    let (fg, fe) = pump.reference;
    let allowed = |j: HalfInt, f: HalfInt| {
        f.doubled() >= (spec.nuclear_spin.doubled() - j.doubled()).abs()
            && f <= spec.nuclear_spin + j
            && (f.doubled() - spec.nuclear_spin.doubled() - j.doubled()) % 2 == 0
    };
    if !allowed(spec.electron_spin, fg) || !allowed(spec.excited_j, fe) {
        return Err(Error::InvalidArgument(format!(
            "reference transition F_g={fg} → F_e={fe} does not exist for this atom"
        )));
    }
    let one = HalfInt::from_int(1);
    let sq = |m: HalfInt, q: i32| {
        let q = HalfInt::from_int(q);
        clebsch_gordan(fg, m, one, q, fe, m + q)
            .exact
            .expect("small angular momenta are exact")
    };
    let mut rows = Vec::new();
    for m in fg.projections().filter(|m| m.doubled() >= 0) {
        let (a, b) = (sq(m, 1), sq(m, -1));
        let total = a + b;
        if total == Ratio::from_integer(0) {
            continue;
        }
        let up = a / total;
        let down = b / total;
        rows.push(Table2Row {
            abs_m: (m.doubled() / 2) as u32,
            up: *up.numer() as f64 / *up.denom() as f64,
            down: *down.numer() as f64 / *down.denom() as f64,
            up_exact: up,
            down_exact: down,
        });
    }
    Ok(rows)
}

/// The same table computed from the numerical dipole matrices of `sys`.
pub fn transition_probability_table_numeric(sys: &OpticalSystem, pump: &OpticalField) -> Vec<(u32, f64, f64)> {
    let d = dipole_operator(&sys.ground, &sys.excited);
    let v = d.dot(&pump.polarization);
    let (fg, fe) = pump.reference;
    let mut out = Vec::new();
    for m in fg.projections().filter(|m| m.doubled() >= 0) {
        let c = sys.ground.index_of(fg, m).expect("reference state");
        let amp = |q: i32| {
            sys.excited
                .index_of(fe, m + HalfInt::from_int(q))
                .map_or(0.0, |r| v[(r, c)].norm_sqr())
        };
        let (a, b) = (amp(1), amp(-1));
        out.push(((m.doubled() / 2) as u32, a / (a + b), b / (a + b)));
    }
    out
}

/// Aligned text rendering.
pub fn format_table(rows: &[Table2Row]) -> String {
    let mut s = String::from("|m_F|  |m_F|+1          |m_F|-1\n");
    for r in rows {
        s.push_str(&format!(
            "{:>5}  {:<7} {:.12}  {:<7} {:.12}\n",
            r.abs_m,
            format!("{}", r.up_exact),
            r.up,
            format!("{}", r.down_exact),
            r.down
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_rows() {
        let rows = transition_probability_table(&AtomSpec::cesium(), &OpticalField::cesium_pump(1.0)).unwrap();
        let want = [(1, 2, 1, 2), (15, 21, 6, 21), (7, 8, 1, 8), (28, 29, 1, 29)];
        assert_eq!(rows.len(), 4);
        for (r, w) in rows.iter().zip(want) {
            assert_eq!(r.up_exact, Ratio::new(w.0, w.1));
            assert_eq!(r.down_exact, Ratio::new(w.2, w.3));
        }
    }

    #[test]
    fn numeric_matrices_agree_with_exact() {
        let sys = OpticalSystem::new(AtomSpec::cesium(), 0.0);
        let pump = OpticalField::cesium_pump(1.0);
        let exact = transition_probability_table(&sys.atom, &pump).unwrap();
        let num = transition_probability_table_numeric(&sys, &pump);
        for (e, n) in exact.iter().zip(num) {
            assert_eq!(e.abs_m, n.0);
            assert!((e.up - n.1).abs() < 1e-12);
            assert!((e.down - n.2).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_circular_pump() {
        let mut p = OpticalField::cesium_pump(1.0);
        p.polarization = OpticalField::sigma(1.0);
        assert!(transition_probability_table(&AtomSpec::cesium(), &p).is_err());
    }
}

//! Persistence and export of sweep results.

use std::fmt::Write as _;
use std::path::Path;

use super::run::{SweepResult, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::io::write_atomic;

pub fn save(result: &SweepResult, path: &Path) -> Result<()> {
    write_atomic(path, &serde_json::to_vec_pretty(result)?)
}

/// Loads a stored sweep. Version-1 files (no `reference_m`) are upgraded.
pub fn load(path: &Path) -> Result<SweepResult> {
    let bytes = std::fs::read(path)?;
    let mut value: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    let version = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Schema("missing schema_version".into()))?;
    let mut note = None;
    match version as u32 {
        SCHEMA_VERSION => {}
        1 => {
            let obj = value.as_object_mut().ok_or_else(|| Error::Schema("not an object".into()))?;
            let reference = obj
                .get("records")
                .and_then(|r| r.as_array())
                .map(|rs| {
                    rs.iter()
                        .filter_map(|r| r.get("m_abs").and_then(|m| m.as_f64()))
                        .fold(0.0, f64::max)
                })
                .unwrap_or(0.0);
            obj.insert("reference_m".into(), reference.into());
            obj.insert("schema_version".into(), SCHEMA_VERSION.into());
            note = Some("migrated from schema 1: reference_m recomputed from records".to_string());
        }
        v => return Err(Error::Schema(format!("unsupported schema_version {v}"))),
    }
    let mut result: SweepResult =
        serde_json::from_value(value).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    if note.is_some() {
        result.migration_note = note;
    }
    let (nx, ny) = result.grid.shape();
    if result.records.len() != nx * ny {
        return Err(Error::Schema(format!(
            "{} records for a {nx} x {ny} grid",
            result.records.len()
        )));
    }
    Ok(result)
}

/// CSV with `#` header lines carrying the parameter hash and tool version.
pub fn to_csv(result: &SweepResult) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "# spingas {}", result.tool_version);
    let _ = writeln!(out, "# params_hash {}", result.params_hash);
    let _ = writeln!(out, "# schema_version {}", result.schema_version);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "n", "phi", "J_over_Gamma", "I_over_Gamma", "M_signed", "M_abs", "tau_s", "converged",
    ])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
    for r in &result.records {
        w.write_record([
            opt(r.n),
            opt(r.phi),
            format!("{}", r.j_over_gamma),
            format!("{}", r.i_over_gamma),
            format!("{:e}", r.m_signed),
            format!("{:e}", r.m_abs),
            format!("{:e}", r.tau),
            r.converged.to_string(),
        ])?;
    }
    let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    out.push_str(&String::from_utf8_lossy(&body));
    Ok(out)
}

/// Gnuplot nonuniform-matrix blocks of |M| then τ.
pub fn to_gnuplot(result: &SweepResult) -> String {
    let (nx, ny) = result.grid.shape();
    let mut out = String::new();
    for (name, get) in [("M_abs", 0usize), ("tau_s", 1)] {
        let _ = writeln!(out, "# {name}");
        let _ = write!(out, "{nx}");
        for x in result.grid.x_axis() {
            let _ = write!(out, " {x}");
        }
        out.push('\n');
        for iy in 0..ny {
            let _ = write!(out, "{}", result.grid.y_axis()[iy]);
            for ix in 0..nx {
                let r = result.record(ix, iy);
                let v = if get == 0 { r.m_abs } else { r.tau };
                let _ = write!(out, " {v:e}");
            }
            out.push('\n');
        }
        out.push_str("\n\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::steady::SteadyOptions;
    use crate::dynamics::SimParams;
    use crate::sweep::contour::{extract_contour, Cut};
    use crate::sweep::grid::SweepGrid;
    use crate::sweep::run::run_sweep;

    fn small() -> SweepResult {
        let grid = SweepGrid::rates(vec![0.5, 4.0], vec![0.5, 4.5]);
        run_sweep(&grid, &SimParams::default(), &SteadyOptions::default(), 2).unwrap()
    }

    #[test]
    fn round_trip_and_exports() {
        let r = small();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        save(&r, &p).unwrap();
        let back = load(&p).unwrap();
        assert_eq!(back.records.len(), 4);
        assert_eq!(back.params_hash, r.params_hash);
        let csv = to_csv(&r).unwrap();
        let rows = csv.lines().filter(|l| !l.starts_with('#')).count();
        assert_eq!(rows, 5);
        assert!(to_gnuplot(&r).contains("# tau_s"));

        let c = extract_contour(&r, Cut::FixedJ(4.1)).unwrap();
        assert_eq!(c.line_value, 4.0);
        assert_eq!(c.records.len(), 2);
        assert!(extract_contour(&r, Cut::FixedJ(40.0)).is_err());
        assert!(extract_contour(&r, Cut::FixedPower(1.0)).is_err());

        let mut v: serde_json::Value = serde_json::from_slice(&std::fs::read(&p).unwrap()).unwrap();
        v["schema_version"] = 1.into();
        v.as_object_mut().unwrap().remove("reference_m");
        std::fs::write(&p, serde_json::to_vec(&v).unwrap()).unwrap();
        let migrated = load(&p).unwrap();
        assert!(migrated.migration_note.is_some());
        assert_eq!(migrated.reference_m, r.reference_m);

        std::fs::write(&p, b"{\"schema_version\": 2, \"records\": [").unwrap();
        assert!(matches!(load(&p), Err(Error::Schema(_))));
    }
}

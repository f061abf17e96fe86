//! Run configuration: TOML with unit-tagged quantities and per-field provenance.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::critfit::{FitForm, FitSpec, Weights};
use crate::dynamics::{GammaLaw, ProjectionMode, SimParams, SteadyOptions};
use crate::error::{Error, Result};
use crate::sweep::{linspace, logspace, AttenuationMode, ConditionsMap, SweepGrid};
use crate::units::{parse_quantity, Dimension, FrequencyConvention};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAtom {
    a_ground: Option<String>,
    a_excited: Option<String>,
    g_ground: Option<String>,
    g_excited: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCollisions {
    gamma_c: Option<String>,
    gamma_q: Option<String>,
    gamma_p: Option<String>,
    q: Option<f64>,
    sigma_ex_v: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRelaxation {
    gamma_0: Option<String>,
    gamma_slope: Option<String>,
    temperature: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptics {
    detuning: Option<String>,
    b_z: Option<String>,
    doppler_temperature: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConditions {
    sigma_e: Option<String>,
    s_calib: Option<String>,
    cell_length: Option<String>,
    beam_area: Option<String>,
    attenuation: Option<AttenuationMode>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNumerics {
    rtol: Option<f64>,
    atol: Option<f64>,
    t_max: Option<f64>,
    seed: Option<f64>,
    projection: Option<ProjectionMode>,
    quadrature_order: Option<usize>,
    frequency_convention: Option<FrequencyConvention>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPoint {
    i_over_gamma: Option<f64>,
    j_over_gamma: Option<f64>,
    h_over_gamma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    #[default]
    Rates,
    Conditions,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    kind: Option<GridKind>,
    x_min: Option<f64>,
    x_max: Option<f64>,
    nx: Option<usize>,
    x_spacing: Option<Spacing>,
    y_min: Option<f64>,
    y_max: Option<f64>,
    ny: Option<usize>,
    y_spacing: Option<Spacing>,
    workers: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFit {
    form: Option<FitForm>,
    weights: Option<Weights>,
    exclusion: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    atom: RawAtom,
    #[serde(default)]
    collisions: RawCollisions,
    #[serde(default)]
    relaxation: RawRelaxation,
    #[serde(default)]
    optics: RawOptics,
    #[serde(default)]
    conditions: RawConditions,
    #[serde(default)]
    numerics: RawNumerics,
    #[serde(default)]
    point: RawPoint,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    fit: RawFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Default,
    User,
}

/// Axes of the configured sweep (x = J/Γ or density, y = I/Γ or power).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub kind: GridKind,
    pub x: (f64, f64, usize, Spacing),
    pub y: (f64, f64, usize, Spacing),
    /// `None` means the environment or core count decides.
    pub workers: Option<usize>,
}

impl SweepSettings {
    pub fn grid(&self, map: &ConditionsMap) -> SweepGrid {
        let axis = |(a, b, n, s): (f64, f64, usize, Spacing)| match s {
            Spacing::Linear => linspace(a, b, n),
            Spacing::Log => logspace(a, b, n),
        };
        match self.kind {
            GridKind::Rates => SweepGrid::rates(axis(self.x), axis(self.y)),
            GridKind::Conditions => SweepGrid::conditions(axis(self.x), axis(self.y), *map),
        }
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: SimParams,
    pub gamma_law: GammaLaw,
    pub temperature_c: f64,
    pub conditions: ConditionsMap,
    pub steady: SteadyOptions,
    pub sweep: SweepSettings,
    pub fit: FitSpec,
    pub frequency_convention: FrequencyConvention,
    /// Dotted field path → whether the value came from the file.
    pub provenance: BTreeMap<String, Provenance>,
}

impl Default for RunConfig {
    fn default() -> Self {
        resolve(RawConfig::default()).expect("defaults are valid")
    }
}

struct Resolver {
    conv: FrequencyConvention,
    provenance: BTreeMap<String, Provenance>,
}

impl Resolver {
    fn mark(&mut self, path: &str, user: bool) {
        let p = if user { Provenance::User } else { Provenance::Default };
        self.provenance.insert(path.to_string(), p);
    }

    fn quantity(&mut self, path: &str, raw: &Option<String>, dim: Dimension, default: f64) -> Result<f64> {
        self.mark(path, raw.is_some());
        match raw {
            None => Ok(default),
            Some(text) => parse_quantity(text, dim, self.conv).map_err(|e| match e {
                Error::Config { detail, .. } => Error::config(path, detail),
                other => Error::config(path, other.to_string()),
            }),
        }
    }

    fn value<T: Copy>(&mut self, path: &str, raw: Option<T>, default: T) -> T {
        self.mark(path, raw.is_some());
        raw.unwrap_or(default)
    }
}

fn positive(path: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(path, format!("must be > 0, got {v}")))
    }
}

fn non_negative(path: &str, v: f64) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(path, format!("must be ≥ 0, got {v}")))
    }
}

fn resolve(raw: RawConfig) -> Result<RunConfig> {
    let conv = raw.numerics.frequency_convention.unwrap_or_default();
    let mut r = Resolver {
        conv,
        provenance: BTreeMap::new(),
    };
    r.mark("numerics.frequency_convention", raw.numerics.frequency_convention.is_some());
    let mut p = SimParams::default();

    let a = &raw.atom;
    p.atom.a_ground = positive("atom.a_ground", r.quantity("atom.a_ground", &a.a_ground, Dimension::Rate, p.atom.a_ground)?)?;
    p.atom.a_excited = positive("atom.a_excited", r.quantity("atom.a_excited", &a.a_excited, Dimension::Rate, p.atom.a_excited)?)?;
    p.atom.g_ground = r.quantity("atom.g_ground", &a.g_ground, Dimension::RatePerField, p.atom.g_ground)?;
    p.atom.g_excited = r.quantity("atom.g_excited", &a.g_excited, Dimension::RatePerField, p.atom.g_excited)?;

    let c = &raw.collisions;
    p.coll.gamma_c = positive("collisions.gamma_c", r.quantity("collisions.gamma_c", &c.gamma_c, Dimension::Rate, p.coll.gamma_c)?)?;
    p.coll.gamma_q = non_negative("collisions.gamma_q", r.quantity("collisions.gamma_q", &c.gamma_q, Dimension::Rate, p.coll.gamma_q)?)?;
    p.coll.gamma_p = non_negative("collisions.gamma_p", r.quantity("collisions.gamma_p", &c.gamma_p, Dimension::Rate, p.coll.gamma_p)?)?;
    p.coll.q_slowdown = r.value("collisions.q", c.q, p.coll.q_slowdown);
    if !(p.coll.q_slowdown > 1.0) {
        return Err(Error::config("collisions.q", "slow-down factor must be > 1"));
    }
    p.coll.sigma_ex_v = positive(
        "collisions.sigma_ex_v",
        r.quantity("collisions.sigma_ex_v", &c.sigma_ex_v, Dimension::RateCoefficient, p.coll.sigma_ex_v)?,
    )?;

    let rl = &raw.relaxation;
    let mut law = GammaLaw::default();
    law.gamma_0 = positive("relaxation.gamma_0", r.quantity("relaxation.gamma_0", &rl.gamma_0, Dimension::Rate, law.gamma_0)?)?;
    law.slope = r.quantity("relaxation.gamma_slope", &rl.gamma_slope, Dimension::RatePerTemperature, law.slope)?;
    let temperature_c = r.quantity("relaxation.temperature", &rl.temperature, Dimension::Temperature, law.reference_c)?;
    p.gamma = positive("relaxation.temperature", law.at(temperature_c))?;

    let o = &raw.optics;
    p.pump.detuning = r.quantity("optics.detuning", &o.detuning, Dimension::Rate, p.pump.detuning)?;
    p.b_z = r.quantity("optics.b_z", &o.b_z, Dimension::Field, p.b_z)?;

    let n = &raw.numerics;
    let order = r.value("numerics.quadrature_order", n.quadrature_order, p.doppler.quadrature_order);
    if order == 0 {
        return Err(Error::config("numerics.quadrature_order", "must be ≥ 1"));
    }
    let doppler_t = r.quantity("optics.doppler_temperature", &o.doppler_temperature, Dimension::Temperature, 75.0)?;
    if o.doppler_temperature.is_some() || n.quadrature_order.is_some() {
        p.doppler = crate::optics::DopplerSpec::thermal(doppler_t, 132.905_451_96, 894.592_96, order);
    }
    p.projection = r.value("numerics.projection", n.projection, p.projection);
    p.seed = r.value("numerics.seed", n.seed, p.seed);
    if !(p.seed.abs() <= 0.01) {
        return Err(Error::config("numerics.seed", "|seed| must be ≤ 0.01"));
    }
    let mut steady = SteadyOptions::default();
    steady.tolerances.rtol = positive("numerics.rtol", r.value("numerics.rtol", n.rtol, steady.tolerances.rtol))?;
    steady.tolerances.atol = positive("numerics.atol", r.value("numerics.atol", n.atol, steady.tolerances.atol))?;
    steady.t_max = positive("numerics.t_max", r.value("numerics.t_max", n.t_max, steady.t_max))?;

    let pt = &raw.point;
    let i = non_negative("point.i_over_gamma", r.value("point.i_over_gamma", pt.i_over_gamma, 0.0))?;
    let j = non_negative("point.j_over_gamma", r.value("point.j_over_gamma", pt.j_over_gamma, 0.0))?;
    let h = r.value("point.h_over_gamma", pt.h_over_gamma, 0.0);
    if !h.is_finite() {
        return Err(Error::config("point.h_over_gamma", "must be finite"));
    }
    p.i_rate = i * p.gamma;
    p.j_rate = j * p.gamma;
    if h != 0.0 {
        p = p.with_bias(h);
    }

    let cd = &raw.conditions;
    let mut map = ConditionsMap {
        sigma_ex_v: p.coll.sigma_ex_v,
        ..ConditionsMap::default()
    };
    map.sigma_e = positive("conditions.sigma_e", r.quantity("conditions.sigma_e", &cd.sigma_e, Dimension::Area, map.sigma_e)?)?;
    map.s_calib = positive(
        "conditions.s_calib",
        r.quantity("conditions.s_calib", &cd.s_calib, Dimension::RatePerIntensity, map.s_calib)?,
    )?;
    map.cell_length = positive(
        "conditions.cell_length",
        r.quantity("conditions.cell_length", &cd.cell_length, Dimension::Length, map.cell_length)?,
    )?;
    map.beam_area = positive("conditions.beam_area", r.quantity("conditions.beam_area", &cd.beam_area, Dimension::Area, map.beam_area)?)?;
    map.attenuation = r.value("conditions.attenuation", cd.attenuation, map.attenuation);

    let s = &raw.sweep;
    let kind = r.value("sweep.kind", s.kind, GridKind::Rates);
    let (dx, dy) = match kind {
        GridKind::Rates => ((0.5, 6.0, 30), (0.5, 6.0, 30)),
        GridKind::Conditions => ((1e11, 3e13, 30), (1.0, 60.0, 30)),
    };
    let spacing_default = match kind {
        GridKind::Rates => Spacing::Linear,
        GridKind::Conditions => Spacing::Log,
    };
    let x = (
        non_negative("sweep.x_min", r.value("sweep.x_min", s.x_min, dx.0))?,
        non_negative("sweep.x_max", r.value("sweep.x_max", s.x_max, dx.1))?,
        r.value("sweep.nx", s.nx, dx.2),
        r.value("sweep.x_spacing", s.x_spacing, spacing_default),
    );
    let y = (
        non_negative("sweep.y_min", r.value("sweep.y_min", s.y_min, dy.0))?,
        non_negative("sweep.y_max", r.value("sweep.y_max", s.y_max, dy.1))?,
        r.value("sweep.ny", s.ny, dy.2),
        r.value("sweep.y_spacing", s.y_spacing, Spacing::Linear),
    );
    for (path, (lo, hi, n, sp)) in [("sweep.x", x), ("sweep.y", y)] {
        if n == 0 || (n > 1 && hi <= lo) {
            return Err(Error::config(path, "need n ≥ 1 and max > min"));
        }
        if sp == Spacing::Log && lo <= 0.0 {
            return Err(Error::config(path, "log spacing needs min > 0"));
        }
    }
    r.mark("sweep.workers", s.workers.is_some());
    if s.workers == Some(0) {
        return Err(Error::config("sweep.workers", "must be ≥ 1"));
    }
    let sweep = SweepSettings {
        kind,
        x,
        y,
        workers: s.workers,
    };

    let f = &raw.fit;
    let form = r.value("fit.form", f.form, FitForm::Beta);
    let base = FitSpec::for_form(form);
    let fit = FitSpec {
        form,
        weights: r.value("fit.weights", f.weights, base.weights),
        exclusion: r.value("fit.exclusion", f.exclusion, base.exclusion),
    };

    p.validate().map_err(|e| Error::config("", e.to_string()))?;
    Ok(RunConfig {
        params: p,
        gamma_law: law,
        temperature_c,
        conditions: map,
        steady,
        sweep,
        fit,
        frequency_convention: conv,
        provenance: r.provenance,
    })
}

/// Parses TOML text; unknown keys and missing unit tags are errors.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let loc = e.span().map(|s| {
            let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
            format!("line {line}")
        });
        Error::config(loc.unwrap_or_default(), e.message().to_string())
    })?;
    resolve(raw)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

impl RunConfig {
    pub fn is_user_set(&self, path: &str) -> bool {
        self.provenance.get(path) == Some(&Provenance::User)
    }

    /// Paths set by the user.
    pub fn user_fields(&self) -> Vec<&str> {
        self.provenance
            .iter()
            .filter(|(_, p)| **p == Provenance::User)
            .map(|(k, _)| k.as_str())
            .collect()
    }

    /// SHA-256 of the resolved values.
    pub fn hash(&self) -> Result<String> {
        crate::io::digest_json(&(
            &self.params,
            &self.conditions,
            &self.steady,
            &self.sweep,
            &self.fit,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c.params.gamma, 58.0);
        assert_eq!(c.params.coll.q_slowdown, 4.57);
        assert!((c.params.pump.detuning - crate::units::mhz(700.0)).abs() < 1e-6);
        assert!(c.user_fields().is_empty());
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn single_override_is_tracked() {
        let c = parse_config("[point]\ni_over_gamma = 2.5\n").unwrap();
        assert_eq!(c.user_fields(), vec!["point.i_over_gamma"]);
        assert_eq!(c.params.i_rate, 2.5 * 58.0);
        assert_ne!(c.hash().unwrap(), RunConfig::default().hash().unwrap());
    }

    #[test]
    fn rejections_name_the_field() {
        let e = parse_config("[relaxation]\ngamma_0 = \"-5 /s\"\n").unwrap_err();
        assert!(e.to_string().contains("relaxation.gamma_0"), "{e}");
        let e = parse_config("[collisions]\ngamma_c = \"1.86\"\n").unwrap_err();
        assert!(e.to_string().contains("collisions.gamma_c") && e.to_string().contains("unit"), "{e}");
        let e = parse_config("[point]\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("line 2") && e.to_string().contains("bogus"), "{e}");
    }

    #[test]
    fn temperature_law() {
        let c = parse_config("[relaxation]\ntemperature = \"95 C\"\n").unwrap();
        assert!((c.params.gamma - 65.0).abs() < 1e-12);
    }
}

//! Unit-tagged physical quantities.
//!
//! Internally every rate and energy is an angular frequency in s⁻¹, magnetic
//! fields are in gauss, lengths in cm and optical powers in mW. Values quoted in
//! Hz/kHz/MHz/GHz are converted according to a [`FrequencyConvention`]; values
//! quoted as `/s` are taken literally.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

/// Whether quoted Hz-family values are ordinary frequencies (multiplied by 2π)
/// or already angular frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FrequencyConvention {
    #[default]
    Ordinary,
    Angular,
}

impl FrequencyConvention {
    fn factor(self) -> f64 {
        match self {
            FrequencyConvention::Ordinary => 2.0 * PI,
            FrequencyConvention::Angular => 1.0,
        }
    }
}

/// The physical dimension a config value must carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    /// Rate or energy, stored as s⁻¹.
    Rate,
    /// Coupling per unit field, stored as s⁻¹ G⁻¹.
    RatePerField,
    /// Magnetic field in G.
    Field,
    /// Length in cm.
    Length,
    /// Area in cm².
    Area,
    /// Number density in cm⁻³.
    Density,
    /// Rate coefficient in cm³ s⁻¹.
    RateCoefficient,
    /// Optical power in mW.
    Power,
    /// Temperature in °C.
    Temperature,
    /// Rate per intensity, stored as s⁻¹ per (mW/cm²).
    RatePerIntensity,
    /// Rate per temperature, s⁻¹ per °C.
    RatePerTemperature,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Rate => "rate (/s, Hz, kHz, MHz, GHz)",
            Dimension::RatePerField => "rate per field (Hz/G, kHz/G, MHz/G, /s/G)",
            Dimension::Field => "field (G, mG, uG, T)",
            Dimension::Length => "length (cm, mm, m)",
            Dimension::Area => "area (cm2, mm2)",
            Dimension::Density => "density (cm-3)",
            Dimension::RateCoefficient => "rate coefficient (cm3/s)",
            Dimension::Power => "power (mW, W, uW)",
            Dimension::Temperature => "temperature (C)",
            Dimension::RatePerIntensity => "rate per intensity (/s/(mW/cm2), MHz/(mW/cm2))",
            Dimension::RatePerTemperature => "rate per temperature (/s/C)",
        };
        f.write_str(s)
    }
}

fn hz_prefix(unit: &str) -> Option<f64> {
    match unit {
        "Hz" => Some(1.0),
        "kHz" => Some(1e3),
        "MHz" => Some(1e6),
        "GHz" => Some(1e9),
        _ => None,
    }
}

fn literal_rate(unit: &str) -> bool {
    matches!(unit, "/s" | "s^-1" | "s-1" | "1/s")
}

/// Parses `"<number> <unit>"` into the internal unit of `dim`.
pub fn parse_quantity(text: &str, dim: Dimension, conv: FrequencyConvention) -> Result<f64> {
    let text = text.trim();
    let split = text
        .find(|c: char| c.is_whitespace())
        .ok_or_else(|| Error::config("", format!("`{text}` has no unit tag; expected {dim}")))?;
    let (num, unit) = text.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::config("", format!("`{num}` is not a number")))?;
    let unit: String = unit.split_whitespace().collect();
    let bad = || Error::config("", format!("unit `{unit}` is not a {dim}"));

    let v = match dim {
        Dimension::Rate => {
            if literal_rate(&unit) {
                value
            } else {
                value * hz_prefix(&unit).ok_or_else(bad)? * conv.factor()
            }
        }
        Dimension::RatePerField => {
            let base = unit.strip_suffix("/G").ok_or_else(bad)?;
            if literal_rate(base) {
                value
            } else {
                value * hz_prefix(base).ok_or_else(bad)? * conv.factor()
            }
        }
        Dimension::Field => match unit.as_str() {
            "G" => value,
            "mG" => value * 1e-3,
            "uG" => value * 1e-6,
            "T" => value * 1e4,
            _ => return Err(bad()),
        },
        Dimension::Length => match unit.as_str() {
            "cm" => value,
            "mm" => value * 0.1,
            "m" => value * 100.0,
            _ => return Err(bad()),
        },
        Dimension::Area => match unit.as_str() {
            "cm2" | "cm^2" => value,
            "mm2" | "mm^2" => value * 1e-2,
            _ => return Err(bad()),
        },
        Dimension::Density => match unit.as_str() {
            "cm-3" | "cm^-3" | "/cm3" => value,
            _ => return Err(bad()),
        },
        Dimension::RateCoefficient => match unit.as_str() {
            "cm3/s" | "cm^3/s" => value,
            _ => return Err(bad()),
        },
        Dimension::Power => match unit.as_str() {
            "mW" => value,
            "W" => value * 1e3,
            "uW" => value * 1e-3,
            _ => return Err(bad()),
        },
        Dimension::Temperature => match unit.as_str() {
            "C" | "degC" => value,
            "K" => value - 273.15,
            _ => return Err(bad()),
        },
        Dimension::RatePerIntensity => {
            let base = unit
                .strip_suffix("/(mW/cm2)")
                .or_else(|| unit.strip_suffix("/(mW/cm^2)"))
                .ok_or_else(bad)?;
            if literal_rate(base) {
                value
            } else {
                value * hz_prefix(base).ok_or_else(bad)? * conv.factor()
            }
        }
        Dimension::RatePerTemperature => match unit.as_str() {
            "/s/C" | "s^-1/C" => value,
            _ => return Err(bad()),
        },
    };
    if !v.is_finite() {
        return Err(Error::config("", format!("`{text}` is not finite")));
    }
    Ok(v)
}

/// Convenience: an ordinary frequency in Hz to angular s⁻¹ under `conv`.
pub fn hz(value_hz: f64, conv: FrequencyConvention) -> f64 {
    value_hz * conv.factor()
}

pub fn mhz(v: f64) -> f64 {
    hz(v * 1e6, FrequencyConvention::Ordinary)
}

pub fn ghz(v: f64) -> f64 {
    hz(v * 1e9, FrequencyConvention::Ordinary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_follow_convention() {
        let o = FrequencyConvention::Ordinary;
        let a = FrequencyConvention::Angular;
        let v = parse_quantity("700 MHz", Dimension::Rate, o).unwrap();
        assert!((v - 2.0 * PI * 7e8).abs() < 1e-3);
        let v = parse_quantity("700 MHz", Dimension::Rate, a).unwrap();
        assert_eq!(v, 7e8);
        assert_eq!(parse_quantity("58 /s", Dimension::Rate, o).unwrap(), 58.0);
    }

    #[test]
    fn compound_units() {
        let o = FrequencyConvention::Ordinary;
        let g = parse_quantity("2.8 MHz/G", Dimension::RatePerField, o).unwrap();
        assert!((g - 2.0 * PI * 2.8e6).abs() < 1e-3);
        assert_eq!(parse_quantity("0.1 mG", Dimension::Field, o).unwrap(), 1e-4);
        assert_eq!(
            parse_quantity("7e-10 cm3/s", Dimension::RateCoefficient, o).unwrap(),
            7e-10
        );
        let s = parse_quantity("13.7 /s/(mW/cm2)", Dimension::RatePerIntensity, o).unwrap();
        assert_eq!(s, 13.7);
    }

    #[test]
    fn missing_or_wrong_unit_is_rejected() {
        let o = FrequencyConvention::Ordinary;
        assert!(parse_quantity("58", Dimension::Rate, o).is_err());
        assert!(parse_quantity("58 G", Dimension::Rate, o).is_err());
        assert!(parse_quantity("abc /s", Dimension::Rate, o).is_err());
    }
}

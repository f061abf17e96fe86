//! Mean-field simulation of an optically driven alkali spin gas.
//!
//! The crate builds the cesium D1 operator algebra, eliminates the optical
//! coherences and the excited level adiabatically, integrates the nonlinear
//! ground-level master equation, sweeps the (pumping, exchange) plane and
//! fits critical exponents to the results.

pub mod config;
pub mod critfit;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod optics;
pub mod selftest;
pub mod spin;
pub mod sweep;
pub mod units;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;

/// Version string embedded in every output manifest.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Entrywise helpers for complex matrices.
pub trait MatExt {
    /// Largest entry modulus.
    fn max_abs(&self) -> f64;
}

impl MatExt for CMat {
    fn max_abs(&self) -> f64 {
        self.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

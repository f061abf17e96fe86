//! Ground-level master equation: channels, projection, integration, steady
//! states and linear stability.

pub mod calibrate;
pub mod generator;
pub mod integrator;
pub mod params;
pub mod stability;
pub mod state;
pub mod steady;
pub mod terms;

pub use generator::{Flow, Generator, InvariantReport};
pub use integrator::{dopri5, CVec, OdeSystem, StepStats, Tolerances};
pub use params::{BiasModel, Calibration, GammaLaw, ModelFlags, RelaxationForm, SimParams, GAMMA_0};
pub use state::{project_coherences, DensityMatrix, ProjectionMode};
pub use terms::{ground_rhs, ideal_bias_term, relaxation_term, spin_exchange_term, Model, Point};
pub use stability::{critical_point, instability_rate, ScanAxis};
pub use steady::{simulate, simulate_with, steady_state, SeedSensitivity, Simulation, SteadyOptions, SteadyState};

//! Adiabatic elimination of the optical coherences and of the excited level.

pub mod coupling;
pub mod doppler;
pub mod table2;

pub use coupling::{
    coherence_fraction, excited_quasi_steady, repopulation, CollisionParams, DrivenField,
    ExcitedSolver, OpticalField, OpticalSystem,
};
pub use doppler::{gauss_hermite, DopplerSpec};
pub use table2::{transition_probability_table, Table2Row};

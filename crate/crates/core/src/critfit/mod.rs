//! Critical-exponent extraction.

pub mod fit;
pub mod forms;
mod optimize;
pub mod susceptibility;

pub use fit::{
    exclusion_indices, exclusion_sensitivity, fit_beta, fit_delta, fit_gamma, fit_znu, three_step_fit, ExclusionShift,
    FitResult, FitSpec, ModelComparison, Preferred, StageReport,
};
pub use forms::{weighted_cost, FitForm, Weights};
pub use susceptibility::{susceptibility, Susceptibility};

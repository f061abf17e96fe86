//! Parallel sweeps over the (exchange, pumping) plane.

pub mod compare;
pub mod conditions;
pub mod contour;
pub mod grid;
pub mod run;
pub mod store;

pub use compare::{compare_projections, ProjectionComparison};
pub use conditions::{d1_cross_section, map_conditions, AttenuationMode, ConditionsMap};
pub use contour::{extract_contour, Contour, Cut};
pub use grid::{linspace, logspace, GridCell, SweepAxes, SweepGrid};
pub use run::{default_workers, run_sweep, SweepRecord, SweepResult, SCHEMA_VERSION, WORKERS_ENV};

//! Angular-momentum algebra for the D1 line.

pub mod angular;
pub mod basis;
pub mod operators;

pub use angular::{clebsch_gordan, clebsch_gordan_f64, Coupling, HalfInt};
pub use basis::{build_basis, BasisState, CoupledBasis, Level};
pub use operators::{
    angular_momentum_operators, dipole_operator, hyperfine_hamiltonian, zeeman_hamiltonian,
    AngularMomenta, AtomSpec, Operator, VectorOperator,
};

//! Simulation and training of activation observables φ(H(θ)) of parameterized qubit Hamiltonians.

pub mod activations;
pub mod cli;
pub mod densities;
pub mod error;
pub mod estimators;
pub mod hamiltonians;
pub mod montecarlo;
pub mod observables;
pub mod obsnet;
pub mod qlinalg;
pub mod quadrature;
pub mod singleshot;
pub mod thermo;
pub mod training;

pub use error::{Error, Result};

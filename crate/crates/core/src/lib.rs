//! Certified energy-norm bounds for adiabatically switched Hamiltonians.
//!
//! The toolkit instantiates time-dependent pairs `H(t) = H0 + eps g(eta t) H1`
//! on finite-dimensional truncations, integrates the unitary propagators in
//! the physical and rotating (interaction) frames, measures the constants that
//! enter the graph-norm growth bounds, and certifies the bounds against the
//! measured sandwich suprema uniformly over a time-scale sweep.

pub mod certify;
pub mod config;
pub mod error;
pub mod landau;
pub mod linalg;
pub mod model;
pub mod operator;
pub mod propagator;
pub mod quadrature;
pub mod report;
pub mod runner;
pub mod switching;

pub use error::{Error, Result};

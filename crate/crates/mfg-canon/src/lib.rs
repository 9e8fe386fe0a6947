//! Canonical momentum-shift transformations for mean field games on
//! empirical measures: monotonicity checks as exact eigenvalue problems,
//! closed-form well-posedness certificates, and an N-particle
//! forward-backward solver that validates the transformation equivalence
//! numerically.

pub mod certificates;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod measures;
pub mod models;
pub mod monotonicity;
pub mod problem;
pub mod report;
pub mod sampling;
pub mod solver;
pub mod transform;

pub use error::{Error, Result};

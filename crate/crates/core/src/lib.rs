//! Hybridizable discontinuous Galerkin discretizations of the 2D Stokes
//! problem: HDG, EDG–HDG and the non pressure-robust EDG variant, for
//! polynomial degree 1 and 2.
//!
//! The usual flow is mesh → [`spaces::build_spaces`] → boundary data →
//! [`solver::solve_condensed`] → [`analysis`]. The benchmark drivers in
//! [`cases`] wrap all of it.

pub mod analysis;
pub mod assembly;
pub mod cases;
pub mod cli;
pub mod concurrency;
pub mod error;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod spaces;
pub mod verify;

pub use error::{Error, Result};
pub use mesh::{Mesh, Point};
pub use spaces::{Method, MethodConfig};

//! Finite-difference solver and verification harness for the 2-D damped
//! elastic-wave system
//!
//! ```text
//!   u_tt - a^2 Δu - (b^2 - a^2) ∇(div u) + V(x) u_t = 0,   x ∈ R^2,
//! ```
//!
//! with shear speed `a`, pressure speed `b` (0 < a < b) and a nonnegative
//! space-dependent damping coefficient `V`. Initial data are compactly
//! supported in a disk of radius `L`, so the solution vanishes for
//! `|x| > b t + L` and the plane can be truncated to a square with
//! homogeneous Dirichlet edges without approximation error.
//!
//! The crate is organized around that system:
//!
//! * [`model`] — grids, fields, damping profiles, initial data, run configs
//! * [`operator`] — second-order stencils and the elastic spatial operator
//! * [`integrator`] — damped leapfrog time stepping and the run driver
//! * [`diagnostics`] — energies, norms, support radius, energy identities
//! * [`multiplier`] — time-weighted energy functionals and their identity
//! * [`potential`] — logarithmic Newton potential of the initial data
//! * [`ratefit`] — decay-rate fits and bounded-ratio envelope checks

pub mod diagnostics;
mod error;
pub mod integrator;
pub mod model;
pub mod multiplier;
pub mod operator;
pub mod potential;
pub mod ratefit;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;

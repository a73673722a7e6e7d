//! Two-phase heat conductor asymptotics.
//!
//! A medium with conductivity `sigma_plus` inside a domain and `sigma_minus`
//! outside starts with temperature one inside and zero outside. At the
//! interface the temperature jumps instantly to `sqrt(s+)/(sqrt(s+)+sqrt(s-))`;
//! the first correction, either in short time or in the large-parameter
//! Laplace-Stieltjes transform, is proportional to the mean curvature of the
//! interface. This crate provides the closed-form profiles, barrier functions,
//! elliptic and parabolic two-phase solvers, and the limit machinery that
//! extracts the curvature from numerical solutions.

pub mod asymptotics;
pub mod audit;
pub mod closedforms;
pub mod csvio;
pub mod elliptic;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod parabolic;
pub mod specfun;

pub use closedforms::{Conductivity, FormulaConstants, Side};
pub use error::{Error, Result};
pub use geometry::Shape;


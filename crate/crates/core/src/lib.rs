//! Mixed finite elements for nonlinear parabolic equations.
//!
//! The flux `sigma = grad u` is discretized in Raviart-Thomas spaces and `u`
//! in discontinuous piecewise polynomials. Time stepping is a linearized
//! backward Euler scheme: nonlinear terms lag one step, so every step is one
//! solve with a matrix factored once.

// `!(x < tol)` checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod assembly;
pub mod error;
pub mod local_projection;
pub mod mesh;
pub mod poly;
pub mod problems;
pub mod projection;
pub mod quadrature;
pub mod solver;
pub mod spaces;
pub mod sparse;
pub mod timestepper;

pub use error::{Error, Result};

/// Points and vectors. 2D quantities keep `z = 0`.
pub type Point = nalgebra::Vector3<f64>;

//! Direction-dependent front speeds in spatially periodic reaction-diffusion
//! media `u_t = div(A(x) grad u) + q(x) . grad u + f(x, u)`.
//!
//! The crate computes minimal speeds `c*(n)` from the periodic principal
//! eigenvalue problem and from direct simulation, and checks continuity in
//! `n`, convergence of ignition approximations and uniform spreading as
//! executable properties.

pub mod error;
pub mod model;
pub mod nonlinearity;
pub mod optimize;
pub mod eigen;
pub mod simulate;
pub mod fronts;
pub mod studies;
pub mod validate;
pub mod io;

pub use error::{Error, Result};

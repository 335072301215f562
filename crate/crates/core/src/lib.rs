//! Boundary-integral solver for generalized Beltrami fields (curl u = f u,
//! div u = 0) in the exterior of a bounded genus-0 domain.
//!
//! The pipeline: closed-form Helmholtz kernels, product quadrature surfaces,
//! single/volume layer potentials, a Fredholm second-kind boundary integral
//! equation for the tangential trace, the exterior Neumann solve for the
//! inhomogeneous Beltrami equation, streamline/stream-tube machinery, and the
//! outer Grad-Rubin iteration coupling transport and field solves.

pub mod bie;
pub mod error;
pub mod field;
pub mod flow;
pub mod geo;
pub mod kernels;
pub mod neumann;
pub mod potentials;
pub mod quadrature;
pub mod seeds;
pub mod special;
pub mod surface;

pub use error::{Error, Result};

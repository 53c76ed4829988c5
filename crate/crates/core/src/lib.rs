//! Hellinger-Kantorovich barycenters of nonnegative measures.
//!
//! The crate is `no_std` with `alloc`. Floating point transcendental functions
//! come from `libm`, so results do not depend on the platform math library.

#![no_std]

extern crate alloc;

pub mod barycenter;
pub mod dirac;
mod error;
pub mod hk;
pub mod math;
pub mod measures;
pub mod multi_marginal;
mod stencil;
pub mod tree;

pub use error::{Error, Result};

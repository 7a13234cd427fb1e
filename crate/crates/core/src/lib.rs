//! Attack-agnostic L2 robustness certificates for fully-connected ReLU
//! classifiers.
//!
//! A ReLU network is affine on each activation region, a convex polyhedron
//! of inputs sharing one on/off pattern. [`certificates::simplex_certificate`]
//! bounds the distance to the nearest input with a different prediction by
//! the distance to the nearer of the region's faces and its in-region class
//! boundaries. [`certificates::decision_boundary_certificate`] gives a second
//! bound for one-hidden-layer networks.
//!
//! The crate is `no_std` with `alloc`; the default `std` feature only turns on
//! runtime SIMD detection in the matrix kernels.

#![no_std]
#![forbid(unsafe_op_in_unsafe_fn)]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod attacks;
pub mod certificates;
mod error;
pub mod linalg;
pub mod network;
pub mod oracle;
pub mod region;
pub mod trainer;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
pub use network::{ActivationPattern, Layer, MlpNetwork};

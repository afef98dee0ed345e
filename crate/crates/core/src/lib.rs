//! Numerical building blocks for the quadratic random matching problem on the flat
//! torus: point-cloud samplers, heat smoothing, spectral elliptic solvers and exact
//! discrete optimal transport.
//!
//! Every routine is generic over the scalar type ([`Real`], implemented for `f32`
//! and `f64`); the aliases below fix the common `f64` instantiation.

// `!(x > 0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod domain;
pub mod elliptic;
pub mod error;
pub mod sampling;
pub mod scalar;
pub mod smoothing;
pub mod transport;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Point = domain::TorusPoint<f64>;
pub type Field = domain::SpectralField<f64>;

//! Tail bounds for quadratic forms `<Aξ, ξ>` in dependent sub-gaussian
//! vectors, built from Orlicz (ψ1, ψ2) norm estimates, plus a Monte Carlo
//! harness that checks the bounds against simulated tails.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod calibration;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod io;
pub mod matrix;
pub mod orlicz;
pub mod regression;
pub mod samplers;

pub use bounds::{BoundCurve, BoundKind, MgfEnvelope, UniversalConstants};
pub use error::{Error, Result};
pub use matrix::{NormBundle, SquareMatrix};
pub use orlicz::{NormEstimate, OrliczIndex};
pub use samplers::{SeedSpec, VectorModel};

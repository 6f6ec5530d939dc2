//! Gradient descent and online SGD on convex surrogate losses for learning
//! halfspaces under label noise, with synthetic data, estimators and
//! evaluated error/iteration bounds.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common `f64` instantiation.

// `!(x > 0)` style checks are deliberate: they reject NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod optimizer;
pub mod rng;
pub mod scalar;
pub mod synthdata;

pub use error::{LabError, Result};
pub use loss::{Inverse, LossKind, LossSpec, SurrogateLoss};
pub use scalar::{sgn, Scalar};
pub use synthdata::{Dataset, DistributionSpec, Family, NoiseModel};

pub type LossSpec64 = LossSpec<f64>;
pub type LossSpec32 = LossSpec<f32>;
pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type DistributionSpec64 = DistributionSpec<f64>;
pub type DistributionSpec32 = DistributionSpec<f32>;

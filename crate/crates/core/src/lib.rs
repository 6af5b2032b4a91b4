//! Numerical laboratory for memorization in cluster-classification problems.
//!
//! The crate covers the Gaussian, Boolean and sparse Boolean cluster problems,
//! the threshold learners that solve them, exact and Monte Carlo
//! mutual-information tools, strong data-processing (SDPI) bounds on excess
//! memorization, the dominating-variable reductions behind those bounds, and
//! the long-tailed multi-cluster model.
//!
//! Closed-form and finite-distribution code is generic over [`Real`]; the
//! aliases below fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod infotools;
pub mod learners;
pub mod multicluster;
pub mod probcore;
pub mod problems;
pub mod reductions;
pub mod rng;
pub mod scalar;
pub mod sdpi;

pub use error::{Error, Result};
pub use rng::{RngStream, StreamRng};
pub use scalar::Real;

pub type Pmf = probcore::FinitePmf<f64>;
pub type Channel = probcore::FiniteChannel<f64>;
pub type Gaussian = probcore::GaussianSpec<f64>;
pub type Bound = sdpi::SdpiBound<f64>;
pub type Pmf32 = probcore::FinitePmf<f32>;

//! Kernel density estimation under volume-dimension assumptions: kernels,
//! reference distributions with exact oracles, a Monte Carlo KDE engine with
//! certified suprema, volume-dimension estimators and concentration bounds.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod dimension;
pub mod distributions;
pub mod error;
pub mod fit;
pub mod grid;
pub mod kde;
pub mod kernels;
pub mod par;
pub mod quadrature;
pub mod rng;
pub mod sample;
pub mod special;

pub use distributions::{Certified, DistributionKind, ReferenceDistribution};
pub use error::{Error, Result};
pub use grid::{BandwidthGrid, BandwidthSpec, EvalGrid};
pub use kernels::{Kernel, KernelForm, MultiIndex, RadialProfile};
pub use par::Execution;
pub use sample::Sample;
pub use kde::{kde_deriv_eval, kde_eval, kde_eval_multi, kde_grid, sup_deviation, OracleTable, SupDeviation};
pub use dimension::{BallSource, RadiusSweep, SweepSource};
pub use fit::RateFit;
pub use bounds::{BoundSpec, BoundValue, EnvelopeSpec};

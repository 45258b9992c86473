//! Simulation and rate analysis for strong laws of outer products of
//! heavy-tailed, long-range-dependent linear processes.
//!
//! A path is `X_k = sum_l C_{k-l} Xi_l` with coefficient kernels decaying like
//! `|l|^{-sigma}` and innovations whose squares have tail index `alpha`. The
//! crate generates such paths, accumulates the centered partial sums of
//! `D_k = X_k Xbar_k^T` over dyadic blocks, and compares the empirical growth
//! exponent of those sums with `max(2 - sigma - sigma_bar, 1/alpha, 1/2)`.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coefficients;
pub mod error;
pub mod estimators;
pub mod innovations;
pub mod linear_process;
pub mod partial_sums;
pub mod quadrature;
pub mod seed;
pub mod stats;
pub mod stochastic_approx;

pub use error::{Error, Result};

//! Simulation and verification toolkit for the stochastic heat equation driven
//! by spectrally positive Lévy space-time noise.
//!
//! The crate is split by concern:
//! - [`levy`]: jump measures, truncated moments, standing conditions, sampling.
//! - [`kernel`]: heat kernel and its closed-form integrals.
//! - [`solver`]: additive and multiplicative field evaluation over Poisson atoms.
//! - [`chains`]: backward atom chains and the product-of-Pareto tail.
//! - [`analysis`]: tail statistics and the integral-test classifier.
//! - [`dimension`]: macroscopic dimension estimators and peak sets.
//! - [`mathfns`]: special functions and lemma verifiers.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod chains;
pub mod dimension;
pub mod error;
pub mod kernel;
pub mod levy;
pub mod mathfns;
pub mod quad;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use levy::{LevyMeasure, Moment};

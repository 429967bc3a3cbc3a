//! Regularized regression on a sparse trigonometric spectrum.
//!
//! The crate covers the feature system and kernel ([`basis`]), exact
//! coefficient algebra ([`spectral`]), the ridge estimator ([`estimator`]),
//! error bounds and regularization selectors ([`bounds`]), empirical-Bayes
//! tools ([`bayes`]) and seeded Monte Carlo studies ([`experiments`]).

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod bayes;
pub mod bounds;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod spectral;

pub use basis::{Frequency, HypothesisSpace, Parity};
pub use error::{Error, Result};
pub use estimator::{Dataset, FitResult};
pub use spectral::{ProjectionSplit, SpectralFunction};

//! Sparse coding toolkit for exponential-family data.
//!
//! The crate learns sparse linear representations x ≈ a'(Bs) of gaussian,
//! bernoulli, and poisson observations and feeds them to a small neural
//! classifier:
//!
//! - [`expfam`] — the observation models (log-partition, mean, variance).
//! - [`lasso`] — feature-sign search for weighted L1 least squares with a
//!   KKT certificate.
//! - [`irls`] — sparse encoding of a single observation by iteratively
//!   reweighted quadratic approximation, each step a weighted lasso.
//! - [`dict`] — norm-constrained dictionary learning by alternating
//!   minimization.
//! - [`pipeline`] — dictionary features from unlabeled data, then a
//!   classifier on labeled data, packaged as one trainable model.
//! - [`nn`] / [`pca`] — the feed-forward classifier and the optional
//!   dimensionality reduction in front of it.
//!
//! File formats, CSV ingestion, synthetic benchmarks, and evaluation live in
//! [`dataset`], [`model_io`], [`synth`], and [`metrics`]; the `stlcode`
//! binary wires them into a CLI.

pub mod config;
pub mod dataset;
pub mod dict;
pub mod error;
pub mod expfam;
pub mod irls;
pub mod lasso;
pub mod metrics;
pub mod model_io;
pub mod nn;
pub mod pca;
pub mod pipeline;
pub mod synth;

pub mod threads;

pub use error::{Error, Result};
pub use expfam::Family;

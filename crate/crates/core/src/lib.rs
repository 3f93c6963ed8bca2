//! Bayesian inference for covariate-gated mixtures of Gaussian Bayesian networks.
//!
//! Each observation splits into modifiable features `y` (nodes of a
//! linear-Gaussian network) and non-modifiable covariates `x`. Component
//! membership follows a multinomial-logistic gate on `x`; each component owns its
//! own DAG. Posterior inference is a block Gibbs sampler over assignments,
//! gating coefficients and per-component structures.

pub mod data;
pub mod error;
pub mod eval;
pub mod gating;
pub mod gbn;
pub mod graphs;
pub mod io;
pub mod mixture;
pub mod structure;
pub mod synth;

pub use data::{DataMatrix, Dataset};
pub use error::{Error, Result};

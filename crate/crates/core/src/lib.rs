//! Density estimation with Riemann-Theta Boltzmann machines.
//!
//! The library models probability densities with an energy-based machine whose
//! hidden units live on an integer lattice, giving a closed-form visible-sector
//! density built from rescaled theta functions. Two training routes are
//! provided: score matching (the Fisher cost, which never touches the density
//! normalization) and maximum likelihood, both minimized with a derivative-free
//! CMA-ES optimizer. Supporting machinery covers z-score/PCA preprocessing,
//! lattice sampling, a Fasano-Franceschini two-sample goodness-of-fit test, CSV
//! data ingestion and micro-benchmarks of the theta kernels.
//!
//! Modules mirror the processing pipeline:
//!
//! - [`theta1d`]: scalar theta kernel with certified truncation,
//! - [`rtheta`]: N-dimensional lattice evaluation with a product fast path,
//! - [`model`]: parameter block, density, score, Laplacian and sampling,
//! - [`costs`]: Fisher (score-matching) and negative log-likelihood costs,
//! - [`optimize`]: CMA-ES, marginal pre-training and the fitting protocol,
//! - [`preprocess`]: invertible affine maps (z-score + PCA),
//! - [`gof`]: Fasano-Franceschini test,
//! - [`datasets`]: CSV loaders, log returns and the bundled example data,
//! - [`bench`]: timing suites for the theta kernels.

pub mod bench;
pub mod costs;
pub mod data;
pub mod datasets;
pub mod error;
pub mod gof;
pub mod model;
pub mod optimize;
pub mod preprocess;
pub mod rtheta;
pub mod theta1d;

pub use data::Sample;
pub use error::{Error, Result};

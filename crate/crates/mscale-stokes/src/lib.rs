//! Mesh-free least-squares solver for steady 2-D Stokes flow.
//!
//! The velocity/pressure fields are represented by multi-scale networks
//! (sums of sine-activated MLPs fed with scaled copies of the input) and
//! trained by minimizing the residuals of first-order reformulations of the
//! Stokes equations at randomly sampled collocation points. No mesh, no
//! quadrature on the PDE side: interior residuals and boundary mismatch are
//! plain means over sampled points.
//!
//! Module map:
//! - [`autodiff`]: fixed 2-D forward-mode jets for spatial derivatives and a
//!   reverse-mode tape for parameter gradients over the jet-valued pass
//! - [`net`]: dense layers, multi-scale networks, Glorot initialization
//! - [`geometry`]: rectangle-with-circular-holes domain, samplers, flux audit
//! - [`problems`]: manufactured oscillatory Stokes solutions and forcing
//! - [`fields`]: the solution field bundle (trained networks or exact oracle)
//! - [`loss`]: the five least-squares loss variants
//! - [`optim`]: Adam, staircase learning-rate schedule, penalty adaptation
//! - [`trainer`]: datasets, the epoch loop, error evaluation, line profiles
//! - [`config`] / [`checkpoint`] / [`history`] / [`cli`]: run configuration,
//!   binary checkpoints, CSV output, and the command-line front end

pub mod autodiff;
pub mod checkpoint;
pub mod cli;
pub mod config;
mod error;
pub mod fields;
pub mod geometry;
pub mod history;
pub mod loss;
pub mod net;
pub mod optim;
pub mod problems;
mod rng;
pub mod trainer;

pub use error::Error;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

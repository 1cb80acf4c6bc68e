//! Covariance parameter estimation for gridded Gaussian random fields.
//!
//! The library fits the range θ and noise-to-signal ratio λ of a Matérn
//! (ν = 1) Gaussian process to small gridded fields, two ways:
//!
//! * **Exact grid-search maximum likelihood** over an EDF-stratified
//!   (θ, λ) grid, with one spectral factorization per θ shared by the
//!   whole λ sweep (`ml`).
//! * **Neural-network surrogates** trained on simulated fields: a
//!   convolutional net on raw 16×16 fields (NF) and dense nets on
//!   empirical variograms (NV, NV30), built on a small from-scratch
//!   engine with reverse-mode gradients and Adam (`nn`, `train`).
//!
//! Supporting pieces: parameter-grid construction and scaling (`grid`),
//! exact-lag empirical variograms (`variogram`), a simulation-study and
//! benchmark harness (`eval`), a binary raster format plus a torus GP
//! sampler for large synthetic inputs (`raster`, `synth`), and a
//! moving-window scanner that maps local covariance structure over a
//! large raster (`window`).
//!
//! The `covest` binary exposes all of it as subcommands; `examples/`
//! holds one runnable walkthrough per capability.

pub mod bessel;
pub mod error;
pub mod gp;
pub mod grid;
pub mod ml;
pub mod rng;
pub mod testkit;
pub mod variogram;

pub use error::{Error, Result};
pub use gp::{CovParams, FieldStack, GridGeometry, SpectralFactor};

//! Noise propagation through discrete cone-beam local tomography.
//!
//! When the data of a generalized Radon transform consist of independent
//! noise, the reconstruction at `x0 + eps * x` converges (as the sampling
//! step `eps` goes to zero) to a Gaussian random field in the local
//! coordinate `x`. This crate simulates the discrete reconstruction, predicts
//! the limiting covariance `C(theta)` in closed form, and compares the two.
//!
//! * [`geometry`]: circular cone-beam projection `(U, V)` and its Jacobian
//! * [`kernel`]: the interpolation–smoothing kernel and its autocorrelations
//! * [`noise`]: reproducible counter-based noise on the sinogram grid
//! * [`recon`]: the discrete local tomography sum and Monte-Carlo statistics
//! * [`stats`]: histograms, Gaussian densities on bins, mismatch metrics
//! * [`covariance`]: the predicted covariance of the limiting field
//! * [`analysis`]: numeric checks of the local assumptions on `x0`, Weyl sums
//! * [`config`] and [`app`]: JSON configuration and the `grf-tomo` commands

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod app;
pub mod config;
pub mod covariance;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod noise;
pub mod philox;
pub mod quadrature;
pub mod recon;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{ConeBeamGeometry, DetectorPoint, Point3};
pub use kernel::{Kernel, KernelFunction, KernelSpec};

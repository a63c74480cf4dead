//! Two-dimensional CT toolkit for metal artifact simulation and reduction.
//!
//! - [`projector`]: transpose-exact forward projector, filtered back
//!   projection and its vector-Jacobian product.
//! - [`physics`]: polychromatic metal artifact simulation and clinical
//!   ingestion.
//! - [`marbase`]: LI and NMAR sinogram inpainting.
//! - [`encoding`]: metal-projection pyramid, sinogram padding, training loss.
//! - [`metrics`]: windowed PSNR/SSIM, sinogram MSE and grouped reports.
//!
//! Lengths are millimetres; attenuation is per millimetre.

pub mod encoding;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod marbase;
pub mod metrics;
pub mod phantom;
pub mod physics;
pub mod projector;
pub mod spectrum;
pub mod units;

pub use error::{Error, Result};
pub use geometry::{BeamModel, Geometry};
pub use grid::{Image, ImageUnit, MetalMask, MetalTrace, Sinogram, SinogramUnit};

//! Precision limits for measuring the temperatures of two thermal point
//! sources imaged through a diffraction-limited optical system.
//!
//! Units follow `ħ = k_B = 1`: temperatures and the optical frequency share
//! one scale, and every Fisher information is reported per unit `T²`.
//!
//! Module map:
//!
//! - [`model`]: source parameters, PSF overlap and the image-plane Gaussian state.
//! - [`equal_temp`]: single-parameter QFI when both sources share one temperature.
//! - [`gaussian_fisher`]: two-parameter QFI matrix, SLDs and the weak-commutation check.
//! - [`estimation`]: simultaneous versus individual Cramér–Rao bounds.
//! - [`demux`]: Hermite–Gauss demultiplexing and moment-based sensitivities.
//! - [`counting`]: joint photon-number statistics in the ± image modes.
//! - [`oracle`]: brute-force Fock-space ground truth, quadrature and finite differences.
//! - [`sweep`]: tabular parameter sweeps and figure presets used by the CLI.

#![forbid(unsafe_code)]

pub mod counting;
pub mod demux;
pub mod equal_temp;
pub mod error;
pub mod estimation;
pub mod gaussian_fisher;
pub mod model;
pub mod oracle;
pub mod selftest;
pub mod special;
pub mod sweep;

pub use error::{Error, Result};
pub use gaussian_fisher::FisherMatrix;
pub use model::{DiffractionGeometry, GammaConvention, ImageState, SourcePair};

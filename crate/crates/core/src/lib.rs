//! Image-quality, photorealism and text-image alignment metrics.
//!
//! The crate covers pixel-domain full-reference metrics (PSNR, SSIM,
//! MS-SSIM, VIF, entropy, histogram correlation), feature-space metrics
//! (FID, KID, layered feature distance, Inception Score), the composite
//! Neural Feature Similarity Score, the Interpolative Binning Scale that
//! maps raw metric values onto a 0–5 Likert scale, per-image objective
//! colour statistics, and MAD/MAPE alignment against human opinion scores.
//!
//! Deep-network features are never computed in-process: they enter through
//! [`features::load_features`] / [`features::load_probs`], or are replaced
//! by the deterministic [`features::BuiltinExtractor`].

pub mod alignment;
pub mod error;
pub mod features;
pub mod ibs;
pub mod nfss;
pub mod pixel;
pub mod raster;
pub mod stats;

pub use error::{Error, Result};
pub use raster::{GrayImage, Histogram, HsvPlanes, ImageBuffer};

//! Neural Feature Similarity Score.
//!
//! NFSS blends four ingredients computed between a reference and a test
//! image: the patch-mean SSIM, a feature-space perceptual distance `Dp`,
//! the histogram correlation `Hc`, and the entropy `H` of one of the images.
//! A sigmoid weight
//!
//! ```text
//! alpha = 1 / (1 + exp(-H + (ssim_ms - Dp)) * exp(-Hc))
//! ```
//!
//! splits the structural and perceptual terms:
//!
//! ```text
//! nfss = alpha * ssim_ms + (1 - alpha) * Dp + 0.1 * Hc
//! ```
//!
//! `Dp` is a distance and enters as-is. Its scale depends on the feature
//! provider, so scores are only comparable within one provider.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{perceptual_distance, FeatureMatrix, FeatureProvider};
use crate::pixel::{
    default_patch_schedule, entropy, hist_correlation, ssim_patch_mean, SsimParams, ENTROPY_EPS,
};
use crate::raster::{gray_histogram, resize_bilinear, rgb_histogram, to_gray, ImageBuffer};

/// Weight on the histogram-correlation term.
pub const COLOR_WEIGHT: f64 = 0.1;

/// Which image's entropy drives the weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntropySource {
    #[default]
    Reference,
    Test,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HistogramMode {
    #[default]
    Gray,
    /// Per-channel RGB histograms concatenated.
    Rgb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NfssConfig {
    /// Both images are resized to this size first.
    pub resize: (usize, usize),
    /// `None` uses [`default_patch_schedule`].
    pub patch_sizes: Option<Vec<usize>>,
    pub hist_bins: usize,
    pub hist_mode: HistogramMode,
    pub entropy_source: EntropySource,
    /// Replace `Dp` by `1 / (1 + Dp)` before combining.
    pub normalized_dp: bool,
    pub ssim: SsimParams,
}

impl Default for NfssConfig {
    fn default() -> Self {
        Self {
            resize: (299, 299),
            patch_sizes: None,
            hist_bins: 256,
            hist_mode: HistogramMode::Gray,
            entropy_source: EntropySource::Reference,
            normalized_dp: false,
            ssim: SsimParams::default(),
        }
    }
}

/// Every intermediate of one NFSS evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NfssComponents {
    pub ssim_ms: f64,
    pub dp: f64,
    pub hc: f64,
    pub h: f64,
    pub alpha: f64,
    pub nfss: f64,
    pub provider: String,
}

impl NfssComponents {
    /// Derive alpha and the final score from the four ingredients.
    pub fn compose(ssim_ms: f64, dp: f64, hc: f64, h: f64, provider: impl Into<String>) -> Result<Self> {
        if !(-1.0..=1.0).contains(&ssim_ms) || !(-1.0..=1.0).contains(&hc) {
            return Err(Error::arg(format!(
                "ssim_ms ({ssim_ms}) and hc ({hc}) must lie in [-1, 1]"
            )));
        }
        if !(dp >= 0.0) || !(h >= 0.0) {
            return Err(Error::arg(format!("dp ({dp}) and h ({h}) must be non-negative")));
        }
        let alpha = nfss_alpha(h, ssim_ms, dp, hc)?;
        let nfss = nfss_score(alpha, ssim_ms, dp, hc)?;
        Ok(Self {
            ssim_ms,
            dp,
            hc,
            h,
            alpha,
            nfss,
            provider: provider.into(),
        })
    }
}

/// Dynamic weight, kept strictly inside (0, 1).
pub fn nfss_alpha(h: f64, ssim_ms: f64, dp: f64, hc: f64) -> Result<f64> {
    if ![h, ssim_ms, dp, hc].iter().all(|v| v.is_finite()) {
        return Err(Error::arg("NFSS weight inputs must be finite"));
    }
    let exponent = -h + (ssim_ms - dp) - hc;
    let alpha = 1.0 / (1.0 + exponent.exp());
    Ok(alpha.clamp(f64::EPSILON, 1.0 - f64::EPSILON))
}

pub fn nfss_score(alpha: f64, ssim_ms: f64, dp: f64, hc: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::arg(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(alpha * ssim_ms + (1.0 - alpha) * dp + COLOR_WEIGHT * hc)
}

/// Full pipeline on two decoded images, with features from `provider`.
pub fn nfss_evaluate(
    reference: &ImageBuffer,
    test: &ImageBuffer,
    cfg: &NfssConfig,
    provider: &dyn FeatureProvider,
) -> Result<NfssComponents> {
    let (reference, test) = canonical_pair(reference, test, cfg)?;
    let fr = provider.features(&reference)?;
    let ft = provider.features(&test)?;
    nfss_with_features(&reference, &test, &fr, &ft, cfg)
}

/// As [`nfss_evaluate`] but with externally supplied single-row features.
pub fn nfss_evaluate_with_features(
    reference: &ImageBuffer,
    test: &ImageBuffer,
    ref_features: &FeatureMatrix,
    test_features: &FeatureMatrix,
    cfg: &NfssConfig,
) -> Result<NfssComponents> {
    let (reference, test) = canonical_pair(reference, test, cfg)?;
    nfss_with_features(&reference, &test, ref_features, test_features, cfg)
}

fn canonical_pair(
    reference: &ImageBuffer,
    test: &ImageBuffer,
    cfg: &NfssConfig,
) -> Result<(ImageBuffer, ImageBuffer)> {
    let (w, h) = cfg.resize;
    Ok((resize_bilinear(reference, w, h)?, resize_bilinear(test, w, h)?))
}

fn nfss_with_features(
    reference: &ImageBuffer,
    test: &ImageBuffer,
    ref_features: &FeatureMatrix,
    test_features: &FeatureMatrix,
    cfg: &NfssConfig,
) -> Result<NfssComponents> {
    let gr = to_gray(reference);
    let gt = to_gray(test);

    let patches = match &cfg.patch_sizes {
        Some(p) => p.clone(),
        None => default_patch_schedule(gr.width(), gr.height()),
    };
    let ssim_ms = ssim_patch_mean(&gr, &gt, &patches, &cfg.ssim)?;

    let raw_dp = perceptual_distance(ref_features, test_features)?;
    let dp = if cfg.normalized_dp {
        1.0 / (1.0 + raw_dp)
    } else {
        raw_dp
    };

    let (hr, ht) = match cfg.hist_mode {
        HistogramMode::Gray => (
            gray_histogram(&gr, cfg.hist_bins)?,
            gray_histogram(&gt, cfg.hist_bins)?,
        ),
        HistogramMode::Rgb => (
            rgb_histogram(reference, cfg.hist_bins)?,
            rgb_histogram(test, cfg.hist_bins)?,
        ),
    };
    let hc = hist_correlation(&hr, &ht)?;

    let h = match cfg.entropy_source {
        EntropySource::Reference => entropy(&gr, ENTROPY_EPS, cfg.hist_bins)?,
        EntropySource::Test => entropy(&gt, ENTROPY_EPS, cfg.hist_bins)?,
        EntropySource::Mean => {
            (entropy(&gr, ENTROPY_EPS, cfg.hist_bins)? + entropy(&gt, ENTROPY_EPS, cfg.hist_bins)?)
                / 2.0
        }
    };

    NfssComponents::compose(ssim_ms, dp, hc, h, ref_features.source())
}

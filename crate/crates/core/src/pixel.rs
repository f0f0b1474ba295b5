//! Pixel-domain full-reference metrics.
//!
//! Every function takes [`GrayImage`]s (or histograms derived from them) and
//! is pure; nothing here allocates beyond the filtered planes it needs.

use crate::error::{Error, Result};
use crate::raster::{gray_histogram, GrayImage, Histogram};

/// Finite stand-in for the infinite PSNR of identical images in serialized reports.
pub const PSNR_SENTINEL_DB: f64 = 1000.0;

/// Peak signal-to-noise ratio in dB. Identical images give `f64::INFINITY`.
pub fn psnr(reference: &GrayImage, test: &GrayImage, max_value: f64) -> Result<f64> {
    reference.same_dims(test)?;
    if !(max_value > 0.0) {
        return Err(Error::arg(format!("max value must be positive, got {max_value}")));
    }
    let n = reference.data().len() as f64;
    let mse = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_value * max_value / mse).log10())
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, serde::Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 255.0,
        }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::arg(format!(
                "SSIM window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if !(self.sigma > 0.0) || !(self.k1 > 0.0) || !(self.k2 > 0.0) {
            return Err(Error::arg("SSIM sigma, k1 and k2 must be positive"));
        }
        if !(self.dynamic_range > 0.0) {
            return Err(Error::arg("SSIM dynamic range must be positive"));
        }
        Ok(())
    }

    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }
}

/// Scale weights for the multi-scale product.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MsSsimParams {
    weights: Vec<f64>,
}

impl MsSsimParams {
    /// The customary five-scale exponents.
    pub const STANDARD_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

    /// Weights are rescaled to sum to exactly one. Inputs whose sum is more
    /// than 1e-3 away from one are rejected.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::arg("MS-SSIM needs at least one scale"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::arg("MS-SSIM weights must be finite and non-negative"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-3 {
            return Err(Error::arg(format!("MS-SSIM weights sum to {sum}, expected 1")));
        }
        let weights = weights.into_iter().map(|w| w / sum).collect();
        Ok(Self { weights })
    }

    pub fn scales(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl Default for MsSsimParams {
    fn default() -> Self {
        Self::new(Self::STANDARD_WEIGHTS.to_vec()).expect("standard weights are valid")
    }
}

impl<'de> serde::Deserialize<'de> for MsSsimParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(serde::Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            weights: Vec<f64>,
        }
        let raw = Raw::deserialize(d)?;
        Self::new(raw.weights).map_err(serde::de::Error::custom)
    }
}

/// Normalized 1-D Gaussian taps of odd length `size`.
pub(crate) fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size / 2) as f64;
    let mut k: Vec<f64> = (0..size)
        .map(|i| {
            let x = i as f64 - half;
            (-(x * x) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Row-major plane used by the filtering helpers.
#[derive(Debug, Clone)]
pub(crate) struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn from_gray(img: &GrayImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            data: img.data().to_vec(),
        }
    }

    fn map2(&self, other: &Plane, f: impl Fn(f64, f64) -> f64) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Separable correlation with `taps` in both directions, keeping only
    /// positions where the window fits entirely inside the plane.
    pub fn filter_valid(&self, taps: &[f64]) -> Plane {
        let k = taps.len();
        let ow = self.width + 1 - k;
        let oh = self.height + 1 - k;
        let mut horiz = vec![0.0; ow * self.height];
        for y in 0..self.height {
            let row = &self.data[y * self.width..(y + 1) * self.width];
            for x in 0..ow {
                horiz[y * ow + x] = taps.iter().zip(&row[x..x + k]).map(|(t, v)| t * v).sum();
            }
        }
        let mut out = vec![0.0; ow * oh];
        for y in 0..oh {
            for x in 0..ow {
                out[y * ow + x] = taps
                    .iter()
                    .enumerate()
                    .map(|(i, t)| t * horiz[(y + i) * ow + x])
                    .sum();
            }
        }
        Plane {
            width: ow,
            height: oh,
            data: out,
        }
    }

    /// 2×2 mean pooling; odd trailing rows/columns are dropped.
    pub fn downsample_mean2(&self) -> Plane {
        let w = self.width / 2;
        let h = self.height / 2;
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let at = |dx: usize, dy: usize| self.data[(2 * y + dy) * self.width + 2 * x + dx];
                data.push((at(0, 0) + at(1, 0) + at(0, 1) + at(1, 1)) / 4.0);
            }
        }
        Plane {
            width: w,
            height: h,
            data,
        }
    }

    fn decimate2(&self) -> Plane {
        let w = self.width.div_ceil(2);
        let h = self.height.div_ceil(2);
        let mut data = Vec::with_capacity(w * h);
        for y in (0..self.height).step_by(2) {
            for x in (0..self.width).step_by(2) {
                data.push(self.data[y * self.width + x]);
            }
        }
        Plane {
            width: w,
            height: h,
            data,
        }
    }

    fn min_side(&self) -> usize {
        self.width.min(self.height)
    }
}

/// Local first and second moments under a window.
struct Moments {
    mu_x: Plane,
    mu_y: Plane,
    xx: Plane,
    yy: Plane,
    xy: Plane,
}

impl Moments {
    fn compute(x: &Plane, y: &Plane, taps: &[f64]) -> Self {
        Self {
            mu_x: x.filter_valid(taps),
            mu_y: y.filter_valid(taps),
            xx: x.map2(x, |a, b| a * b).filter_valid(taps),
            yy: y.map2(y, |a, b| a * b).filter_valid(taps),
            xy: x.map2(y, |a, b| a * b).filter_valid(taps),
        }
    }
}

fn ssim_formula(mx: f64, my: f64, vx: f64, vy: f64, cov: f64, c1: f64, c2: f64) -> f64 {
    ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

fn ssim_map_planes(x: &Plane, y: &Plane, p: &SsimParams) -> Vec<f64> {
    let taps = gaussian_kernel(p.window, p.sigma);
    let m = Moments::compute(x, y, &taps);
    let (c1, c2) = (p.c1(), p.c2());
    (0..m.mu_x.data.len())
        .map(|i| {
            let mx = m.mu_x.data[i];
            let my = m.mu_y.data[i];
            let vx = m.xx.data[i] - mx * mx;
            let vy = m.yy.data[i] - my * my;
            let cov = m.xy.data[i] - mx * my;
            ssim_formula(mx, my, vx, vy, cov, c1, c2)
        })
        .collect()
}

fn ssim_planes(x: &Plane, y: &Plane, p: &SsimParams) -> f64 {
    let map = ssim_map_planes(x, y, p);
    map.iter().sum::<f64>() / map.len() as f64
}

fn check_window(img: &GrayImage, p: &SsimParams) -> Result<()> {
    if img.width().min(img.height()) < p.window {
        return Err(Error::arg(format!(
            "image {}x{} is smaller than the {}-pixel SSIM window",
            img.width(),
            img.height(),
            p.window
        )));
    }
    Ok(())
}

/// Local SSIM map over the valid region of a Gaussian window.
pub fn ssim_map(reference: &GrayImage, test: &GrayImage, p: &SsimParams) -> Result<Vec<f64>> {
    reference.same_dims(test)?;
    p.validate()?;
    check_window(reference, p)?;
    Ok(ssim_map_planes(
        &Plane::from_gray(reference),
        &Plane::from_gray(test),
        p,
    ))
}

/// Mean of the Gaussian-windowed SSIM map.
pub fn ssim(reference: &GrayImage, test: &GrayImage, p: &SsimParams) -> Result<f64> {
    let map = ssim_map(reference, test, p)?;
    Ok(map.iter().sum::<f64>() / map.len() as f64)
}

/// Per-scale SSIM values below this are floored before the fractional power.
pub const MS_SSIM_FLOOR: f64 = 1e-6;

/// Product over dyadic scales of `SSIM_j ^ beta_j`, with 2×2 mean-pool downsampling.
pub fn ms_ssim(
    reference: &GrayImage,
    test: &GrayImage,
    ms: &MsSsimParams,
    p: &SsimParams,
) -> Result<f64> {
    reference.same_dims(test)?;
    p.validate()?;
    let min_side = reference.width().min(reference.height());
    let needed = p.window << (ms.scales() - 1);
    if min_side < needed {
        let mut feasible = 0;
        while (p.window << feasible) <= min_side {
            feasible += 1;
        }
        return Err(Error::arg(format!(
            "image side {min_side} too small for {} MS-SSIM scales (needs {needed}); at most {feasible} scales fit",
            ms.scales()
        )));
    }
    let mut x = Plane::from_gray(reference);
    let mut y = Plane::from_gray(test);
    let mut score = 1.0;
    for (j, &beta) in ms.weights().iter().enumerate() {
        if j > 0 {
            x = x.downsample_mean2();
            y = y.downsample_mean2();
        }
        let s = ssim_planes(&x, &y, p).max(MS_SSIM_FLOOR);
        score *= s.powf(beta);
    }
    Ok(score)
}

/// Single-window SSIM over whole equally sized planes (population moments).
pub fn global_ssim(reference: &GrayImage, test: &GrayImage, p: &SsimParams) -> Result<f64> {
    reference.same_dims(test)?;
    Ok(global_ssim_slices(reference.data(), test.data(), p))
}

fn global_ssim_slices(x: &[f64], y: &[f64], p: &SsimParams) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut vx = 0.0;
    let mut vy = 0.0;
    let mut cov = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        vx += da * da;
        vy += db * db;
        cov += da * db;
    }
    ssim_formula(mx, my, vx / n, vy / n, cov / n, p.c1(), p.c2())
}

/// Default patch sides for [`ssim_patch_mean`]: half and quarter of the
/// shorter side, each at least 8 and never larger than the image.
pub fn default_patch_schedule(width: usize, height: usize) -> Vec<usize> {
    let min_dim = width.min(height);
    let mut sizes: Vec<usize> = [min_dim / 2, min_dim / 4]
        .iter()
        .map(|&s| s.max(8).min(min_dim))
        .collect();
    sizes.dedup();
    sizes
}

/// Mean single-window SSIM over non-overlapping square patches of every
/// listed size. Partial patches at the right and bottom edges are skipped.
pub fn ssim_patch_mean(
    reference: &GrayImage,
    test: &GrayImage,
    patch_sizes: &[usize],
    p: &SsimParams,
) -> Result<f64> {
    reference.same_dims(test)?;
    if patch_sizes.is_empty() {
        return Err(Error::arg("patch schedule is empty"));
    }
    let (w, h) = (reference.width(), reference.height());
    let mut total = 0.0;
    let mut count = 0usize;
    let mut px = Vec::new();
    let mut py = Vec::new();
    for &size in patch_sizes {
        if size == 0 || size > w.min(h) {
            return Err(Error::arg(format!(
                "patch size {size} does not fit a {w}x{h} image"
            )));
        }
        for ty in 0..h / size {
            for tx in 0..w / size {
                px.clear();
                py.clear();
                for y in ty * size..(ty + 1) * size {
                    let row = y * w + tx * size;
                    px.extend_from_slice(&reference.data()[row..row + size]);
                    py.extend_from_slice(&test.data()[row..row + size]);
                }
                total += global_ssim_slices(&px, &py, p);
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}

const VIF_SCALES: u32 = 4;
const VIF_NOISE_VAR: f64 = 2.0;
const VIF_EPS: f64 = 1e-10;

/// Pixel-domain multi-scale visual information fidelity.
///
/// Four scales; at scale `s` a Gaussian window of side `2^(5-s) + 1`
/// (sigma = side / 5) provides local statistics for the scalar GSM channel
/// model with noise variance 2. Windows whose reference variance is zero
/// add nothing to either sum, and an all-flat reference scores 0.
pub fn vif(reference: &GrayImage, test: &GrayImage) -> Result<f64> {
    reference.same_dims(test)?;
    let mut x = Plane::from_gray(reference);
    let mut y = Plane::from_gray(test);
    let mut num = 0.0;
    let mut den = 0.0;
    for scale in 1..=VIF_SCALES {
        let side = (1usize << (VIF_SCALES - scale + 1)) + 1;
        let taps = gaussian_kernel(side, side as f64 / 5.0);
        if scale > 1 {
            if x.min_side() < side {
                return Err(vif_too_small(reference));
            }
            x = x.filter_valid(&taps).decimate2();
            y = y.filter_valid(&taps).decimate2();
        }
        if x.min_side() < side {
            return Err(vif_too_small(reference));
        }
        let m = Moments::compute(&x, &y, &taps);
        for i in 0..m.mu_x.data.len() {
            let (mx, my) = (m.mu_x.data[i], m.mu_y.data[i]);
            let mut var_x = (m.xx.data[i] - mx * mx).max(0.0);
            let var_y = (m.yy.data[i] - my * my).max(0.0);
            let cov = m.xy.data[i] - mx * my;

            let (mut g, mut sv) = if var_x < VIF_EPS {
                var_x = 0.0;
                (0.0, var_y)
            } else {
                let g = cov / var_x;
                (g, var_y - g * cov)
            };
            if var_y < VIF_EPS {
                g = 0.0;
                sv = 0.0;
            }
            if g < 0.0 {
                sv = var_y;
                g = 0.0;
            }
            let sv = sv.max(VIF_EPS);
            num += (1.0 + g * g * var_x / (sv + VIF_NOISE_VAR)).log10();
            den += (1.0 + var_x / VIF_NOISE_VAR).log10();
        }
    }
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(num / den)
}

fn vif_too_small(img: &GrayImage) -> Error {
    Error::arg(format!(
        "image {}x{} too small for 4-scale VIF (needs at least 41 pixels per side)",
        img.width(),
        img.height()
    ))
}

pub const ENTROPY_EPS: f64 = 1e-10;

/// Shannon entropy in bits, `-sum p_i log2(p_i + eps)` over every bin.
///
/// The sum runs over empty bins too (they contribute zero). The tiny
/// negative value the `eps` term produces for a single-valued image is
/// clamped to zero.
pub fn entropy(img: &GrayImage, eps: f64, bins: usize) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::arg(format!("entropy eps must be positive, got {eps}")));
    }
    let hist = gray_histogram(img, bins)?;
    Ok(entropy_of(&hist, eps))
}

pub fn entropy_of(hist: &Histogram, eps: f64) -> f64 {
    let h: f64 = hist
        .normalized()
        .iter()
        .map(|&p| -p * (p + eps).log2())
        .sum();
    h.max(0.0)
}

/// Pearson correlation between the normalized bins of two histograms.
pub fn hist_correlation(a: &Histogram, b: &Histogram) -> Result<f64> {
    if a.bins() != b.bins() {
        return Err(Error::dims(
            format!("{} bins", a.bins()),
            format!("{} bins", b.bins()),
        ));
    }
    pearson(a.normalized(), b.normalized())
}

pub(crate) fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    let denom = (saa * sbb).sqrt();
    if denom == 0.0 {
        return Err(Error::Degenerate(
            "histogram correlation undefined for a constant histogram".into(),
        ));
    }
    Ok((sab / denom).clamp(-1.0, 1.0))
}

//! Feature-space metrics over pluggable feature providers.
//!
//! Deep features (Inception, VGG, CLIP, ...) are produced outside this crate
//! and ingested with [`load_features`]; class probabilities for the
//! Inception Score come in through [`load_probs`]. [`BuiltinExtractor`] is a
//! fixed hand-crafted descriptor so every metric can run without any model.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::pixel::Plane;
use crate::raster::{to_gray, ImageBuffer};

/// `samples` × `dims` row-major feature vectors plus the label of whatever produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    samples: usize,
    dims: usize,
    values: Vec<f64>,
    source: String,
}

impl FeatureMatrix {
    pub fn new(samples: usize, dims: usize, values: Vec<f64>, source: impl Into<String>) -> Result<Self> {
        if samples == 0 || dims == 0 {
            return Err(Error::arg(format!(
                "feature matrix must be non-empty, got {samples}x{dims}"
            )));
        }
        if values.len() != samples * dims {
            return Err(Error::dims(
                format!("{samples}x{dims}"),
                format!("{} values", values.len()),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::arg(format!(
                "non-finite feature at row {}, column {}",
                i / dims,
                i % dims
            )));
        }
        Ok(Self {
            samples,
            dims,
            values,
            source: source.into(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], source: impl Into<String>) -> Result<Self> {
        let dims = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != dims) {
            return Err(Error::dims(format!("{dims} columns"), format!("row {bad}")));
        }
        Self::new(rows.len(), dims, rows.concat(), source)
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dims..(i + 1) * self.dims]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dims)
    }

    /// Stack matrices with the same width. The source label of the first is kept.
    pub fn stack(parts: &[FeatureMatrix]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::arg("nothing to stack"))?;
        let mut values = Vec::new();
        for p in parts {
            if p.dims != first.dims {
                return Err(Error::dims(
                    format!("{} dims", first.dims),
                    format!("{} dims", p.dims),
                ));
            }
            values.extend_from_slice(&p.values);
        }
        Self::new(values.len() / first.dims, first.dims, values, first.source.clone())
    }

    /// Serialize in the `#features N D source` text format.
    pub fn to_text(&self) -> String {
        let mut out = format!("#features {} {} {}\n", self.samples, self.dims, self.source);
        write_rows(&mut out, &self.values, self.dims);
        out
    }

    fn single_row(&self, what: &str) -> Result<&[f64]> {
        if self.samples != 1 {
            return Err(Error::arg(format!(
                "{what} expects a single feature vector, got {} rows",
                self.samples
            )));
        }
        Ok(&self.values)
    }
}

fn write_rows(out: &mut String, values: &[f64], width: usize) {
    for row in values.chunks_exact(width) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
}

/// One spatial feature map: `height` × `width` cells of `channels` values,
/// stored cell-major with channels innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureLayer {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub values: Vec<f64>,
}

impl FeatureLayer {
    pub fn new(height: usize, width: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::arg("feature layer must be non-empty"));
        }
        if values.len() != height * width * channels {
            return Err(Error::dims(
                format!("{height}x{width}x{channels}"),
                format!("{} values", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("non-finite value in feature layer"));
        }
        Ok(Self {
            height,
            width,
            channels,
            values,
        })
    }

    fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayeredFeatures {
    pub layers: Vec<FeatureLayer>,
}

/// MMD kernel. A polynomial `alpha` of `None` means `1 / D`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, serde::Serialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Kernel {
    Polynomial {
        #[serde(default)]
        alpha: Option<f64>,
        #[serde(default = "one")]
        c: f64,
        #[serde(default = "three")]
        degree: u32,
    },
    Rbf {
        gamma: f64,
    },
    Exponential {
        gamma: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn three() -> u32 {
    3
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::Polynomial {
            alpha: None,
            c: 1.0,
            degree: 3,
        }
    }
}

impl Kernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Polynomial { alpha, c, degree } => {
                if degree < 1 {
                    return Err(Error::arg("polynomial kernel degree must be >= 1"));
                }
                if alpha.is_some_and(|a| !a.is_finite()) || !c.is_finite() {
                    return Err(Error::arg("polynomial kernel parameters must be finite"));
                }
            }
            Kernel::Rbf { gamma } | Kernel::Exponential { gamma } => {
                if !(gamma > 0.0) || !gamma.is_finite() {
                    return Err(Error::arg(format!("kernel gamma must be positive, got {gamma}")));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Kernel::Polynomial { alpha, c, degree } => {
                let a = alpha.unwrap_or(1.0 / x.len() as f64);
                let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
                (a * dot + c).powi(degree as i32)
            }
            Kernel::Rbf { gamma } => (-gamma * sq_dist(x, y)).exp(),
            Kernel::Exponential { gamma } => (-gamma * sq_dist(x, y).sqrt()).exp(),
        }
    }
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Per-sample class probabilities; every row lies on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    samples: usize,
    classes: usize,
    values: Vec<f64>,
}

impl ProbMatrix {
    pub fn new(samples: usize, classes: usize, values: Vec<f64>) -> Result<Self> {
        if samples == 0 || classes == 0 {
            return Err(Error::arg("probability matrix must be non-empty"));
        }
        if values.len() != samples * classes {
            return Err(Error::dims(
                format!("{samples}x{classes}"),
                format!("{} values", values.len()),
            ));
        }
        for (i, row) in values.chunks_exact(classes).enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::arg(format!("row {i} has a negative or non-finite probability")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::arg(format!("row {i} sums to {sum}, not 1")));
            }
        }
        Ok(Self {
            samples,
            classes,
            values,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let classes = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != classes) {
            return Err(Error::arg("ragged probability rows"));
        }
        Self::new(rows.len(), classes, rows.concat())
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.classes)
    }

    pub fn stack(parts: &[ProbMatrix]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::arg("nothing to stack"))?;
        if parts.iter().any(|p| p.classes != first.classes) {
            return Err(Error::arg("probability matrices disagree on class count"));
        }
        let values: Vec<f64> = parts.iter().flat_map(|p| p.values.iter().copied()).collect();
        Self::new(values.len() / first.classes, first.classes, values)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("#probs {} {}\n", self.samples, self.classes);
        write_rows(&mut out, &self.values, self.classes);
        out
    }
}

struct ParsedMatrix {
    rows: usize,
    cols: usize,
    label: Option<String>,
    values: Vec<f64>,
}

fn parse_matrix_text(path: &Path, text: &str, tag: &str) -> Result<ParsedMatrix> {
    let ingest = |line: usize, reason: String| Error::Ingest {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines
        .next()
        .ok_or_else(|| ingest(1, "empty file".into()))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(tag) {
        return Err(ingest(hline, format!("expected header starting with `{tag}`")));
    }
    let mut dim = |name: &str| -> Result<usize> {
        let tok = parts
            .next()
            .ok_or_else(|| ingest(hline, format!("header is missing {name}")))?;
        match tok.parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(ingest(hline, format!("bad {name} `{tok}` in header"))),
        }
    };
    let rows = dim("row count")?;
    let cols = dim("column count")?;
    let label: Vec<&str> = parts.collect();
    let label = (!label.is_empty()).then(|| label.join(" "));

    let mut values = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (lineno, line) in lines {
        seen += 1;
        if seen > rows {
            return Err(ingest(lineno, format!("more than the declared {rows} rows")));
        }
        let before = values.len();
        for (col, tok) in line.split_whitespace().enumerate() {
            let v: f64 = tok.parse().map_err(|_| {
                ingest(lineno, format!("row {}, column {}: `{tok}` is not a number", seen, col + 1))
            })?;
            if !v.is_finite() {
                return Err(ingest(
                    lineno,
                    format!("row {}, column {}: non-finite value `{tok}`", seen, col + 1),
                ));
            }
            values.push(v);
        }
        let got = values.len() - before;
        if got != cols {
            return Err(ingest(
                lineno,
                format!("row {seen} has {got} values, header declares {cols}"),
            ));
        }
    }
    if seen != rows {
        return Err(ingest(
            text.lines().count().max(1),
            format!("found {seen} rows, header declares {rows}"),
        ));
    }
    Ok(ParsedMatrix {
        rows,
        cols,
        label,
        values,
    })
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Read a feature matrix file: header `#features N D source`, then N rows of D numbers.
pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let parsed = parse_matrix_text(path, &read_text(path)?, "#features")?;
    let source = parsed
        .label
        .unwrap_or_else(|| path.display().to_string());
    FeatureMatrix::new(parsed.rows, parsed.cols, parsed.values, source)
}

/// Read a class-probability file: header `#probs N K`, then N rows of K numbers.
pub fn load_probs(path: impl AsRef<Path>) -> Result<ProbMatrix> {
    let path = path.as_ref();
    let parsed = parse_matrix_text(path, &read_text(path)?, "#probs")?;
    ProbMatrix::new(parsed.rows, parsed.cols, parsed.values).map_err(|e| Error::Ingest {
        path: path.to_path_buf(),
        line: 0,
        reason: e.to_string(),
    })
}

/// Anything that turns an image into a single feature row.
pub trait FeatureProvider: Sync {
    fn label(&self) -> &str;
    fn features(&self, img: &ImageBuffer) -> Result<FeatureMatrix>;
}

/// Pyramid gradient-orientation descriptor.
///
/// Three dyadic levels of the luma plane (2×2 mean pooling); each level is
/// split into a 4×4 grid of cells and each cell accumulates gradient
/// magnitude into 8 orientation bins centred on multiples of 45°. Gradients
/// are central differences with clamped borders and the y axis pointing
/// down. Each level's 128 values are L2-normalized (a zero level stays
/// zero), giving 384 dimensions in total.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinExtractor;

impl BuiltinExtractor {
    pub const LABEL: &'static str = "builtin-pyramid-gradient-v1";
    pub const LEVELS: usize = 3;
    pub const GRID: usize = 4;
    pub const ORIENTATIONS: usize = 8;
    pub const DIMS: usize = Self::LEVELS * Self::GRID * Self::GRID * Self::ORIENTATIONS;
    pub const MIN_SIDE: usize = 16;

    pub fn extract(&self, img: &ImageBuffer) -> Result<(FeatureMatrix, LayeredFeatures)> {
        if img.width() < Self::MIN_SIDE || img.height() < Self::MIN_SIDE {
            return Err(Error::arg(format!(
                "built-in features need at least {0}x{0} pixels, got {1}x{2}",
                Self::MIN_SIDE,
                img.width(),
                img.height()
            )));
        }
        let mut plane = Plane::from_gray(&to_gray(img));
        let mut flat = Vec::with_capacity(Self::DIMS);
        let mut layers = Vec::with_capacity(Self::LEVELS);
        for level in 0..Self::LEVELS {
            if level > 0 {
                plane = plane.downsample_mean2();
            }
            let mut cells = orientation_cells(&plane);
            let norm = cells.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                cells.iter_mut().for_each(|v| *v /= norm);
            }
            flat.extend_from_slice(&cells);
            layers.push(FeatureLayer::new(
                Self::GRID,
                Self::GRID,
                Self::ORIENTATIONS,
                cells,
            )?);
        }
        Ok((
            FeatureMatrix::new(1, Self::DIMS, flat, Self::LABEL)?,
            LayeredFeatures { layers },
        ))
    }
}

impl FeatureProvider for BuiltinExtractor {
    fn label(&self) -> &str {
        Self::LABEL
    }

    fn features(&self, img: &ImageBuffer) -> Result<FeatureMatrix> {
        self.extract(img).map(|(f, _)| f)
    }
}

fn orientation_cells(p: &Plane) -> Vec<f64> {
    let grid = BuiltinExtractor::GRID;
    let bins = BuiltinExtractor::ORIENTATIONS;
    let mut cells = vec![0.0; grid * grid * bins];
    let at = |x: usize, y: usize| p.data[y * p.width + x];
    let step = std::f64::consts::FRAC_PI_4;
    for y in 0..p.height {
        let cy = y * grid / p.height;
        for x in 0..p.width {
            let gx = at((x + 1).min(p.width - 1), y) - at(x.saturating_sub(1), y);
            let gy = at(x, (y + 1).min(p.height - 1)) - at(x, y.saturating_sub(1));
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let bin = ((gy.atan2(gx) / step).round() as i64).rem_euclid(bins as i64) as usize;
            let cx = x * grid / p.width;
            cells[(cy * grid + cx) * bins + bin] += mag;
        }
    }
    cells
}

/// Built-in descriptor of one image: the 1×384 row and its per-level grids.
pub fn extract_features_builtin(img: &ImageBuffer) -> Result<(FeatureMatrix, LayeredFeatures)> {
    BuiltinExtractor.extract(img)
}

/// Principal square root of a symmetric positive semi-definite matrix.
///
/// The input is symmetrized first; eigenvalues below zero are clamped to zero.
pub fn matrix_sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::arg(format!(
            "matrix square root needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let q = &eig.eigenvectors;
    let r = q * DMatrix::from_diagonal(&roots) * q.transpose();
    Ok((&r + r.transpose()) * 0.5)
}

fn mean_and_cov(x: &FeatureMatrix) -> (DVector<f64>, DMatrix<f64>) {
    let data = DMatrix::from_row_slice(x.samples, x.dims, &x.values);
    let mean = data.row_mean().transpose();
    let mut centered = data;
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.transpose() * &centered / (x.samples as f64 - 1.0);
    (mean, cov)
}

fn check_pair(a: &FeatureMatrix, b: &FeatureMatrix, min_samples: usize) -> Result<()> {
    if a.dims != b.dims {
        return Err(Error::dims(format!("{} dims", a.dims), format!("{} dims", b.dims)));
    }
    if a.samples < min_samples || b.samples < min_samples {
        return Err(Error::arg(format!(
            "need at least {min_samples} samples per set, got {} and {}",
            a.samples, b.samples
        )));
    }
    Ok(())
}

/// Fréchet distance between Gaussian fits of two feature sets.
///
/// The cross term is `Tr((S_r^½ S_g S_r^½)^½)`, which equals the trace of
/// `(S_r S_g)^½` but stays symmetric. Covariances use the N−1 estimator;
/// tiny negative totals from round-off become zero.
pub fn fid(real: &FeatureMatrix, generated: &FeatureMatrix) -> Result<f64> {
    check_pair(real, generated, 2)?;
    let (mu_r, cov_r) = mean_and_cov(real);
    let (mu_g, cov_g) = mean_and_cov(generated);
    let diff = &mu_r - &mu_g;
    let sqrt_r = matrix_sqrt_psd(&cov_r)?;
    let inner = &sqrt_r * &cov_g * &sqrt_r;
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross: f64 = SymmetricEigen::new(inner)
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .sum();
    let total = diff.dot(&diff) + cov_r.trace() + cov_g.trace() - 2.0 * cross;
    Ok(total.max(0.0))
}

/// Squared maximum mean discrepancy between two feature sets.
///
/// The unbiased estimator drops the diagonal of both within-set Gram
/// matrices and needs at least two samples per set; the biased one is the
/// plain mean-embedding difference and accepts single samples.
pub fn kid(real: &FeatureMatrix, generated: &FeatureMatrix, kernel: &Kernel, unbiased: bool) -> Result<f64> {
    kernel.validate()?;
    check_pair(real, generated, if unbiased { 2 } else { 1 })?;
    let within = |x: &FeatureMatrix| -> f64 {
        let n = x.samples;
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                if unbiased && i == j {
                    continue;
                }
                sum += kernel.eval(x.row(i), x.row(j));
            }
        }
        let pairs = if unbiased { n * (n - 1) } else { n * n };
        sum / pairs as f64
    };
    let mut cross = 0.0;
    for a in real.rows() {
        for b in generated.rows() {
            cross += kernel.eval(a, b);
        }
    }
    cross /= (real.samples * generated.samples) as f64;
    Ok(within(real) + within(generated) - 2.0 * cross)
}

/// Sum over layers of the spatially averaged squared channel-vector difference.
pub fn lpips_distance(a: &LayeredFeatures, b: &LayeredFeatures) -> Result<f64> {
    if a.layers.len() != b.layers.len() {
        return Err(Error::dims(
            format!("{} layers", a.layers.len()),
            format!("{} layers", b.layers.len()),
        ));
    }
    let mut total = 0.0;
    for (i, (la, lb)) in a.layers.iter().zip(&b.layers).enumerate() {
        if la.shape() != lb.shape() {
            return Err(Error::dims(
                format!("layer {i} {:?}", la.shape()),
                format!("{:?}", lb.shape()),
            ));
        }
        let sq: f64 = la
            .values
            .iter()
            .zip(&lb.values)
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        total += sq / (la.height * la.width) as f64;
    }
    Ok(total)
}

/// Euclidean distance between two single-row feature matrices.
pub fn perceptual_distance(a: &FeatureMatrix, b: &FeatureMatrix) -> Result<f64> {
    let x = a.single_row("perceptual distance")?;
    let y = b.single_row("perceptual distance")?;
    if x.len() != y.len() {
        return Err(Error::dims(format!("{} dims", x.len()), format!("{} dims", y.len())));
    }
    Ok(sq_dist(x, y).sqrt())
}

/// `exp(E_x[KL(p(y|x) || p(y))])` with `p(y)` the column mean.
pub fn inception_score(p: &ProbMatrix) -> Result<f64> {
    let n = p.samples as f64;
    let mut marginal = vec![0.0; p.classes];
    for row in p.rows() {
        for (m, v) in marginal.iter_mut().zip(row) {
            *m += v;
        }
    }
    marginal.iter_mut().for_each(|m| *m /= n);
    let mean_kl = p
        .rows()
        .map(|row| {
            row.iter()
                .zip(&marginal)
                .filter(|(pk, _)| **pk > 0.0)
                .map(|(pk, mk)| pk * (pk.ln() - mk.ln()))
                .sum::<f64>()
        })
        .sum::<f64>()
        / n;
    Ok(mean_kl.exp().max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), "test").unwrap()
    }

    #[test]
    fn sqrt_known_matrices() {
        let id = DMatrix::<f64>::identity(4, 4);
        assert!((matrix_sqrt_psd(&id).unwrap() - &id).norm() < 1e-12);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]));
        let r = matrix_sqrt_psd(&d).unwrap();
        assert!((r - DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]))).norm() < 1e-12);
        assert!(matrix_sqrt_psd(&DMatrix::<f64>::zeros(2, 3)).is_err());
    }

    #[test]
    fn fid_one_dimensional() {
        // mean 0 and 1, unbiased variance 1 each
        let r = fm(&[&[-1.0], &[1.0]]);
        let g = fm(&[&[0.0], &[2.0]]);
        let v = fid(&r, &g).unwrap();
        assert!((v - 1.0).abs() < 1e-8, "{v}");
        assert!(fid(&r, &r).unwrap().abs() < 1e-8);
        assert!(fid(&fm(&[&[1.0]]), &g).is_err());
        assert!(fid(&r, &fm(&[&[0.0, 1.0], &[1.0, 0.0]])).is_err());
    }

    #[test]
    fn kid_hand_expansion() {
        let x = fm(&[&[0.0]]);
        let y = fm(&[&[2.0]]);
        let v = kid(&x, &y, &Kernel::Rbf { gamma: 1.0 }, false).unwrap();
        assert!((v - (2.0 - 2.0 * (-4.0f64).exp())).abs() < 1e-12);
        assert!((v - 1.9634).abs() < 1e-4);
        assert!(kid(&x, &y, &Kernel::Rbf { gamma: 1.0 }, true).is_err());
        assert!(kid(&x, &y, &Kernel::Rbf { gamma: 0.0 }, false).is_err());
        let e = kid(&x, &y, &Kernel::Exponential { gamma: 1.0 }, false).unwrap();
        assert!((e - (2.0 - 2.0 * (-2.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn kid_identical_sets_biased_is_zero() {
        let x = fm(&[&[0.1, 0.5], &[0.3, -0.2], &[1.0, 2.0]]);
        assert_eq!(kid(&x, &x, &Kernel::default(), false).unwrap(), 0.0);
    }

    #[test]
    fn lpips_examples() {
        let layer = |v: Vec<f64>| FeatureLayer::new(1, 1, v.len(), v).unwrap();
        let a = LayeredFeatures {
            layers: vec![layer(vec![0.0, 0.0])],
        };
        let b = LayeredFeatures {
            layers: vec![layer(vec![3.0, 4.0])],
        };
        assert_eq!(lpips_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(lpips_distance(&a, &b).unwrap(), 25.0);
        let a2 = LayeredFeatures {
            layers: vec![layer(vec![0.0, 0.0]), layer(vec![0.0])],
        };
        let b2 = LayeredFeatures {
            layers: vec![layer(vec![3.0, 4.0]), layer(vec![3.0])],
        };
        assert_eq!(lpips_distance(&a2, &b2).unwrap(), 34.0);
        assert!(lpips_distance(&a, &a2).is_err());
        let wide = LayeredFeatures {
            layers: vec![FeatureLayer::new(1, 2, 1, vec![0.0, 0.0]).unwrap()],
        };
        assert!(lpips_distance(&a, &wide).is_err());
    }

    #[test]
    fn perceptual_distance_examples() {
        let a = fm(&[&[0.0, 0.0]]);
        let b = fm(&[&[3.0, 4.0]]);
        assert_eq!(perceptual_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(perceptual_distance(&a, &b).unwrap(), 5.0);
        assert!(perceptual_distance(&a, &fm(&[&[1.0]])).is_err());
        assert!(perceptual_distance(&a, &fm(&[&[1.0, 1.0], &[0.0, 0.0]])).is_err());
    }

    #[test]
    fn inception_score_examples() {
        let same = ProbMatrix::from_rows(&[vec![0.2, 0.8], vec![0.2, 0.8]]).unwrap();
        assert!((inception_score(&same).unwrap() - 1.0).abs() < 1e-9);
        let split = ProbMatrix::from_rows(&[
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
        ])
        .unwrap();
        assert!((inception_score(&split).unwrap() - 2.0).abs() < 1e-9);
        assert!(ProbMatrix::from_rows(&[vec![0.5, 0.6]]).is_err());
        assert!(ProbMatrix::from_rows(&[vec![1.5, -0.5]]).is_err());
    }

    #[test]
    fn builtin_constant_and_determinism() {
        let flat = ImageBuffer::solid_rgb(20, 20, [40, 50, 60]).unwrap();
        let (f, layers) = extract_features_builtin(&flat).unwrap();
        assert_eq!(f.dims(), 384);
        assert!(f.values().iter().all(|&v| v == 0.0));
        assert_eq!(layers.layers.len(), 3);
        assert!(layers.layers.iter().all(|l| l.shape() == (4, 4, 8)));

        let data: Vec<u8> = (0..32 * 24 * 3).map(|i| (i * 37 % 251) as u8).collect();
        let img = ImageBuffer::new(32, 24, 3, data).unwrap();
        let a = extract_features_builtin(&img).unwrap();
        let b = extract_features_builtin(&img).unwrap();
        assert_eq!(a, b);
        for level in a.0.values().chunks(128) {
            let n: f64 = level.iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
        assert!(extract_features_builtin(&ImageBuffer::solid_gray(15, 40, 0).unwrap()).is_err());
    }

    #[test]
    fn feature_file_roundtrip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let ok = dir.path().join("ok.txt");
        std::fs::write(&ok, "#features 2 3 inception-pool3\n1 2 3\n4.5 -6 7e-3\n").unwrap();
        let m = load_features(&ok).unwrap();
        assert_eq!((m.samples(), m.dims(), m.source()), (2, 3, "inception-pool3"));
        assert_eq!(m.row(1), &[4.5, -6.0, 7e-3]);

        let again = dir.path().join("again.txt");
        std::fs::write(&again, m.to_text()).unwrap();
        assert_eq!(load_features(&again).unwrap(), m);

        let short = dir.path().join("short.txt");
        std::fs::write(&short, "#features 2 4 x\n1 2 3 4\n1 2 3\n").unwrap();
        let err = load_features(&short).unwrap_err().to_string();
        assert!(err.contains(":3:") && err.contains("3 values"), "{err}");

        let nan = dir.path().join("nan.txt");
        std::fs::write(&nan, "#features 1 2 x\n1 NaN\n").unwrap();
        let err = load_features(&nan).unwrap_err().to_string();
        assert!(err.contains("column 2"), "{err}");

        let header = dir.path().join("header.txt");
        std::fs::write(&header, "#feature 1 2\n1 2\n").unwrap();
        assert!(load_features(&header).is_err());

        let missing_rows = dir.path().join("rows.txt");
        std::fs::write(&missing_rows, "#features 3 1 x\n1\n2\n").unwrap();
        assert!(load_features(&missing_rows).is_err());

        let probs = dir.path().join("probs.txt");
        std::fs::write(&probs, "#probs 2 2\n1 0\n0.25 0.75\n").unwrap();
        assert_eq!(load_probs(&probs).unwrap().samples(), 2);
        std::fs::write(&probs, "#probs 1 2\n0.6 0.6\n").unwrap();
        assert!(load_probs(&probs).is_err());
    }
}

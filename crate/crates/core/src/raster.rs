//! Decoded rasters and the canonical conversions every metric consumes.

use std::path::Path;

use crate::error::{Error, Result};

/// An 8-bit decoded image, row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub const BIT_DEPTH: u32 = 8;

    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::arg(format!("empty image {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::arg(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::dims(
                format!("{width}x{height}x{channels}"),
                format!("{} samples", data.len()),
            ));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Solid-colour RGB image.
    pub fn solid_rgb(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(width, height, 3, data)
    }

    pub fn solid_gray(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, 1, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn bit_depth(&self) -> u32 {
        Self::BIT_DEPTH
    }

    /// Largest representable sample value (the MAX term of PSNR).
    pub fn max_value(&self) -> f64 {
        f64::from((1u32 << Self::BIT_DEPTH) - 1)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }
}

/// Luminance plane in floating point, values in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::arg(format!("empty image {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::dims(
                format!("{width}x{height}"),
                format!("{} samples", data.len()),
            ));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=255.0).contains(*v)) {
            return Err(Error::arg(format!("gray value {v} outside [0, 255]")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub(crate) fn same_dims(&self, other: &GrayImage) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::dims(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", other.width, other.height),
            ));
        }
        Ok(())
    }

    /// Copy of the `w`×`h` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<GrayImage> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::arg(format!(
                "crop {w}x{h}+{x0}+{y0} exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            let row = y * self.width;
            data.extend_from_slice(&self.data[row + x0..row + x0 + w]);
        }
        GrayImage::new(w, h, data)
    }
}

/// Per-pixel HSV planes on the half-degree hue convention:
/// H in `[0, 180)`, S and V in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HsvPlanes {
    pub width: usize,
    pub height: usize,
    pub h: Vec<f64>,
    pub s: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    counts: Vec<u64>,
    normalized: Vec<f64>,
}

impl Histogram {
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::arg("histogram needs at least one bin"));
        }
        let total: u64 = counts.iter().sum();
        let normalized = if total == 0 {
            vec![0.0; counts.len()]
        } else {
            counts.iter().map(|&c| c as f64 / total as f64).collect()
        };
        Ok(Self { counts, normalized })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn normalized(&self) -> &[f64] {
        &self.normalized
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Concatenate several histograms bin-wise (e.g. per-channel colour histograms).
    pub fn concat(parts: &[Histogram]) -> Result<Self> {
        let counts = parts.iter().flat_map(|h| h.counts.iter().copied()).collect();
        Self::from_counts(counts)
    }
}

/// Decode a PNG or JPEG file into an 8-bit buffer.
///
/// Colour inputs come back with 3 channels and grayscale inputs with 1;
/// any alpha channel is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    use ::image::{ColorType, ImageFormat, ImageReader};

    let path = path.as_ref();
    let decode_err = |reason: String| Error::Decode {
        path: path.to_path_buf(),
        reason,
    };
    let reader = ImageReader::open(path)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?
        .with_guessed_format()
        .map_err(|e| decode_err(e.to_string()))?;
    match reader.format() {
        Some(ImageFormat::Png | ImageFormat::Jpeg) => {}
        Some(other) => return Err(decode_err(format!("unsupported format {other:?}"))),
        None => return Err(decode_err("unrecognized image format".into())),
    }
    let decoded = reader.decode().map_err(|e| decode_err(e.to_string()))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    match decoded.color() {
        ColorType::L8 | ColorType::La8 => {
            ImageBuffer::new(w, h, 1, decoded.into_luma8().into_raw())
        }
        ColorType::Rgb8 | ColorType::Rgba8 => {
            ImageBuffer::new(w, h, 3, decoded.into_rgb8().into_raw())
        }
        other => Err(decode_err(format!("unsupported sample layout {other:?}"))),
    }
}

/// Bilinear resize with half-pixel centre alignment and edge clamping.
///
/// Source coordinate for destination index `d` is `(d + 0.5) * scale - 0.5`;
/// results are rounded half-up back to 8 bits.
pub fn resize_bilinear(img: &ImageBuffer, width: usize, height: usize) -> Result<ImageBuffer> {
    if width == 0 || height == 0 {
        return Err(Error::arg(format!(
            "resize target must be at least 1x1, got {width}x{height}"
        )));
    }
    if width == img.width && height == img.height {
        return Ok(img.clone());
    }
    let xs = axis_taps(img.width, width);
    let ys = axis_taps(img.height, height);
    let c = img.channels;
    let mut data = Vec::with_capacity(width * height * c);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for ch in 0..c {
                let at = |x: usize, y: usize| f64::from(img.data[(y * img.width + x) * c + ch]);
                let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
                let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                data.push((v + 0.5).floor().clamp(0.0, 255.0) as u8);
            }
        }
    }
    ImageBuffer::new(width, height, c, data)
}

fn axis_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    let last = (src - 1) as f64;
    (0..dst)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// BT.601 luma, not re-quantized. Single-channel input is copied.
pub fn to_gray(img: &ImageBuffer) -> GrayImage {
    let data = match img.channels {
        1 => img.data.iter().map(|&v| f64::from(v)).collect(),
        _ => img
            .data
            .chunks_exact(3)
            .map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
            .map(|v| v.clamp(0.0, 255.0))
            .collect(),
    };
    GrayImage {
        width: img.width,
        height: img.height,
        data,
    }
}

pub fn to_hsv(img: &ImageBuffer) -> Result<HsvPlanes> {
    if img.channels != 3 {
        return Err(Error::arg("HSV conversion needs a 3-channel image"));
    }
    let n = img.width * img.height;
    let mut planes = HsvPlanes {
        width: img.width,
        height: img.height,
        h: Vec::with_capacity(n),
        s: Vec::with_capacity(n),
        v: Vec::with_capacity(n),
    };
    for p in img.data.chunks_exact(3) {
        let (h, s, v) = rgb_to_hsv(p[0], p[1], p[2]);
        planes.h.push(h);
        planes.s.push(s);
        planes.v.push(v);
    }
    Ok(planes)
}

fn rgb_to_hsv(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
    let (r, g, b) = (f64::from(r), f64::from(g), f64::from(b));
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { 255.0 * delta / max } else { 0.0 };
    if delta == 0.0 {
        return (0.0, s, max);
    }
    let degrees = if max == r {
        60.0 * (g - b) / delta
    } else if max == g {
        120.0 + 60.0 * (b - r) / delta
    } else {
        240.0 + 60.0 * (r - g) / delta
    };
    let mut h = degrees.rem_euclid(360.0) / 2.0;
    if h >= 180.0 {
        h = 0.0;
    }
    (h, s, max)
}

/// Histogram of gray levels; a value `v` lands in bin `floor(v * bins / 256)`.
pub fn gray_histogram(img: &GrayImage, bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::arg("histogram needs at least one bin"));
    }
    let mut counts = vec![0u64; bins];
    for &v in &img.data {
        counts[bin_index(v, bins)] += 1;
    }
    Histogram::from_counts(counts)
}

/// Concatenated per-channel histograms of an RGB image (`3 * bins` bins).
pub fn rgb_histogram(img: &ImageBuffer, bins: usize) -> Result<Histogram> {
    if img.channels != 3 {
        return Err(Error::arg("colour histogram needs a 3-channel image"));
    }
    if bins == 0 {
        return Err(Error::arg("histogram needs at least one bin"));
    }
    let mut counts = vec![0u64; 3 * bins];
    for p in img.data.chunks_exact(3) {
        for (ch, &v) in p.iter().enumerate() {
            counts[ch * bins + bin_index(f64::from(v), bins)] += 1;
        }
    }
    Histogram::from_counts(counts)
}

fn bin_index(v: f64, bins: usize) -> usize {
    let b = (v * bins as f64 / 256.0).floor();
    if b <= 0.0 {
        0
    } else {
        (b as usize).min(bins - 1)
    }
}

//! Objective colour properties per image and per model: hue, saturation,
//! brightness, vibrancy and entropy.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pixel::{entropy, ENTROPY_EPS};
use crate::raster::{to_gray, to_hsv, ImageBuffer};

/// How the vibrancy column is derived from HSV planes (0–255 scales).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vibrancy {
    /// Per-pixel mean of V + S, in `[0, 510]`.
    #[default]
    ValuePlusSaturation,
    /// Per-pixel mean of S·V / 255, in `[0, 255]`.
    ChromaScaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImageStats {
    pub hue_mean: f64,
    pub sat_mean: f64,
    pub bright_mean: f64,
    pub vibrancy: f64,
    pub entropy_bits: f64,
}

pub fn image_stats(img: &ImageBuffer) -> Result<ImageStats> {
    image_stats_with(img, Vibrancy::default())
}

pub fn image_stats_with(img: &ImageBuffer, vibrancy: Vibrancy) -> Result<ImageStats> {
    let hsv = to_hsv(img)?;
    let n = hsv.h.len() as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
    let vib = match vibrancy {
        Vibrancy::ValuePlusSaturation => hsv.v.iter().zip(&hsv.s).map(|(v, s)| v + s).sum::<f64>() / n,
        Vibrancy::ChromaScaled => hsv.v.iter().zip(&hsv.s).map(|(v, s)| v * s / 255.0).sum::<f64>() / n,
    };
    Ok(ImageStats {
        hue_mean: mean(&hsv.h),
        sat_mean: mean(&hsv.s),
        bright_mean: mean(&hsv.v),
        vibrancy: vib,
        entropy_bits: entropy(&to_gray(img), ENTROPY_EPS, 256)?,
    })
}

/// Field-wise mean per model label, ordered by label.
pub fn aggregate_stats(rows: &[(String, ImageStats)]) -> Result<Vec<(String, ImageStats)>> {
    if rows.is_empty() {
        return Err(Error::arg("no image statistics to aggregate"));
    }
    let mut groups: BTreeMap<&str, Vec<&ImageStats>> = BTreeMap::new();
    for (model, s) in rows {
        groups.entry(model.as_str()).or_default().push(s);
    }
    Ok(groups
        .into_iter()
        .map(|(model, items)| {
            let n = items.len() as f64;
            let avg = |f: fn(&ImageStats) -> f64| items.iter().map(|s| f(s)).sum::<f64>() / n;
            (
                model.to_string(),
                ImageStats {
                    hue_mean: avg(|s| s.hue_mean),
                    sat_mean: avg(|s| s.sat_mean),
                    bright_mean: avg(|s| s.bright_mean),
                    vibrancy: avg(|s| s.vibrancy),
                    entropy_bits: avg(|s| s.entropy_bits),
                },
            )
        })
        .collect())
}

pub const STATS_CSV_HEADER: &str = "model,hue,saturation,brightness,vibrancy,entropy";

/// Aggregate rows as CSV in the `model,hue,saturation,brightness,vibrancy,entropy` layout.
pub fn stats_csv(rows: &[(String, ImageStats)]) -> String {
    let mut out = String::from(STATS_CSV_HEADER);
    out.push('\n');
    for (model, s) in rows {
        let model = if model.contains([',', '"', '\n']) {
            format!("\"{}\"", model.replace('"', "\"\""))
        } else {
            model.clone()
        };
        let _ = writeln!(
            out,
            "{model},{},{},{},{},{}",
            s.hue_mean, s.sat_mean, s.bright_mean, s.vibrancy, s.entropy_bits
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn achromatic_and_red() {
        let gray = image_stats(&ImageBuffer::solid_rgb(4, 4, [128, 128, 128]).unwrap()).unwrap();
        assert_eq!((gray.hue_mean, gray.sat_mean, gray.bright_mean, gray.vibrancy), (0.0, 0.0, 128.0, 128.0));
        assert!(gray.entropy_bits < 1e-7);

        let red = image_stats(&ImageBuffer::solid_rgb(4, 4, [255, 0, 0]).unwrap()).unwrap();
        assert_eq!((red.hue_mean, red.sat_mean, red.bright_mean, red.vibrancy), (0.0, 255.0, 255.0, 510.0));
        assert!(red.entropy_bits < 1e-7);

        let chroma = image_stats_with(&ImageBuffer::solid_rgb(2, 2, [255, 0, 0]).unwrap(), Vibrancy::ChromaScaled).unwrap();
        assert_eq!(chroma.vibrancy, 255.0);
    }

    #[test]
    fn red_green_halves() {
        let mut data = Vec::new();
        for i in 0..8 {
            data.extend_from_slice(if i < 4 { &[255, 0, 0] } else { &[0, 255, 0] });
        }
        let img = ImageBuffer::new(4, 2, 3, data).unwrap();
        let s = image_stats(&img).unwrap();
        assert_eq!(s.hue_mean, 30.0);
        assert_eq!((s.sat_mean, s.bright_mean), (255.0, 255.0));
        assert!((s.entropy_bits - 1.0).abs() < 1e-6);
    }

    #[test]
    fn grayscale_rejected() {
        assert!(image_stats(&ImageBuffer::solid_gray(2, 2, 1).unwrap()).is_err());
    }

    #[test]
    fn aggregation() {
        let base = ImageStats {
            hue_mean: 40.0,
            sat_mean: 10.0,
            bright_mean: 100.0,
            vibrancy: 110.0,
            entropy_bits: 7.0,
        };
        let single = aggregate_stats(&[("camera".into(), base)]).unwrap();
        assert_eq!(single, vec![("camera".to_string(), base)]);

        let other = ImageStats { hue_mean: 60.0, ..base };
        let rows = vec![
            ("glide".to_string(), base),
            ("camera".to_string(), base),
            ("dalle2".to_string(), base),
            ("camera".to_string(), other),
        ];
        let agg = aggregate_stats(&rows).unwrap();
        let labels: Vec<&str> = agg.iter().map(|(m, _)| m.as_str()).collect();
        assert_eq!(labels, ["camera", "dalle2", "glide"]);
        assert_eq!(agg[0].1.hue_mean, 50.0);
        assert!(aggregate_stats(&[]).is_err());

        let csv = stats_csv(&agg);
        assert!(csv.starts_with("model,hue,saturation,brightness,vibrancy,entropy\ncamera,50,10,100,110,7\n"));
    }
}

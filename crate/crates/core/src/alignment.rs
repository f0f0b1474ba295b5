//! Agreement between IBS-scaled metric scores and human mean opinion scores.

use std::fmt::{self, Write as _};
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::ibs::{ibs_scale, likert_of_score, metric_key, IbsTables, Likert};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Photorealism,
    ImageQuality,
    TextImageAlignment,
}

impl Dimension {
    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Photorealism => "photorealism",
            Dimension::ImageQuality => "image_quality",
            Dimension::TextImageAlignment => "text_image_alignment",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        match key.as_str() {
            "photorealism" => Ok(Dimension::Photorealism),
            "image_quality" | "quality" => Ok(Dimension::ImageQuality),
            "text_image_alignment" | "alignment" => Ok(Dimension::TextImageAlignment),
            _ => Err(Error::arg(format!(
                "unknown dimension `{s}` (photorealism, image_quality, text_image_alignment)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MosRecord {
    pub model: String,
    pub dimension: Dimension,
    pub mean_score: f64,
}

impl MosRecord {
    pub fn new(model: impl Into<String>, dimension: Dimension, mean_score: f64) -> Result<Self> {
        let model = model.into();
        if !(0.0..=5.0).contains(&mean_score) {
            return Err(Error::arg(format!(
                "MOS for `{model}` ({dimension}) is {mean_score}, outside [0, 5]"
            )));
        }
        Ok(Self {
            model,
            dimension,
            mean_score,
        })
    }
}

/// One `model,metric,raw[,scaled]` input line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricInput {
    pub model: String,
    pub metric: String,
    pub raw: f64,
    #[serde(default)]
    pub scaled: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaledSource {
    Ibs,
    Override,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentRow {
    pub model: String,
    pub metric: String,
    pub raw: f64,
    pub scaled: f64,
    pub scaled_source: ScaledSource,
    pub human: f64,
    pub category_metric: Likert,
    pub category_human: Likert,
    pub mad: f64,
    pub mape: f64,
}

fn check_lists(human: &[f64], metric: &[f64]) -> Result<()> {
    if human.is_empty() {
        return Err(Error::arg("score lists are empty"));
    }
    if human.len() != metric.len() {
        return Err(Error::dims(
            format!("{} human scores", human.len()),
            format!("{} metric scores", metric.len()),
        ));
    }
    Ok(())
}

/// Mean absolute difference.
pub fn mad(human: &[f64], metric: &[f64]) -> Result<f64> {
    check_lists(human, metric)?;
    Ok(human.iter().zip(metric).map(|(x, y)| (x - y).abs()).sum::<f64>() / human.len() as f64)
}

/// Mean absolute percentage error, relative to the human scores.
pub fn mape(human: &[f64], metric: &[f64]) -> Result<f64> {
    check_lists(human, metric)?;
    if let Some(i) = human.iter().position(|&x| x == 0.0) {
        return Err(Error::Degenerate(format!(
            "MAPE undefined: human score at index {i} is zero"
        )));
    }
    Ok(100.0 / human.len() as f64
        * human
            .iter()
            .zip(metric)
            .map(|(x, y)| ((x - y) / x).abs())
            .sum::<f64>())
}

/// Cosine similarity of two single-row embeddings.
pub fn cosine_alignment(a: &FeatureMatrix, b: &FeatureMatrix) -> Result<f64> {
    if a.samples() != 1 || b.samples() != 1 {
        return Err(Error::arg("cosine alignment expects single-row embeddings"));
    }
    if a.dims() != b.dims() {
        return Err(Error::dims(format!("{} dims", a.dims()), format!("{} dims", b.dims())));
    }
    let (x, y) = (a.row(0), b.row(0));
    let norm = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>().sqrt();
    let (nx, ny) = (norm(x), norm(y));
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::Degenerate("cosine similarity of a zero vector".into()));
    }
    let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
    Ok((dot / (nx * ny)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Default)]
pub struct CompareOptions {
    /// Use the `scaled` column of the metric input where present.
    pub use_overrides: bool,
    /// Explicit model ordering; unlisted models follow, sorted by name.
    pub model_order: Option<Vec<String>>,
}

/// Assemble comparison rows for one evaluation dimension.
///
/// Rows are sorted by metric name, then by model (configured order first).
/// All unresolvable (model, metric) pairs are reported together.
pub fn build_comparison_table(
    metrics: &[MetricInput],
    tables: &IbsTables,
    mos: &[MosRecord],
    dimension: Dimension,
    opts: &CompareOptions,
) -> Result<Vec<AlignmentRow>> {
    let mut missing = Vec::new();
    let mut rows = Vec::with_capacity(metrics.len());
    for m in metrics {
        let human = mos
            .iter()
            .find(|r| r.dimension == dimension && r.model == m.model);
        let override_score = m.scaled.filter(|_| opts.use_overrides);
        let table = tables.get(&m.metric);
        let (Some(human), true) = (human, override_score.is_some() || table.is_some()) else {
            let mut why = Vec::new();
            if human.is_none() {
                why.push(format!("no {dimension} MOS"));
            }
            if override_score.is_none() && table.is_none() {
                why.push("no IBS table".to_string());
            }
            missing.push(format!("({}, {}): {}", m.model, m.metric, why.join(", ")));
            continue;
        };
        let (scaled, source) = match (override_score, table) {
            (Some(s), _) => {
                if !(0.0..=5.0).contains(&s) {
                    return Err(Error::arg(format!(
                        "scaled override {s} for ({}, {}) outside [0, 5]",
                        m.model, m.metric
                    )));
                }
                (s, ScaledSource::Override)
            }
            (None, Some(t)) => (ibs_scale(t, m.raw)?, ScaledSource::Ibs),
            (None, None) => unreachable!(),
        };
        let h = human.mean_score;
        let mape = mape(&[h], &[scaled]).map_err(|_| {
            Error::Degenerate(format!(
                "MAPE undefined for ({}, {}): {dimension} MOS is zero",
                m.model, m.metric
            ))
        })?;
        rows.push(AlignmentRow {
            model: m.model.clone(),
            metric: m.metric.clone(),
            raw: m.raw,
            scaled,
            scaled_source: source,
            human: h,
            category_metric: likert_of_score(scaled)?,
            category_human: likert_of_score(h)?,
            mad: mad(&[h], &[scaled])?,
            mape,
        });
    }
    if !missing.is_empty() {
        return Err(Error::Lookup(format!(
            "unresolvable pairs: {}",
            missing.join("; ")
        )));
    }
    let rank = |model: &str| -> (usize, String) {
        let pos = opts
            .model_order
            .as_ref()
            .and_then(|o| o.iter().position(|m| m == model))
            .unwrap_or(usize::MAX);
        (pos, model.to_string())
    };
    rows.sort_by(|a, b| {
        metric_key(&a.metric)
            .cmp(&metric_key(&b.metric))
            .then_with(|| rank(&a.model).cmp(&rank(&b.model)))
    });
    Ok(rows)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Ingest {
        path: path.to_path_buf(),
        line,
        reason: e.to_string(),
    }
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Mean opinion scores per model and dimension shipped with the crate.
pub const BUNDLED_MOS_CSV: &str = include_str!("../data/human_mos.csv");

/// [`BUNDLED_MOS_CSV`] parsed.
pub fn bundled_mos() -> Vec<MosRecord> {
    read_mos_csv(BUNDLED_MOS_CSV.as_bytes(), Path::new("<bundled>")).expect("bundled MOS table is valid")
}

/// Parse `model,dimension,mean_score` records.
pub fn read_mos_csv(reader: impl Read, path: &Path) -> Result<Vec<MosRecord>> {
    #[derive(Deserialize)]
    struct Raw {
        model: String,
        dimension: String,
        mean_score: f64,
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<Raw>().enumerate() {
        let raw = rec.map_err(|e| csv_err(path, e))?;
        let ingest = |reason: String| Error::Ingest {
            path: path.to_path_buf(),
            line: i + 2,
            reason,
        };
        let dim = raw.dimension.parse().map_err(|e: Error| ingest(e.to_string()))?;
        out.push(MosRecord::new(raw.model, dim, raw.mean_score).map_err(|e| ingest(e.to_string()))?);
    }
    Ok(out)
}

pub fn load_mos_csv(path: impl AsRef<Path>) -> Result<Vec<MosRecord>> {
    let path = path.as_ref();
    read_mos_csv(open(path)?, path)
}

/// Parse `model,metric,raw[,scaled]` records.
pub fn read_metrics_csv(reader: impl Read, path: &Path) -> Result<Vec<MetricInput>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<MetricInput>().enumerate() {
        let m = rec.map_err(|e| csv_err(path, e))?;
        if !m.raw.is_finite() || m.scaled.is_some_and(|s| !s.is_finite()) {
            return Err(Error::Ingest {
                path: path.to_path_buf(),
                line: i + 2,
                reason: "non-finite score".into(),
            });
        }
        out.push(m);
    }
    Ok(out)
}

pub fn load_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<MetricInput>> {
    let path = path.as_ref();
    read_metrics_csv(open(path)?, path)
}

/// Full-precision CSV in comparison-table column order.
pub fn alignment_csv(rows: &[AlignmentRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::arg(e.to_string()))?;
    }
    if rows.is_empty() {
        w.write_record([
            "model",
            "metric",
            "raw",
            "scaled",
            "scaled_source",
            "human",
            "category_metric",
            "category_human",
            "mad",
            "mape",
        ])
        .map_err(|e| Error::arg(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::arg(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Markdown table with two-decimal scores (raw values keep four).
pub fn alignment_markdown(rows: &[AlignmentRow]) -> String {
    let mut out = String::from(
        "| Model | Metric | Raw score | Scaled score | Human score | Category Metric | Category Human | MAD | MAPE |\n\
         |---|---|---|---|---|---|---|---|---|\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {:.4} | {:.2} | {:.2} | {} | {} | {:.2} | {:.2} |",
            r.model, r.metric, r.raw, r.scaled, r.human, r.category_metric, r.category_human, r.mad, r.mape
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ibs::default_tables;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn mad_examples() {
        assert!(approx(mad(&[3.30], &[4.52]).unwrap(), 1.22, 1e-9));
        assert_eq!(mad(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mad(&[1.0, 3.0], &[2.0, 2.0]).unwrap(), 1.0);
        assert!(mad(&[], &[]).is_err());
        assert!(mad(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mape_examples() {
        assert!(approx(mape(&[3.30], &[4.52]).unwrap(), 36.97, 0.05));
        assert_eq!(mape(&[2.0, 4.0], &[2.0, 4.0]).unwrap(), 0.0);
        assert!(approx(mape(&[2.04], &[2.65]).unwrap(), 29.90, 0.05));
        let err = mape(&[1.0, 0.0], &[1.0, 1.0]).unwrap_err().to_string();
        assert!(err.contains("index 1"), "{err}");
    }

    #[test]
    fn mad_symmetric_mape_not() {
        let (a, b) = ([2.0, 4.0], [3.0, 1.0]);
        assert_eq!(mad(&a, &b).unwrap(), mad(&b, &a).unwrap());
        assert_ne!(mape(&a, &b).unwrap(), mape(&b, &a).unwrap());
    }

    #[test]
    fn cosine_examples() {
        let v = |x: &[f64]| FeatureMatrix::new(1, x.len(), x.to_vec(), "t").unwrap();
        assert!(approx(cosine_alignment(&v(&[1.0, 2.0]), &v(&[1.0, 2.0])).unwrap(), 1.0, 1e-12));
        assert_eq!(cosine_alignment(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        assert!(approx(cosine_alignment(&v(&[1.0, 1.0]), &v(&[2.0, 2.0])).unwrap(), 1.0, 1e-12));
        assert!(matches!(
            cosine_alignment(&v(&[0.0, 0.0]), &v(&[1.0, 1.0])),
            Err(Error::Degenerate(_))
        ));
        assert!(cosine_alignment(&v(&[1.0]), &v(&[1.0, 1.0])).is_err());
    }

    fn mos() -> Vec<MosRecord> {
        vec![
            MosRecord::new("Stable Diffusion", Dimension::Photorealism, 3.30).unwrap(),
            MosRecord::new("GLIDE", Dimension::Photorealism, 2.04).unwrap(),
        ]
    }

    #[test]
    fn table_rows_with_override() {
        let metrics = vec![
            MetricInput {
                model: "Stable Diffusion".into(),
                metric: "FID".into(),
                raw: 28.83,
                scaled: Some(4.52),
            },
            MetricInput {
                model: "GLIDE".into(),
                metric: "LPIPS".into(),
                raw: 0.67,
                scaled: Some(2.65),
            },
        ];
        let opts = CompareOptions {
            use_overrides: true,
            ..Default::default()
        };
        let rows = build_comparison_table(&metrics, &default_tables(), &mos(), Dimension::Photorealism, &opts).unwrap();
        assert_eq!(rows[0].metric, "FID");
        assert!(approx(rows[0].mad, 1.22, 1e-9));
        assert!(approx(rows[0].mape, 36.97, 0.05));
        assert_eq!(rows[0].category_metric, Likert::StronglyAgree);
        assert_eq!(rows[0].category_human, Likert::SomewhatAgree);
        assert_eq!(rows[0].scaled_source, ScaledSource::Override);
        assert!(approx(rows[1].mad, 0.61, 0.02));
        assert!(approx(rows[1].mape, 29.90, 0.1));
        assert_eq!(rows[1].category_metric, Likert::Neutral);

        // without overrides the FID table is used
        let rows = build_comparison_table(&metrics, &default_tables(), &mos(), Dimension::Photorealism, &CompareOptions::default()).unwrap();
        assert_eq!(rows[0].scaled_source, ScaledSource::Ibs);
        assert!(approx(rows[0].scaled, 3.1 + (28.83 - 30.0) / (11.0 - 30.0), 1e-12));
    }

    #[test]
    fn self_consistent_row() {
        let metrics = vec![MetricInput {
            model: "GLIDE".into(),
            metric: "ssim".into(),
            raw: 0.0,
            scaled: None,
        }];
        let m = vec![MosRecord::new("GLIDE", Dimension::ImageQuality, 2.1 + 1.0 / 3.0).unwrap()];
        let rows = build_comparison_table(&metrics, &default_tables(), &m, Dimension::ImageQuality, &CompareOptions::default()).unwrap();
        assert!(rows[0].mad < 1e-12 && rows[0].mape < 1e-9);
        assert_eq!(rows[0].category_metric, rows[0].category_human);
    }

    #[test]
    fn missing_pairs_are_all_listed() {
        let metrics = vec![
            MetricInput { model: "DALLE3".into(), metric: "ssim".into(), raw: 0.1, scaled: None },
            MetricInput { model: "GLIDE".into(), metric: "clip".into(), raw: 0.3, scaled: None },
        ];
        let err = build_comparison_table(&metrics, &default_tables(), &mos(), Dimension::Photorealism, &CompareOptions::default())
            .unwrap_err()
            .to_string();
        assert!(err.contains("(DALLE3, ssim)") && err.contains("(GLIDE, clip)"), "{err}");
    }

    #[test]
    fn zero_mos_is_guarded() {
        let metrics = vec![MetricInput { model: "X".into(), metric: "ssim".into(), raw: 0.5, scaled: None }];
        let m = vec![MosRecord::new("X", Dimension::Photorealism, 0.0).unwrap()];
        let err = build_comparison_table(&metrics, &default_tables(), &m, Dimension::Photorealism, &CompareOptions::default())
            .unwrap_err()
            .to_string();
        assert!(err.contains("(X, ssim)"), "{err}");
    }

    #[test]
    fn ordering_and_rendering() {
        let metrics: Vec<MetricInput> = ["Stable Diffusion", "GLIDE"]
            .iter()
            .flat_map(|m| {
                ["ssim", "fid"].iter().map(move |k| MetricInput {
                    model: m.to_string(),
                    metric: k.to_string(),
                    raw: 0.5,
                    scaled: None,
                })
            })
            .collect();
        let opts = CompareOptions {
            use_overrides: false,
            model_order: Some(vec!["Stable Diffusion".into(), "GLIDE".into()]),
        };
        let rows = build_comparison_table(&metrics, &default_tables(), &mos(), Dimension::Photorealism, &opts).unwrap();
        let order: Vec<(&str, &str)> = rows.iter().map(|r| (r.metric.as_str(), r.model.as_str())).collect();
        assert_eq!(
            order,
            [("fid", "Stable Diffusion"), ("fid", "GLIDE"), ("ssim", "Stable Diffusion"), ("ssim", "GLIDE")]
        );
        let csv = alignment_csv(&rows).unwrap();
        assert!(csv.starts_with("model,metric,raw,scaled,scaled_source,human,category_metric,category_human,mad,mape\n"));
        assert!(csv.contains("Somewhat Agree"));
        let md = alignment_markdown(&rows);
        assert_eq!(md.lines().count(), 6);
        assert!(md.contains("| GLIDE | ssim | 0.5000 | 3.77 | 2.04 |"), "{md}");
    }

    #[test]
    fn csv_inputs() {
        let mos = read_mos_csv(
            "model,dimension,mean_score\nGLIDE,photorealism,2.04\nDALLE3,image quality,3.98\n".as_bytes(),
            Path::new("mos.csv"),
        )
        .unwrap();
        assert_eq!(mos[1].dimension, Dimension::ImageQuality);
        assert!(read_mos_csv("model,dimension,mean_score\nX,photorealism,7\n".as_bytes(), Path::new("m.csv")).is_err());
        assert!(read_mos_csv("model,dimension,mean_score\nX,vibes,3\n".as_bytes(), Path::new("m.csv")).is_err());

        let m = read_metrics_csv(
            "model,metric,raw,scaled\nGLIDE,FID,21.28,4.71\nGLIDE,SSIM,0.396,\n".as_bytes(),
            Path::new("metrics.csv"),
        )
        .unwrap();
        assert_eq!(m[0].scaled, Some(4.71));
        assert_eq!(m[1].scaled, None);
        let m = read_metrics_csv("model,metric,raw\nGLIDE,FID,21.28\n".as_bytes(), Path::new("m.csv")).unwrap();
        assert_eq!(m[0].scaled, None);
        assert!(read_metrics_csv("model,metric,raw\nGLIDE,FID,abc\n".as_bytes(), Path::new("m.csv")).is_err());
    }

    #[test]
    fn shipped_mos_fixture() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/human_mos.csv");
        let mos = load_mos_csv(path).unwrap();
        assert_eq!(mos, bundled_mos());
        assert_eq!(mos.len(), 15);
        let glide = mos
            .iter()
            .find(|r| r.model == "GLIDE" && r.dimension == Dimension::ImageQuality)
            .unwrap();
        assert_eq!(glide.mean_score, 2.10);
    }
}

//! Batch manifests: one CSV row per test image.
//!
//! Columns: `test_path,model` (required) and optionally `ref_path`,
//! `features_path`, `probs_path`, `caption_id`, `ref_features_path`.
//! Relative paths resolve against the manifest's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    /// `test_path` exactly as written, used to label report rows.
    pub label: String,
    pub test_path: PathBuf,
    pub model: String,
    pub ref_path: Option<PathBuf>,
    pub features_path: Option<PathBuf>,
    pub probs_path: Option<PathBuf>,
    pub caption_id: Option<String>,
    pub ref_features_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRow {
    test_path: String,
    model: String,
    #[serde(default)]
    ref_path: Option<String>,
    #[serde(default)]
    features_path: Option<String>,
    #[serde(default)]
    probs_path: Option<String>,
    #[serde(default)]
    caption_id: Option<String>,
    #[serde(default)]
    ref_features_path: Option<String>,
}

impl Manifest {
    /// Parse and validate. Structural problems are usage errors; referenced
    /// files that do not exist are data errors, all listed at once.
    pub fn load(path: &Path) -> CliResult<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| CliError::usage(format!("cannot read manifest {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(file, base, path)
    }

    pub fn parse(reader: impl std::io::Read, base: &Path, name: &Path) -> CliResult<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let resolve = |p: &str| {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let nonempty = |v: Option<String>| v.filter(|s| !s.is_empty());
        let mut rows = Vec::new();
        for (i, rec) in rdr.deserialize::<RawRow>().enumerate() {
            let line = i + 2;
            let raw = rec.map_err(|e| CliError::usage(format!("{}: {e}", name.display())))?;
            if raw.model.is_empty() {
                return Err(CliError::usage(format!("{}:{line}: empty model label", name.display())));
            }
            if raw.test_path.is_empty() {
                return Err(CliError::usage(format!("{}:{line}: empty test_path", name.display())));
            }
            rows.push(ManifestRow {
                test_path: resolve(&raw.test_path),
                label: raw.test_path,
                model: raw.model,
                ref_path: nonempty(raw.ref_path).map(|p| resolve(&p)),
                features_path: nonempty(raw.features_path).map(|p| resolve(&p)),
                probs_path: nonempty(raw.probs_path).map(|p| resolve(&p)),
                caption_id: nonempty(raw.caption_id),
                ref_features_path: nonempty(raw.ref_features_path).map(|p| resolve(&p)),
            });
        }
        if rows.is_empty() {
            return Err(CliError::usage(format!("{}: manifest has no rows", name.display())));
        }
        let missing: Vec<String> = rows
            .iter()
            .flat_map(|r| {
                [
                    Some(&r.test_path),
                    r.ref_path.as_ref(),
                    r.features_path.as_ref(),
                    r.probs_path.as_ref(),
                    r.ref_features_path.as_ref(),
                ]
            })
            .flatten()
            .filter(|p| !p.exists())
            .map(|p| p.display().to_string())
            .collect();
        if !missing.is_empty() {
            return Err(CliError::data(format!(
                "{}: missing files: {}",
                name.display(),
                missing.join(", ")
            )));
        }
        Ok(Self { rows })
    }
}

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use verity_core::features::{BuiltinExtractor, Kernel};
use verity_core::ibs::{default_tables_with_is_cap, load_ibs_tables, metric_key, IbsTables};
use verity_core::nfss::NfssConfig;
use verity_core::pixel::{MsSsimParams, SsimParams};
use verity_core::stats::Vibrancy;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MetricName {
    Psnr,
    Ssim,
    MsSsim,
    Vif,
    HistCorr,
    Entropy,
    Lpips,
    Nfss,
    Fid,
    Kid,
    Is,
}

impl MetricName {
    pub const ALL: [MetricName; 11] = [
        MetricName::Psnr,
        MetricName::Ssim,
        MetricName::MsSsim,
        MetricName::Vif,
        MetricName::HistCorr,
        MetricName::Entropy,
        MetricName::Lpips,
        MetricName::Nfss,
        MetricName::Fid,
        MetricName::Kid,
        MetricName::Is,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::Psnr => "psnr",
            MetricName::Ssim => "ssim",
            MetricName::MsSsim => "ms_ssim",
            MetricName::Vif => "vif",
            MetricName::HistCorr => "hist_corr",
            MetricName::Entropy => "entropy",
            MetricName::Lpips => "lpips",
            MetricName::Nfss => "nfss",
            MetricName::Fid => "fid",
            MetricName::Kid => "kid",
            MetricName::Is => "is",
        }
    }

    /// Computed once per model over pooled inputs rather than per image.
    pub fn is_model_level(self) -> bool {
        matches!(self, MetricName::Fid | MetricName::Kid | MetricName::Is)
    }

    pub fn needs_reference(self) -> bool {
        !matches!(self, MetricName::Entropy | MetricName::Is)
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricName {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let key = metric_key(s);
        let key = match key.as_str() {
            "msssim" => "ms_ssim",
            "histcorr" | "hc" => "hist_corr",
            "inception_score" => "is",
            other => other,
        };
        MetricName::ALL
            .into_iter()
            .find(|m| m.as_str() == key)
            .ok_or_else(|| {
                let names: Vec<&str> = MetricName::ALL.iter().map(|m| m.as_str()).collect();
                CliError::usage(format!("unknown metric `{s}` (known: {})", names.join(", ")))
            })
    }
}

impl Serialize for MetricName {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for MetricName {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Parse a comma-separated metric list, dropping duplicates.
pub fn parse_metric_list(list: &str) -> CliResult<Vec<MetricName>> {
    let mut out: Vec<MetricName> = Vec::new();
    for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let m = part.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(CliError::usage("metric list is empty"));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Provider {
    /// Built-in gradient-orientation descriptor computed from pixels.
    #[default]
    Builtin,
    /// Precomputed feature files named in the manifest.
    Files,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
    #[value(alias = "markdown")]
    #[serde(alias = "markdown")]
    Md,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KidConfig {
    pub kernel: Kernel,
    pub unbiased: bool,
}

impl Default for KidConfig {
    fn default() -> Self {
        Self {
            kernel: Kernel::default(),
            unbiased: true,
        }
    }
}

/// Everything a run needs besides the manifest. Loaded from TOML; CLI
/// flags override individual fields.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub metrics: Vec<MetricName>,
    /// Every image is resized to this (width, height) before scoring.
    pub resize: (usize, usize),
    pub ssim: SsimParams,
    pub ms_ssim: MsSsimParams,
    /// NFSS options. Its `resize` is replaced by the run's `resize`.
    pub nfss: NfssConfig,
    pub kid: KidConfig,
    pub ibs_tables: Option<PathBuf>,
    /// Saturation anchor of the built-in IS table.
    pub is_class_cap: f64,
    pub provider: Provider,
    pub format: Format,
    pub jobs: Option<usize>,
    pub vibrancy: Vibrancy,
    pub model_order: Option<Vec<String>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            metrics: vec![
                MetricName::Psnr,
                MetricName::Ssim,
                MetricName::MsSsim,
                MetricName::Vif,
                MetricName::HistCorr,
                MetricName::Entropy,
            ],
            resize: (299, 299),
            ssim: SsimParams::default(),
            ms_ssim: MsSsimParams::default(),
            nfss: NfssConfig::default(),
            kid: KidConfig::default(),
            ibs_tables: None,
            is_class_cap: 10.0,
            provider: Provider::Builtin,
            format: Format::Csv,
            jobs: None,
            vibrancy: Vibrancy::default(),
            model_order: None,
        }
    }
}

impl RunConfig {
    /// Parse TOML text. Relative table paths resolve against `base`.
    pub fn from_toml(text: &str, base: &Path) -> CliResult<Self> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::usage(format!("config: {e}")))?;
        if let Some(p) = &cfg.ibs_tables {
            if p.is_relative() {
                cfg.ibs_tables = Some(base.join(p));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Check cross-field constraints and align the NFSS resize target.
    pub fn finalize(mut self) -> CliResult<Self> {
        let (w, h) = self.resize;
        if w == 0 || h == 0 {
            return Err(CliError::usage("resize target must be positive"));
        }
        let side = BuiltinExtractor::MIN_SIDE;
        if self.provider == Provider::Builtin && (w < side || h < side) {
            return Err(CliError::usage(format!(
                "resize target {w}x{h} is below {side}x{side}, the minimum for built-in features"
            )));
        }
        if self.metrics.is_empty() {
            return Err(CliError::usage("no metrics selected"));
        }
        self.ssim.validate().map_err(|e| CliError::usage(format!("config: {e}")))?;
        self.kid.kernel.validate().map_err(|e| CliError::usage(format!("config: {e}")))?;
        if self.jobs == Some(0) {
            return Err(CliError::usage("jobs must be at least 1"));
        }
        self.nfss.resize = self.resize;
        self.nfss.ssim = self.ssim;
        Ok(self)
    }

    pub fn worker_count(&self) -> usize {
        self.jobs.unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
    }

    /// Built-in tables (IS anchored at `is_class_cap`) plus any user file.
    pub fn tables(&self) -> CliResult<IbsTables> {
        let mut tables = default_tables_with_is_cap(self.is_class_cap)
            .map_err(|e| CliError::usage(format!("is_class_cap: {e}")))?;
        if let Some(path) = &self.ibs_tables {
            let user = load_ibs_tables(path).map_err(|e| CliError::usage(e))?;
            tables.merge(user);
        }
        Ok(tables)
    }
}

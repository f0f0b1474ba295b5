use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::config::Format;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Image,
    Model,
}

/// One line of a `metrics` report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub scope: Scope,
    pub model: String,
    /// Manifest `test_path` for image rows, empty for model rows.
    pub image: String,
    pub metric: String,
    pub value: Option<f64>,
    /// IBS score when a table exists for the metric.
    pub scaled: Option<f64>,
    pub note: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsRow {
    pub scope: Scope,
    pub model: String,
    pub image: String,
    pub hue: Option<f64>,
    pub saturation: Option<f64>,
    pub brightness: Option<f64>,
    pub vibrancy: Option<f64>,
    pub entropy: Option<f64>,
    pub error: String,
}

pub fn to_csv<T: Serialize>(rows: &[T], header: &[&str]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(header).map_err(CliError::data)?;
    }
    for r in rows {
        w.serialize(r).map_err(CliError::data)?;
    }
    let bytes = w.into_inner().map_err(CliError::data)?;
    String::from_utf8(bytes).map_err(CliError::data)
}

pub fn to_json<T: Serialize>(rows: &[T]) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(rows).map_err(CliError::data)?;
    s.push('\n');
    Ok(s)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"))
}

fn md_text(s: &str) -> String {
    if s.is_empty() {
        "-".into()
    } else {
        s.replace('|', "\\|")
    }
}

pub const METRIC_HEADER: [&str; 8] = ["scope", "model", "image", "metric", "value", "scaled", "note", "error"];
pub const STATS_HEADER: [&str; 9] = [
    "scope",
    "model",
    "image",
    "hue",
    "saturation",
    "brightness",
    "vibrancy",
    "entropy",
    "error",
];

fn scope_str(s: Scope) -> &'static str {
    match s {
        Scope::Image => "image",
        Scope::Model => "model",
    }
}

pub fn metrics_markdown(rows: &[MetricRow]) -> String {
    let mut out = String::from(
        "| Scope | Model | Image | Metric | Value | Scaled | Note | Error |\n|---|---|---|---|---|---|---|---|\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} |",
            scope_str(r.scope),
            md_text(&r.model),
            md_text(&r.image),
            r.metric,
            cell(r.value),
            cell(r.scaled),
            md_text(&r.note),
            md_text(&r.error)
        );
    }
    out
}

pub fn stats_markdown(rows: &[StatsRow]) -> String {
    let mut out = String::from(
        "| Scope | Model | Image | Hue | Saturation | Brightness | Vibrancy | Entropy | Error |\n|---|---|---|---|---|---|---|---|---|\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            scope_str(r.scope),
            md_text(&r.model),
            md_text(&r.image),
            cell(r.hue),
            cell(r.saturation),
            cell(r.brightness),
            cell(r.vibrancy),
            cell(r.entropy),
            md_text(&r.error)
        );
    }
    out
}

pub fn render_metrics(rows: &[MetricRow], format: Format) -> CliResult<String> {
    match format {
        Format::Csv => to_csv(rows, &METRIC_HEADER),
        Format::Json => to_json(rows),
        Format::Md => Ok(metrics_markdown(rows)),
    }
}

pub fn render_stats(rows: &[StatsRow], format: Format) -> CliResult<String> {
    match format {
        Format::Csv => to_csv(rows, &STATS_HEADER),
        Format::Json => to_json(rows),
        Format::Md => Ok(stats_markdown(rows)),
    }
}

/// Write to `out`, or stdout when `None`.
pub fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display()))),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::data(format!("cannot write to stdout: {e}")))
        }
    }
}

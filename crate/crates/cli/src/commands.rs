use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use verity_core::alignment::{
    alignment_csv, alignment_markdown, build_comparison_table, bundled_mos, load_metrics_csv, load_mos_csv,
    CompareOptions, Dimension,
};
use verity_core::features::{
    extract_features_builtin, fid, inception_score, kid, load_features, load_probs, lpips_distance, BuiltinExtractor,
    FeatureMatrix, FeatureProvider, ProbMatrix,
};
use verity_core::ibs::{ibs_scale, likert_of_score, IbsTables};
use verity_core::nfss::{nfss_evaluate, nfss_evaluate_with_features, HistogramMode, NfssComponents};
use verity_core::pixel::{entropy, hist_correlation, ms_ssim, psnr, ssim, vif, ENTROPY_EPS, PSNR_SENTINEL_DB};
use verity_core::raster::{gray_histogram, load_image, resize_bilinear, rgb_histogram, to_gray};
use verity_core::stats::{aggregate_stats, image_stats_with, ImageStats};
use verity_core::ImageBuffer;

use crate::config::{Format, MetricName, Provider, RunConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::{Manifest, ManifestRow};
use crate::report::{to_csv, to_json, MetricRow, Scope, StatsRow};

/// Rows of a finished run and how many of them carry an error.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome<R> {
    pub rows: Vec<R>,
    pub failed: usize,
}

fn pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::usage(format!("cannot start {jobs} workers: {e}")))
}

/// Sort key for model labels: configured order first, then by name.
fn model_rank<'a>(order: &Option<Vec<String>>, model: &'a str) -> (usize, &'a str) {
    let pos = order
        .as_ref()
        .and_then(|o| o.iter().position(|m| m == model))
        .unwrap_or(usize::MAX);
    (pos, model)
}

fn group_by_model<'a, T>(
    items: impl Iterator<Item = (&'a str, T)>,
    order: &Option<Vec<String>>,
) -> Vec<(&'a str, Vec<T>)> {
    let mut groups: BTreeMap<(usize, &str), Vec<T>> = BTreeMap::new();
    for (model, item) in items {
        groups.entry(model_rank(order, model)).or_default().push(item);
    }
    groups.into_iter().map(|((_, m), v)| (m, v)).collect()
}

type Input<T> = Option<Result<T, String>>;

struct ImageWork {
    rows: Vec<MetricRow>,
    generated: Input<FeatureMatrix>,
    real: Input<FeatureMatrix>,
    probs: Input<ProbMatrix>,
}

struct Loaded {
    test: ImageBuffer,
    reference: Option<ImageBuffer>,
}

fn load_pair(row: &ManifestRow, cfg: &RunConfig, want_ref: bool) -> Result<Loaded, String> {
    let (w, h) = cfg.resize;
    let test = load_image(&row.test_path)
        .and_then(|i| resize_bilinear(&i, w, h))
        .map_err(|e| e.to_string())?;
    let reference = match (&row.ref_path, want_ref) {
        (Some(p), true) => Some(
            load_image(p)
                .and_then(|i| resize_bilinear(&i, w, h))
                .map_err(|e| e.to_string())?,
        ),
        _ => None,
    };
    Ok(Loaded { test, reference })
}

fn image_metric(m: MetricName, row: &ManifestRow, px: &Loaded, cfg: &RunConfig) -> Result<(f64, String), String> {
    let err = |e: verity_core::Error| e.to_string();
    let gt = to_gray(&px.test);
    if m == MetricName::Entropy {
        return entropy(&gt, ENTROPY_EPS, 256).map(|v| (v, String::new())).map_err(err);
    }
    let reference = px
        .reference
        .as_ref()
        .ok_or_else(|| format!("{m} requires ref_path"))?;
    let gr = to_gray(reference);
    let value = match m {
        MetricName::Psnr => {
            let v = psnr(&gr, &gt, px.test.max_value()).map_err(err)?;
            if v.is_infinite() {
                return Ok((PSNR_SENTINEL_DB, "identical images; sentinel value".into()));
            }
            v
        }
        MetricName::Ssim => ssim(&gr, &gt, &cfg.ssim).map_err(err)?,
        MetricName::MsSsim => ms_ssim(&gr, &gt, &cfg.ms_ssim, &cfg.ssim).map_err(err)?,
        MetricName::Vif => vif(&gr, &gt).map_err(err)?,
        MetricName::HistCorr => {
            let bins = cfg.nfss.hist_bins;
            let (a, b) = match cfg.nfss.hist_mode {
                HistogramMode::Gray => (gray_histogram(&gr, bins), gray_histogram(&gt, bins)),
                HistogramMode::Rgb => (rgb_histogram(reference, bins), rgb_histogram(&px.test, bins)),
            };
            hist_correlation(&a.map_err(err)?, &b.map_err(err)?).map_err(err)?
        }
        MetricName::Lpips => {
            let (_, a) = extract_features_builtin(reference).map_err(err)?;
            let (_, b) = extract_features_builtin(&px.test).map_err(err)?;
            return lpips_distance(&a, &b)
                .map(|v| (v, format!("provider={}", BuiltinExtractor::LABEL)))
                .map_err(err);
        }
        MetricName::Nfss => {
            let c = match cfg.provider {
                Provider::Builtin => nfss_evaluate(reference, &px.test, &cfg.nfss, &BuiltinExtractor).map_err(err)?,
                Provider::Files => {
                    let (Some(rf), Some(tf)) = (&row.ref_features_path, &row.features_path) else {
                        return Err("nfss with file features requires ref_features_path and features_path".into());
                    };
                    let rf = load_features(rf).map_err(err)?;
                    let tf = load_features(tf).map_err(err)?;
                    nfss_evaluate_with_features(reference, &px.test, &rf, &tf, &cfg.nfss).map_err(err)?
                }
            };
            return Ok((c.nfss, format!("provider={} alpha={}", c.provider, c.alpha)));
        }
        MetricName::Entropy | MetricName::Fid | MetricName::Kid | MetricName::Is => unreachable!(),
    };
    Ok((value, String::new()))
}

fn scaled(tables: &IbsTables, metric: &str, value: Option<f64>) -> Option<f64> {
    let v = value?;
    tables.get(metric).and_then(|t| ibs_scale(t, v).ok())
}

fn process_row(row: &ManifestRow, cfg: &RunConfig, tables: &IbsTables) -> ImageWork {
    let image_metrics: Vec<MetricName> = cfg.metrics.iter().copied().filter(|m| !m.is_model_level()).collect();
    let wants = |m: MetricName| cfg.metrics.contains(&m);
    let distribution = wants(MetricName::Fid) || wants(MetricName::Kid);
    let builtin_dist = distribution && cfg.provider == Provider::Builtin;
    let need_pixels = !image_metrics.is_empty() || builtin_dist;
    let want_ref = image_metrics.iter().any(|m| m.needs_reference()) || builtin_dist;

    let pixels = if need_pixels { Some(load_pair(row, cfg, want_ref)) } else { None };

    let mut rows = Vec::with_capacity(cfg.metrics.len());
    let mut push = |metric: &str, result: Result<(f64, String), String>| {
        let (value, note, error) = match result {
            Ok((v, n)) => (Some(v), n, String::new()),
            Err(e) => (None, String::new(), e),
        };
        rows.push(MetricRow {
            scope: Scope::Image,
            model: row.model.clone(),
            image: row.label.clone(),
            metric: metric.to_string(),
            value,
            scaled: scaled(tables, metric, value),
            note,
            error,
        });
    };
    for &m in &image_metrics {
        let result = match &pixels {
            Some(Ok(px)) => image_metric(m, row, px, cfg),
            Some(Err(e)) => Err(e.clone()),
            None => unreachable!(),
        };
        push(m.as_str(), result);
    }

    let (mut generated, mut real) = (None, None);
    if distribution {
        match cfg.provider {
            Provider::Builtin => {
                let feats = |img: &ImageBuffer| BuiltinExtractor.features(img).map_err(|e| e.to_string());
                match &pixels {
                    Some(Ok(px)) => {
                        generated = Some(feats(&px.test));
                        real = px.reference.as_ref().map(feats);
                    }
                    Some(Err(e)) => generated = Some(Err(e.clone())),
                    None => unreachable!(),
                }
            }
            Provider::Files => {
                generated = Some(match &row.features_path {
                    Some(p) => load_features(p).map_err(|e| e.to_string()),
                    None => Err("fid/kid with file features require features_path".into()),
                });
                real = row
                    .ref_features_path
                    .as_ref()
                    .map(|p| load_features(p).map_err(|e| e.to_string()));
            }
        }
        if let Some(Err(e)) = &generated {
            for m in [MetricName::Fid, MetricName::Kid].into_iter().filter(|m| wants(*m)) {
                push(m.as_str(), Err(e.clone()));
            }
        }
    }

    let mut probs = None;
    if wants(MetricName::Is) {
        let loaded = match &row.probs_path {
            Some(p) => load_probs(p).map_err(|e| e.to_string()),
            None => Err("inception_score requires probability file".into()),
        };
        if let Err(e) = &loaded {
            push(MetricName::Is.as_str(), Err(e.clone()));
        }
        probs = Some(loaded);
    }

    ImageWork {
        rows,
        generated,
        real,
        probs,
    }
}

fn pooled<T: Clone>(
    items: &[&Input<T>],
    what: &str,
    stack: impl Fn(&[T]) -> verity_core::Result<T>,
) -> Result<T, String> {
    let mut ok = Vec::with_capacity(items.len());
    let mut bad = 0;
    for item in items {
        match item {
            Some(Ok(v)) => ok.push(v.clone()),
            _ => bad += 1,
        }
    }
    if bad > 0 {
        return Err(format!("{bad} of {} images lack {what}", items.len()));
    }
    stack(&ok).map_err(|e| e.to_string())
}

fn model_rows(model: &str, works: &[&ImageWork], cfg: &RunConfig, tables: &IbsTables) -> Vec<MetricRow> {
    let mut out = Vec::new();
    let mut push = |metric: MetricName, result: Result<(f64, String), String>| {
        let (value, note, error) = match result {
            Ok((v, n)) => (Some(v), n, String::new()),
            Err(e) => (None, String::new(), e),
        };
        out.push(MetricRow {
            scope: Scope::Model,
            model: model.to_string(),
            image: String::new(),
            metric: metric.to_string(),
            value,
            scaled: scaled(tables, metric.as_str(), value),
            note,
            error,
        });
    };
    for &m in &cfg.metrics {
        let result = match m {
            MetricName::Fid | MetricName::Kid => {
                let gen: Vec<_> = works.iter().map(|w| &w.generated).collect();
                let real: Vec<_> = works.iter().map(|w| &w.real).collect();
                let what_real = match cfg.provider {
                    Provider::Builtin => "reference images",
                    Provider::Files => "ref_features_path",
                };
                pooled(&gen, "features", FeatureMatrix::stack).and_then(|g| {
                    let r = pooled(&real, what_real, FeatureMatrix::stack)?;
                    let note = format!("real={} generated={}", r.samples(), g.samples());
                    let v = if m == MetricName::Fid {
                        fid(&r, &g)
                    } else {
                        kid(&r, &g, &cfg.kid.kernel, cfg.kid.unbiased)
                    };
                    v.map(|v| (v, note)).map_err(|e| e.to_string())
                })
            }
            MetricName::Is => {
                let probs: Vec<_> = works.iter().map(|w| &w.probs).collect();
                pooled(&probs, "probability files", ProbMatrix::stack).and_then(|p| {
                    inception_score(&p)
                        .map(|v| (v, format!("samples={}", p.samples())))
                        .map_err(|e| e.to_string())
                })
            }
            _ => {
                let name = m.as_str();
                let mut values = Vec::new();
                let mut failed = 0;
                let mut sentinel = false;
                for r in works.iter().flat_map(|w| &w.rows).filter(|r| r.metric == name) {
                    match r.value {
                        Some(v) => {
                            sentinel |= m == MetricName::Psnr && v == PSNR_SENTINEL_DB;
                            values.push(v);
                        }
                        None => failed += 1,
                    }
                }
                if values.is_empty() {
                    Err(format!("no image produced {name}"))
                } else {
                    let mut notes = vec![format!("mean of {}", values.len())];
                    if failed > 0 {
                        notes.push(format!("{failed} failed"));
                    }
                    if sentinel {
                        notes.push("includes sentinel values".into());
                    }
                    Ok((values.iter().sum::<f64>() / values.len() as f64, notes.join("; ")))
                }
            }
        };
        push(m, result);
    }
    out
}

/// Score every manifest row, then add per-model aggregates and pooled
/// distribution metrics. Output order is independent of the worker count.
pub fn cmd_metrics(manifest: &Manifest, cfg: &RunConfig, tables: &IbsTables) -> CliResult<Outcome<MetricRow>> {
    let workers = pool(cfg.worker_count())?;
    let works: Vec<ImageWork> =
        workers.install(|| manifest.rows.par_iter().map(|r| process_row(r, cfg, tables)).collect());

    let groups = group_by_model(
        manifest.rows.iter().zip(&works).map(|(r, w)| (r.model.as_str(), w)),
        &cfg.model_order,
    );
    let per_model: Vec<Vec<MetricRow>> = workers.install(|| {
        groups
            .par_iter()
            .map(|(model, ws)| model_rows(model, ws, cfg, tables))
            .collect()
    });

    let rows: Vec<MetricRow> = works
        .into_iter()
        .flat_map(|w| w.rows)
        .chain(per_model.into_iter().flatten())
        .collect();
    let failed = rows.iter().filter(|r| !r.error.is_empty()).count();
    Ok(Outcome { rows, failed })
}

/// Colour statistics per image plus one aggregate row per model.
pub fn cmd_stats(manifest: &Manifest, cfg: &RunConfig) -> CliResult<Outcome<StatsRow>> {
    let workers = pool(cfg.worker_count())?;
    let results: Vec<Result<ImageStats, String>> = workers.install(|| {
        manifest
            .rows
            .par_iter()
            .map(|r| {
                load_image(&r.test_path)
                    .and_then(|img| image_stats_with(&img, cfg.vibrancy))
                    .map_err(|e| e.to_string())
            })
            .collect()
    });

    let row = |scope, model: &str, image: &str, s: Option<&ImageStats>, error: String| StatsRow {
        scope,
        model: model.to_string(),
        image: image.to_string(),
        hue: s.map(|s| s.hue_mean),
        saturation: s.map(|s| s.sat_mean),
        brightness: s.map(|s| s.bright_mean),
        vibrancy: s.map(|s| s.vibrancy),
        entropy: s.map(|s| s.entropy_bits),
        error,
    };
    let mut rows: Vec<StatsRow> = manifest
        .rows
        .iter()
        .zip(&results)
        .map(|(r, res)| match res {
            Ok(s) => row(Scope::Image, &r.model, &r.label, Some(s), String::new()),
            Err(e) => row(Scope::Image, &r.model, &r.label, None, e.clone()),
        })
        .collect();

    let groups = group_by_model(
        manifest.rows.iter().zip(&results).map(|(r, res)| (r.model.as_str(), res)),
        &cfg.model_order,
    );
    for (model, items) in groups {
        let ok: Vec<(String, ImageStats)> = items
            .iter()
            .filter_map(|r| r.as_ref().ok())
            .map(|s| (model.to_string(), *s))
            .collect();
        match aggregate_stats(&ok) {
            Ok(agg) => rows.push(row(Scope::Model, model, "", Some(&agg[0].1), String::new())),
            Err(_) => rows.push(row(Scope::Model, model, "", None, "no image produced statistics".into())),
        }
    }
    let failed = rows.iter().filter(|r| !r.error.is_empty()).count();
    Ok(Outcome { rows, failed })
}

/// `"<metric> <raw> => <scaled> <label>"` for one value.
pub fn cmd_ibs(metric: &str, value: f64, tables: &IbsTables) -> CliResult<String> {
    if !value.is_finite() {
        return Err(CliError::usage(format!("value must be finite, got {value}")));
    }
    let table = tables.get(metric).ok_or_else(|| {
        let names: Vec<&str> = tables.names().collect();
        CliError::usage(format!(
            "no IBS table for `{metric}` (available: {}); supply one with --ibs-tables",
            names.join(", ")
        ))
    })?;
    let score = ibs_scale(table, value)?;
    let label = likert_of_score(score)?;
    Ok(format!("{metric} {value} => {score:.2} {label}"))
}

pub struct CompareArgs<'a> {
    pub metrics_csv: &'a Path,
    pub mos_csv: Option<&'a Path>,
    pub dimension: Dimension,
    pub use_overrides: bool,
}

/// Comparison table of IBS-scaled metrics against human scores.
pub fn cmd_compare(args: &CompareArgs, cfg: &RunConfig, tables: &IbsTables, format: Format) -> CliResult<String> {
    let metrics = load_metrics_csv(args.metrics_csv).map_err(|e| CliError::usage(e))?;
    let mos = match args.mos_csv {
        Some(p) => load_mos_csv(p).map_err(|e| CliError::usage(e))?,
        None => bundled_mos(),
    };
    let opts = CompareOptions {
        use_overrides: args.use_overrides,
        model_order: cfg.model_order.clone(),
    };
    let rows = build_comparison_table(&metrics, tables, &mos, args.dimension, &opts)?;
    match format {
        Format::Csv => Ok(alignment_csv(&rows)?),
        Format::Json => to_json(&rows),
        Format::Md => Ok(alignment_markdown(&rows)),
    }
}

pub struct NfssArgs<'a> {
    pub reference: &'a Path,
    pub test: &'a Path,
    pub ref_features: Option<&'a Path>,
    pub test_features: Option<&'a Path>,
}

/// NFSS with all intermediates for a single pair.
pub fn cmd_nfss(args: &NfssArgs, cfg: &RunConfig) -> CliResult<NfssComponents> {
    let reference = load_image(args.reference)?;
    let test = load_image(args.test)?;
    let c = match (args.ref_features, args.test_features) {
        (Some(rf), Some(tf)) => {
            nfss_evaluate_with_features(&reference, &test, &load_features(rf)?, &load_features(tf)?, &cfg.nfss)?
        }
        (None, None) => nfss_evaluate(&reference, &test, &cfg.nfss, &BuiltinExtractor)?,
        _ => return Err(CliError::usage("--ref-features and --test-features go together")),
    };
    Ok(c)
}

pub fn render_nfss(c: &NfssComponents, format: Format) -> CliResult<String> {
    match format {
        Format::Csv => to_csv(std::slice::from_ref(c), &[]),
        Format::Json => to_json(std::slice::from_ref(c)),
        Format::Md => Ok(format!(
            "| SSIM_MS | Dp | Hc | H | alpha | NFSS | Provider |\n|---|---|---|---|---|---|---|\n| {:.4} | {:.4} | {:.4} | {:.4} | {:.4} | {:.4} | {} |\n",
            c.ssim_ms, c.dp, c.hc, c.h, c.alpha, c.nfss, c.provider
        )),
    }
}

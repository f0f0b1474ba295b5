//! Interpolative Binning Scale: raw metric value → 0–5 Likert-comparable score.
//!
//! A table splits the raw axis into five labelled bins. A raw value is
//! classified into its bin and linearly interpolated between the bin's
//! lower anchor (the label's score floor) and its upper anchor (the next
//! label's floor, or 5.0 for the best label). The resulting map is
//! continuous and monotone:
//!
//! * values in gaps between non-touching bins hold the
//!   shared boundary score;
//! * an open best bin is anchored at `saturation` (raw → 5.0) and an open
//!   worst bin at `floor` (raw → 0.0);
//! * anything beyond the outermost anchors clamps to 0 or 5.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Five-point agreement label. Serialized as its display text; parsing
/// ignores case, spaces and underscores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, )]
pub enum Likert {
    StronglyDisagree,
    SomewhatDisagree,
    Neutral,
    SomewhatAgree,
    StronglyAgree,
}

impl Likert {
    pub const ALL: [Likert; 5] = [
        Likert::StronglyDisagree,
        Likert::SomewhatDisagree,
        Likert::Neutral,
        Likert::SomewhatAgree,
        Likert::StronglyAgree,
    ];

    /// Lowest score of the label's band.
    pub fn score_floor(self) -> f64 {
        match self {
            Likert::StronglyDisagree => 0.0,
            Likert::SomewhatDisagree => 1.1,
            Likert::Neutral => 2.1,
            Likert::SomewhatAgree => 3.1,
            Likert::StronglyAgree => 4.1,
        }
    }

    /// Upper interpolation anchor: the next label's floor, 5.0 at the top.
    pub fn upper_anchor(self) -> f64 {
        match self.next() {
            Some(n) => n.score_floor(),
            None => 5.0,
        }
    }

    pub fn next(self) -> Option<Likert> {
        Self::ALL.get(self as usize + 1).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Likert::StronglyDisagree => "Strongly Disagree",
            Likert::SomewhatDisagree => "Somewhat Disagree",
            Likert::Neutral => "Neutral",
            Likert::SomewhatAgree => "Somewhat Agree",
            Likert::StronglyAgree => "Strongly Agree",
        }
    }
}

impl fmt::Display for Likert {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Likert {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        Likert::ALL
            .into_iter()
            .find(|l| {
                l.as_str()
                    .chars()
                    .filter(|c| c.is_ascii_alphanumeric())
                    .map(|c| c.to_ascii_lowercase())
                    .eq(key.chars())
            })
            .ok_or_else(|| Error::arg(format!("unknown Likert label `{s}`")))
    }
}

impl Serialize for Likert {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Likert {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Likert band of a 0–5 score; each band includes its lower edge.
pub fn likert_of_score(score: f64) -> Result<Likert> {
    if !(0.0..=5.0).contains(&score) {
        return Err(Error::arg(format!("score {score} outside [0, 5]")));
    }
    Ok(Likert::ALL
        .into_iter()
        .rev()
        .find(|l| score >= l.score_floor())
        .unwrap_or(Likert::StronglyDisagree))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "higher")]
    HigherIsBetter,
    #[serde(rename = "lower")]
    LowerIsBetter,
}

/// One labelled raw-value range. Open sides are infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IbsBin {
    pub label: Likert,
    pub raw_lo: f64,
    pub raw_hi: f64,
}

impl IbsBin {
    pub fn score_lo(&self) -> f64 {
        self.label.score_floor()
    }

    fn contains(&self, raw: f64) -> bool {
        raw >= self.raw_lo && raw <= self.raw_hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IbsTable {
    metric: String,
    direction: Direction,
    bins: Vec<IbsBin>,
    saturation: f64,
    floor: Option<f64>,
    /// (raw, score) knots of the piecewise-linear map, raw ascending.
    knots: Vec<(f64, f64)>,
}

impl IbsTable {
    pub fn new(
        metric: impl Into<String>,
        direction: Direction,
        mut bins: Vec<IbsBin>,
        saturation: f64,
        floor: Option<f64>,
    ) -> Result<Self> {
        let metric = metric.into();
        let err = |msg: String| Error::Config(format!("IBS table `{metric}`: {msg}"));

        if bins.len() != 5 {
            return Err(err(format!("expected 5 bins, found {}", bins.len())));
        }
        let counts = Likert::ALL.map(|label| (label, bins.iter().filter(|b| b.label == label).count()));
        if let Some((label, n)) = counts.iter().find(|(_, n)| *n > 1) {
            return Err(err(format!("{n} bins labelled `{label}`, expected exactly one")));
        }
        if let Some((label, _)) = counts.iter().find(|(_, n)| *n == 0) {
            return Err(err(format!("missing bin for `{label}`")));
        }
        for b in &bins {
            if b.raw_lo.is_nan() || b.raw_hi.is_nan() || !(b.raw_lo < b.raw_hi) {
                return Err(err(format!(
                    "bin `{}` has invalid range [{}, {}]",
                    b.label, b.raw_lo, b.raw_hi
                )));
            }
        }
        bins.sort_by(|a, b| a.raw_lo.total_cmp(&b.raw_lo));
        for pair in bins.windows(2) {
            if pair[0].raw_hi > pair[1].raw_lo {
                return Err(err(format!(
                    "bins `{}` and `{}` overlap",
                    pair[0].label, pair[1].label
                )));
            }
        }
        let ascending = bins.windows(2).all(|p| p[0].label < p[1].label);
        let descending = bins.windows(2).all(|p| p[0].label > p[1].label);
        match direction {
            Direction::HigherIsBetter if !ascending => {
                return Err(err("higher-is-better bins must rise from Strongly Disagree to Strongly Agree".into()))
            }
            Direction::LowerIsBetter if !descending => {
                return Err(err("lower-is-better bins must fall from Strongly Agree to Strongly Disagree".into()))
            }
            _ => {}
        }
        if bins[1..].iter().any(|b| b.raw_lo.is_infinite()) || bins[..4].iter().any(|b| b.raw_hi.is_infinite()) {
            return Err(err("only the outermost bin edges may be open".into()));
        }

        // Far edges of the best and worst bins, in raw-ascending order.
        let (worst_idx, best_idx) = match direction {
            Direction::HigherIsBetter => (0, 4),
            Direction::LowerIsBetter => (4, 0),
        };
        let far = |idx: usize| if idx == 0 { bins[0].raw_lo } else { bins[4].raw_hi };
        let near = |idx: usize| if idx == 0 { bins[0].raw_hi } else { bins[4].raw_lo };

        if !saturation.is_finite() {
            return Err(err("saturation anchor must be finite".into()));
        }
        let best_far = far(best_idx);
        let beyond = |anchor: f64, idx: usize| {
            if idx == 0 {
                anchor < near(idx)
            } else {
                anchor > near(idx)
            }
        };
        if best_far.is_finite() {
            if saturation != best_far {
                return Err(err(format!(
                    "saturation {saturation} must equal the closed best-bin edge {best_far}"
                )));
            }
        } else if !beyond(saturation, best_idx) {
            return Err(err(format!(
                "saturation {saturation} must lie beyond the open best bin's edge {}",
                near(best_idx)
            )));
        }
        let worst_far = far(worst_idx);
        let floor_anchor = if worst_far.is_finite() {
            worst_far
        } else {
            match floor {
                Some(f) if f.is_finite() && beyond(f, worst_idx) => f,
                Some(f) => {
                    return Err(err(format!(
                        "floor {f} must lie beyond the open worst bin's edge {}",
                        near(worst_idx)
                    )))
                }
                None => return Err(err("open Strongly Disagree bin needs a `floor` anchor".into())),
            }
        };

        let mut knots = Vec::with_capacity(10);
        for (i, b) in bins.iter().enumerate() {
            let lo = if b.raw_lo.is_finite() {
                b.raw_lo
            } else if i == best_idx {
                saturation
            } else {
                floor_anchor
            };
            let hi = if b.raw_hi.is_finite() {
                b.raw_hi
            } else if i == best_idx {
                saturation
            } else {
                floor_anchor
            };
            let (s_lo, s_hi) = match direction {
                Direction::HigherIsBetter => (b.label.score_floor(), b.label.upper_anchor()),
                Direction::LowerIsBetter => (b.label.upper_anchor(), b.label.score_floor()),
            };
            knots.push((lo, s_lo));
            knots.push((hi, s_hi));
        }

        Ok(Self {
            metric,
            direction,
            bins,
            saturation,
            floor,
            knots,
        })
    }

    pub fn metric(&self) -> &str {
        &self.metric
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Bins in ascending raw order.
    pub fn bins(&self) -> &[IbsBin] {
        &self.bins
    }

    pub fn saturation(&self) -> f64 {
        self.saturation
    }

    pub fn floor(&self) -> Option<f64> {
        self.floor
    }

    /// Copy with a different saturation anchor (e.g. a class-count cap for IS).
    pub fn with_saturation(&self, saturation: f64) -> Result<Self> {
        Self::new(
            self.metric.clone(),
            self.direction,
            self.bins.clone(),
            saturation,
            self.floor,
        )
    }

    /// Label of the bin whose raw range contains `raw`, if any.
    pub fn classify(&self, raw: f64) -> Option<Likert> {
        let mut hit = None;
        for b in &self.bins {
            if b.contains(raw) {
                hit = Some(b.label);
                // a shared edge belongs to the bin that starts there
                if raw < b.raw_hi {
                    break;
                }
            }
        }
        hit
    }
}

/// Scale a raw metric value onto `[0, 5]` with `table`.
pub fn ibs_scale(table: &IbsTable, raw: f64) -> Result<f64> {
    if !raw.is_finite() {
        return Err(Error::arg(format!(
            "cannot scale non-finite {} value {raw}",
            table.metric
        )));
    }
    let knots = &table.knots;
    let (first, last) = (knots[0], knots[knots.len() - 1]);
    let score = if raw <= first.0 {
        first.1
    } else if raw >= last.0 {
        last.1
    } else {
        let i = knots
            .windows(2)
            .position(|w| raw >= w[0].0 && raw <= w[1].0)
            .expect("raw lies between the outer knots");
        let ((b_lo, s_lo), (b_hi, s_hi)) = (knots[i], knots[i + 1]);
        if i % 2 == 0 {
            s_lo + ((s_hi - s_lo) / (b_hi - b_lo)) * (raw - b_lo)
        } else {
            // gap between two bins: both knots carry the same score
            s_lo
        }
    };
    Ok(score.clamp(0.0, 5.0))
}

/// Tables keyed by normalized metric name (lowercase, `-` → `_`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IbsTables(BTreeMap<String, IbsTable>);

pub fn metric_key(name: &str) -> String {
    name.trim().to_ascii_lowercase().replace('-', "_")
}

impl IbsTables {
    pub fn get(&self, metric: &str) -> Option<&IbsTable> {
        self.0.get(&metric_key(metric))
    }

    pub fn insert(&mut self, table: IbsTable) {
        self.0.insert(metric_key(table.metric()), table);
    }

    /// Tables from `other` replace same-named ones here.
    pub fn merge(&mut self, other: IbsTables) {
        self.0.extend(other.0);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &IbsTable> {
        self.0.values()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    #[serde(default)]
    table: Vec<TableSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableSpec {
    metric: String,
    direction: Direction,
    saturation: f64,
    floor: Option<f64>,
    bins: Vec<BinSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BinSpec {
    label: Likert,
    lo: Option<f64>,
    hi: Option<f64>,
}

/// Parse the TOML table schema documented in `data/ibs_tables.toml`.
pub fn parse_ibs_tables(text: &str) -> Result<IbsTables> {
    let file: TableFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = IbsTables::default();
    for spec in file.table {
        if out.get(&spec.metric).is_some() {
            return Err(Error::Config(format!("IBS table `{}` defined twice", spec.metric)));
        }
        let bins = spec
            .bins
            .iter()
            .map(|b| IbsBin {
                label: b.label,
                raw_lo: b.lo.unwrap_or(f64::NEG_INFINITY),
                raw_hi: b.hi.unwrap_or(f64::INFINITY),
            })
            .collect();
        out.insert(IbsTable::new(
            spec.metric,
            spec.direction,
            bins,
            spec.saturation,
            spec.floor,
        )?);
    }
    Ok(out)
}

pub fn load_ibs_tables(path: impl AsRef<Path>) -> Result<IbsTables> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_ibs_tables(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub const DEFAULT_TABLES_TOML: &str = include_str!("../data/ibs_tables.toml");

/// Built-in tables for SSIM, PSNR, FID, NFSS, LPIPS and IS.
pub fn default_tables() -> IbsTables {
    parse_ibs_tables(DEFAULT_TABLES_TOML).expect("bundled IBS tables are valid")
}

/// Built-in tables with the IS saturation anchor set to `class_cap`.
pub fn default_tables_with_is_cap(class_cap: f64) -> Result<IbsTables> {
    let mut tables = default_tables();
    let is = tables.get("is").expect("bundled IS table").with_saturation(class_cap)?;
    tables.insert(is);
    Ok(tables)
}

//! Pearson correlation between metric scores and human scores.
//!
//! `r = Sdxdy / sqrt(Sdx2 * Sdy2)` with the corrected sums
//!
//! ```text
//! Sdx2  = Σx² − (Σx)²/n
//! Sdy2  = Σy² − (Σy)²/n
//! Sdxdy = Σxy − ΣxΣy/n
//! ```
//!
//! The sums are taken over values shifted by their means; the shift leaves
//! every corrected sum unchanged and avoids cancellation when the values
//! sit far from zero.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::human::JudgmentStore;
use crate::metrics::Metric;
use crate::report::{Fixed6, MetricReport};

#[derive(Debug, Error, PartialEq)]
pub enum CorrelationError {
    #[error("need at least {needed} paired samples, found {found}{}", missing_note(.missing_ids))]
    InsufficientData {
        needed: usize,
        found: usize,
        missing_ids: Vec<u64>,
    },
    #[error("series lengths differ: {x} metric values, {y} human values, {labels} labels")]
    LengthMismatch { x: usize, y: usize, labels: usize },
    #[error("metric {0} is not in the report")]
    MetricNotInReport(Metric),
}

fn missing_note(ids: &[u64]) -> String {
    if ids.is_empty() {
        String::new()
    } else {
        let list: Vec<String> = ids.iter().map(u64::to_string).collect();
        format!("; ids without both scores: {}", list.join(","))
    }
}

/// Metric values `x` paired with human values `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSeries {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub labels: Vec<String>,
}

impl PairedSeries {
    pub fn new(x: Vec<f64>, y: Vec<f64>, labels: Vec<String>) -> Result<Self, CorrelationError> {
        if x.len() != y.len() || x.len() != labels.len() {
            return Err(CorrelationError::LengthMismatch {
                x: x.len(),
                y: y.len(),
                labels: labels.len(),
            });
        }
        Ok(Self { x, y, labels })
    }

    pub fn unlabeled(x: Vec<f64>, y: Vec<f64>) -> Result<Self, CorrelationError> {
        let labels = (1..=x.len()).map(|i| i.to_string()).collect();
        Self::new(x, y, labels)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// `Ok(None)` when either series is constant.
    pub fn pearson(&self) -> Result<Option<f64>, CorrelationError> {
        pearson(&self.x, &self.y)
    }
}

/// Pearson r of two equally long series. `Ok(None)` marks an undefined
/// correlation (a constant series).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>, CorrelationError> {
    if x.len() != y.len() {
        return Err(CorrelationError::LengthMismatch {
            x: x.len(),
            y: y.len(),
            labels: x.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(CorrelationError::InsufficientData {
            needed: 2,
            found: n,
            missing_ids: Vec::new(),
        });
    }
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if constant(x) || constant(y) {
        return Ok(None);
    }
    let nf = n as f64;
    let shift_x = x.iter().sum::<f64>() / nf;
    let shift_y = y.iter().sum::<f64>() / nf;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (a, b) = (a - shift_x, b - shift_y);
        sx += a;
        sy += b;
        sxx += a * a;
        syy += b * b;
        sxy += a * b;
    }
    let dx2 = sxx - sx * sx / nf;
    let dy2 = syy - sy * sy / nf;
    let dxdy = sxy - sx * sy / nf;
    if dx2 <= 0.0 || dy2 <= 0.0 {
        return Ok(None);
    }
    Ok(Some((dxdy / (dx2 * dy2).sqrt()).clamp(-1.0, 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Sentence,
    Corpus,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Sentence => "sentence",
            Level::Corpus => "corpus",
        })
    }
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sentence" => Ok(Level::Sentence),
            "corpus" => Ok(Level::Corpus),
            other => Err(format!("level must be sentence or corpus, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub system: String,
    pub metric: Metric,
    pub level: Level,
    /// `None` when the correlation is undefined.
    pub r: Option<Fixed6>,
    pub n: usize,
}

/// (segment id, metric value, human value)
type Pair = (u64, f64, f64);

/// Per-segment pairs for one system, in segment order, plus the ids that had
/// only one of the two scores.
fn segment_pairs(
    report: &MetricReport,
    store: &JudgmentStore,
    system: &str,
    metric: Metric,
) -> Result<(Vec<Pair>, Vec<u64>), CorrelationError> {
    if !report.config.metrics.contains(&metric) {
        return Err(CorrelationError::MetricNotInReport(metric));
    }
    let human = store.human_scores(system);
    let mut pairs = Vec::new();
    let mut missing = Vec::new();
    let mut in_report = std::collections::BTreeSet::new();
    for seg in &report.segments {
        let id = seg.id as u64;
        in_report.insert(id);
        match (seg.value(metric), human.get(&id)) {
            (Some(m), Some(&h)) => pairs.push((id, m, h)),
            _ => missing.push(id),
        }
    }
    missing.extend(human.keys().filter(|id| !in_report.contains(id)));
    missing.sort_unstable();
    Ok((pairs, missing))
}

/// Correlation over individual segments.
pub fn sentence_level(
    report: &MetricReport,
    store: &JudgmentStore,
    system: &str,
    metric: Metric,
) -> Result<CorrelationResult, CorrelationError> {
    let (pairs, missing) = segment_pairs(report, store, system, metric)?;
    if pairs.len() < 2 {
        return Err(CorrelationError::InsufficientData {
            needed: 2,
            found: pairs.len(),
            missing_ids: missing,
        });
    }
    let x: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.2).collect();
    Ok(CorrelationResult {
        system: system.to_string(),
        metric,
        level: Level::Sentence,
        r: pearson(&x, &y)?.map(Fixed6),
        n: pairs.len(),
    })
}

/// Correlation over documents, each represented by the mean metric score and
/// mean human score of its segments that carry both.
pub fn corpus_level(
    report: &MetricReport,
    store: &JudgmentStore,
    system: &str,
    metric: Metric,
) -> Result<CorrelationResult, CorrelationError> {
    let (pairs, missing) = segment_pairs(report, store, system, metric)?;
    let doc_of: BTreeMap<u64, &str> = report
        .segments
        .iter()
        .map(|s| (s.id as u64, s.doc.as_str()))
        .collect();
    // Document order follows the report.
    let mut sums: Vec<(&str, f64, f64, usize)> = report
        .documents
        .iter()
        .map(|d| (d.name.as_str(), 0.0, 0.0, 0))
        .collect();
    for (id, m, h) in &pairs {
        let doc = doc_of[id];
        if let Some(slot) = sums.iter_mut().find(|s| s.0 == doc) {
            slot.1 += m;
            slot.2 += h;
            slot.3 += 1;
        }
    }
    let docs: Vec<(f64, f64)> = sums
        .iter()
        .filter(|s| s.3 > 0)
        .map(|s| (s.1 / s.3 as f64, s.2 / s.3 as f64))
        .collect();
    if docs.len() < 2 {
        return Err(CorrelationError::InsufficientData {
            needed: 2,
            found: docs.len(),
            missing_ids: missing,
        });
    }
    let x: Vec<f64> = docs.iter().map(|d| d.0).collect();
    let y: Vec<f64> = docs.iter().map(|d| d.1).collect();
    Ok(CorrelationResult {
        system: system.to_string(),
        metric,
        level: Level::Corpus,
        r: pearson(&x, &y)?.map(Fixed6),
        n: docs.len(),
    })
}

pub fn correlate(
    report: &MetricReport,
    store: &JudgmentStore,
    system: &str,
    metric: Metric,
    level: Level,
) -> Result<CorrelationResult, CorrelationError> {
    match level {
        Level::Sentence => sentence_level(report, store, system, metric),
        Level::Corpus => corpus_level(report, store, system, metric),
    }
}

/// Results plus input digests, as written by the `correlate` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub inputs: BTreeMap<String, String>,
    pub results: Vec<CorrelationResult>,
    /// Metrics ordered by decreasing r; undefined correlations are left out.
    pub ranking: Vec<Metric>,
}

impl CorrelationReport {
    pub fn new(inputs: BTreeMap<String, String>, mut results: Vec<CorrelationResult>) -> Self {
        results.sort_by(|a, b| (&a.system, a.level, a.metric).cmp(&(&b.system, b.level, b.metric)));
        let mut ranked: Vec<(Metric, f64)> = results
            .iter()
            .filter_map(|r| r.r.map(|v| (r.metric, v.0)))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut ranking: Vec<Metric> = Vec::new();
        for (m, _) in ranked {
            if !ranking.contains(&m) {
                ranking.push(m);
            }
        }
        Self {
            inputs,
            results,
            ranking,
        }
    }
}

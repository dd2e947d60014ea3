//! Corpus scoring and the JSON report.
//!
//! Report layout:
//!
//! ```json
//! {
//!   "config": { ... },
//!   "segments": [ { "id": 1, "doc": "d1", "bleu": { "value": 0.5, "components": { ... } } } ],
//!   "documents": [ { "name": "d1", "first_id": 1, "last_id": 100, "segments": 100, "bleu": 0.5 } ],
//!   "corpus": { "segments": 1000, "bleu": 0.5 }
//! }
//! ```
//!
//! Every score is written with exactly six decimals. Segments are scored in
//! parallel but collected and aggregated in id order, so the output does not
//! depend on the worker count.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::alignment::AlignedPair;
use crate::metrics::{
    score_pair, MeteorPenalty, Metric, MetricConfig, MetricError, MetricScore, ScoreFlag,
};
use crate::resources::Resources;
use crate::text::{prepare, CorpusSide, TextOptions};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("hypothesis has {hyp} segments but reference has {reference}")]
    CountMismatch { hyp: usize, reference: usize },
    #[error("segment ids differ at position {index}: hypothesis {hyp}, reference {reference}")]
    IdMismatch {
        index: usize,
        hyp: usize,
        reference: usize,
    },
    #[error(transparent)]
    Config(#[from] MetricError),
    #[error("no metrics selected")]
    NoMetrics,
    #[error("cannot start worker pool: {0}")]
    Workers(String),
}

/// A float written with six decimals.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Fixed6(pub f64);

impl Serialize for Fixed6 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(serde::ser::Error::custom(format!(
                "non-finite number {}",
                self.0
            )));
        }
        // -0.000000 is not valid as a fixed-width rendering of zero
        let value = if self.0 == 0.0 { 0.0 } else { self.0 };
        let text = format!("{value:.6}");
        let text = if text == "-0.000000" {
            "0.000000".to_string()
        } else {
            text
        };
        serde_json::value::RawValue::from_string(text)
            .map_err(serde::ser::Error::custom)?
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Fixed6 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        f64::deserialize(deserializer).map(Fixed6)
    }
}

impl From<f64> for Fixed6 {
    fn from(v: f64) -> Self {
        Fixed6(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    pub metrics: Vec<Metric>,
    pub max_n: usize,
    pub meteor_penalty: MeteorPenalty,
    pub atec_coefficient: Fixed6,
    pub strip_punctuation: bool,
    pub strip_diacritics: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<f64>,
    /// Input file name to content digest, filled in by callers that read
    /// files.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub inputs: BTreeMap<String, String>,
}

impl ReportConfig {
    pub fn metric_config(&self) -> MetricConfig {
        MetricConfig {
            max_n: self.max_n,
            meteor_penalty: self.meteor_penalty,
            atec_coefficient: self.atec_coefficient.0,
            strip_punctuation: self.strip_punctuation,
            smoothing: self.smoothing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub value: Fixed6,
    pub components: BTreeMap<String, Fixed6>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<ScoreFlag>,
}

impl From<&MetricScore> for ScoreEntry {
    fn from(s: &MetricScore) -> Self {
        Self {
            value: Fixed6(s.value),
            components: s
                .components
                .iter()
                .map(|(k, v)| (k.to_string(), Fixed6(*v)))
                .collect(),
            flags: s.flags.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub id: usize,
    pub doc: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment: Option<Vec<AlignedPair>>,
    #[serde(flatten)]
    pub scores: BTreeMap<Metric, ScoreEntry>,
}

impl SegmentReport {
    pub fn value(&self, metric: Metric) -> Option<f64> {
        self.scores.get(&metric).map(|e| e.value.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentReport {
    pub name: String,
    pub first_id: usize,
    pub last_id: usize,
    pub segments: usize,
    #[serde(flatten)]
    pub means: BTreeMap<Metric, Fixed6>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub segments: usize,
    #[serde(flatten)]
    pub means: BTreeMap<Metric, Fixed6>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub config: ReportConfig,
    pub segments: Vec<SegmentReport>,
    pub documents: Vec<DocumentReport>,
    pub corpus: CorpusReport,
}

/// Everything that controls a scoring run apart from the texts.
#[derive(Debug, Clone)]
pub struct ScoringOptions {
    pub metrics: Vec<Metric>,
    pub metric: MetricConfig,
    pub text: TextOptions,
    /// Include the three-stage alignment of every segment.
    pub verbose: bool,
    /// Worker threads; 0 lets the pool decide.
    pub workers: usize,
    pub system: Option<String>,
}

impl Default for ScoringOptions {
    fn default() -> Self {
        Self {
            metrics: Metric::ALL.to_vec(),
            metric: MetricConfig::default(),
            text: TextOptions::default(),
            verbose: false,
            workers: 0,
            system: None,
        }
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Scores every hypothesis segment against the reference with the same id.
/// Document layout is taken from the reference side.
pub fn score_corpus(
    hyps: &CorpusSide,
    refs: &CorpusSide,
    resources: &Resources,
    opts: &ScoringOptions,
) -> Result<MetricReport, ReportError> {
    opts.metric.validate()?;
    if opts.metrics.is_empty() {
        return Err(ReportError::NoMetrics);
    }
    if hyps.len() != refs.len() {
        return Err(ReportError::CountMismatch {
            hyp: hyps.len(),
            reference: refs.len(),
        });
    }
    for (index, (h, r)) in hyps.segments.iter().zip(&refs.segments).enumerate() {
        if h.id != r.id {
            return Err(ReportError::IdMismatch {
                index,
                hyp: h.id,
                reference: r.id,
            });
        }
    }
    let mut metrics = opts.metrics.clone();
    metrics.sort();
    metrics.dedup();

    let mut doc_of = vec![String::new(); refs.len()];
    for doc in &refs.documents {
        for slot in &mut doc_of[doc.range.clone()] {
            *slot = doc.name.clone();
        }
    }

    let score_one = |index: usize| -> SegmentReport {
        let hyp = prepare(&hyps.segments[index].text, opts.text);
        let reference = prepare(&refs.segments[index].text, opts.text);
        let (scores, alignment) = score_pair(&hyp, &reference, &metrics, resources, &opts.metric);
        SegmentReport {
            id: refs.segments[index].id,
            doc: doc_of[index].clone(),
            alignment: if opts.verbose {
                Some(alignment.map(|a| a.pairs().to_vec()).unwrap_or_default())
            } else {
                None
            },
            scores: scores
                .iter()
                .map(|s| (s.metric, ScoreEntry::from(s)))
                .collect(),
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| ReportError::Workers(e.to_string()))?;
    let segments: Vec<SegmentReport> =
        pool.install(|| (0..refs.len()).into_par_iter().map(score_one).collect());

    let means_over = |range: std::ops::Range<usize>| -> BTreeMap<Metric, Fixed6> {
        metrics
            .iter()
            .map(|&m| {
                let values = segments[range.clone()].iter().filter_map(|s| s.value(m));
                (m, Fixed6(mean(values)))
            })
            .collect()
    };
    let documents = refs
        .documents
        .iter()
        .filter(|d| !d.range.is_empty())
        .map(|d| DocumentReport {
            name: d.name.clone(),
            first_id: refs.segments[d.range.start].id,
            last_id: refs.segments[d.range.end - 1].id,
            segments: d.range.len(),
            means: means_over(d.range.clone()),
        })
        .collect();
    let corpus = CorpusReport {
        segments: segments.len(),
        means: means_over(0..segments.len()),
    };
    let config = ReportConfig {
        system: opts.system.clone(),
        metrics,
        max_n: opts.metric.max_n,
        meteor_penalty: opts.metric.meteor_penalty,
        atec_coefficient: Fixed6(opts.metric.atec_coefficient),
        strip_punctuation: opts.metric.strip_punctuation,
        strip_diacritics: opts.text.strip_diacritics,
        smoothing: opts.metric.smoothing,
        inputs: BTreeMap::new(),
    };
    Ok(MetricReport {
        config,
        segments,
        documents,
        corpus,
    })
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Plain-text table of document and corpus means.
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        let metrics = &self.config.metrics;
        let _ = write!(out, "{:<20} {:>8}", "document", "segments");
        for m in metrics {
            let _ = write!(out, " {:>8}", m.name());
        }
        out.push('\n');
        let mut row = |name: &str, count: usize, means: &BTreeMap<Metric, Fixed6>| {
            let _ = write!(out, "{name:<20} {count:>8}");
            for m in metrics {
                let v = means.get(m).map_or(f64::NAN, |f| f.0);
                let _ = write!(out, " {v:>8.4}");
            }
            out.push('\n');
        };
        if self.documents.len() > 1 {
            for d in &self.documents {
                row(&d.name, d.segments, &d.means);
            }
        }
        row("corpus", self.corpus.segments, &self.corpus.means);
        out
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.summary_table())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::Document;

    fn side(lines: &[&str]) -> CorpusSide {
        CorpusSide::from_lines(lines.iter().copied())
    }

    #[test]
    fn fixed6_formatting() {
        let json = serde_json::to_string(&vec![
            Fixed6(1.0),
            Fixed6(0.8181818),
            Fixed6(-0.0),
            Fixed6(-1e-9),
        ])
        .unwrap();
        assert_eq!(json, "[1.000000,0.818182,0.000000,0.000000]");
        assert!(serde_json::to_string(&Fixed6(f64::NAN)).is_err());
        let back: Vec<Fixed6> = serde_json::from_str("[0.5,1]").unwrap();
        assert_eq!(back, [Fixed6(0.5), Fixed6(1.0)]);
    }

    #[test]
    fn single_segment_aggregate_equals_segment() {
        let h = side(&["Bhopal is the capital of Madhya Pradesh and also called Lake City."]);
        let r = side(&["Bhopal is a Lake City and capital of Madhya Pradesh."]);
        let report =
            score_corpus(&h, &r, &Resources::default(), &ScoringOptions::default()).unwrap();
        for m in Metric::ALL {
            assert_eq!(
                report.corpus.means[&m].0,
                report.segments[0].value(m).unwrap()
            );
        }
        assert_eq!(
            report.segments[0]
                .value(Metric::Gtm)
                .map(|v| format!("{v:.6}")),
            Some("0.818182".into())
        );
    }

    #[test]
    fn corpus_mean_is_arithmetic() {
        // GTM 0.2 and 0.4: m=1 of 5 and m=2 of 5 on both sides
        let h = side(&["a x x x x", "a b y y y"]);
        let r = side(&["a q q q q", "a b q q q"]);
        let opts = ScoringOptions {
            metrics: vec![Metric::Gtm],
            ..Default::default()
        };
        let report = score_corpus(&h, &r, &Resources::default(), &opts).unwrap();
        assert!((report.segments[0].value(Metric::Gtm).unwrap() - 0.2).abs() < 1e-15);
        assert!((report.segments[1].value(Metric::Gtm).unwrap() - 0.4).abs() < 1e-15);
        assert!((report.corpus.means[&Metric::Gtm].0 - 0.3).abs() < 1e-15);
    }

    #[test]
    fn identical_corpus_aggregates() {
        let lines = [
            "a b c d e",
            "taj mahal is in india",
            "one two three four five six seven eight nine ten",
        ];
        let mut r = side(&lines);
        r.set_documents(vec![
            Document {
                name: "d1".into(),
                range: 0..2,
            },
            Document {
                name: "d2".into(),
                range: 2..3,
            },
        ])
        .unwrap();
        let report = score_corpus(
            &side(&lines),
            &r,
            &Resources::default(),
            &ScoringOptions::default(),
        )
        .unwrap();
        for m in [Metric::Bleu, Metric::Gtm, Metric::Atec] {
            assert_eq!(report.corpus.means[&m].0, 1.0);
            for d in &report.documents {
                assert_eq!(d.means[&m].0, 1.0);
            }
        }
        // paper-mode METEOR: mean of 1 - 1/len
        let expected = (0.8 + 0.8 + 0.9) / 3.0;
        assert!((report.corpus.means[&Metric::Meteor].0 - expected).abs() < 1e-15);
        assert_eq!(report.documents[1].first_id, 3);
        assert_eq!(report.segments[2].doc, "d2");
    }

    #[test]
    fn count_mismatch_is_reported() {
        let err = score_corpus(
            &side(&["a"]),
            &side(&["a", "b"]),
            &Resources::default(),
            &ScoringOptions::default(),
        )
        .unwrap_err();
        assert_eq!(
            err.to_string(),
            "hypothesis has 1 segments but reference has 2"
        );
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let h: Vec<String> = (0..50)
            .map(|i| format!("w{} w{} x w{}", i % 7, i % 3, i % 5))
            .collect();
        let r: Vec<String> = (0..50)
            .map(|i| format!("w{} x w{} w{}", i % 3, i % 7, i % 2))
            .collect();
        let (h, r) = (CorpusSide::from_lines(h), CorpusSide::from_lines(r));
        let run = |workers| {
            let opts = ScoringOptions {
                workers,
                verbose: true,
                ..Default::default()
            };
            score_corpus(&h, &r, &Resources::default(), &opts)
                .unwrap()
                .to_json()
        };
        let one = run(1);
        assert_eq!(one, run(4));
        assert_eq!(one, run(8));
    }

    #[test]
    fn json_round_trip_and_layout() {
        let h = side(&["a b c", ""]);
        let r = side(&["a b d", ""]);
        let opts = ScoringOptions {
            verbose: true,
            system: Some("google".into()),
            ..Default::default()
        };
        let report = score_corpus(&h, &r, &Resources::default(), &opts).unwrap();
        let json = report.to_json();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["segments"][0]["id"], 1);
        assert!(value["segments"][0]["gtm"]["components"]["precision"].is_number());
        assert_eq!(value["segments"][1]["gtm"]["flags"][0], "degenerate");
        assert_eq!(value["segments"][0]["alignment"][0]["stage"], "exact");
        assert_eq!(value["config"]["system"], "google");
        assert!(json.contains("\"value\": 0.666667"));
        let back = MetricReport::from_json(&json).unwrap();
        assert_eq!(back.segments.len(), 2);
        assert_eq!(back.to_json(), json);
    }

    #[test]
    fn summary_lists_metrics() {
        let report = score_corpus(
            &side(&["a b"]),
            &side(&["a b"]),
            &Resources::default(),
            &ScoringOptions::default(),
        )
        .unwrap();
        let table = report.summary_table();
        assert!(table.lines().next().unwrap().contains("meteor"));
        assert!(table.contains("corpus"));
    }
}

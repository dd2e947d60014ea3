//! Segment-level BLEU, GTM, METEOR and ATEC.
//!
//! Definitions used here, with `m` matched unigrams, hypothesis length `|h|`
//! and reference length `|r|`:
//!
//! * BLEU: `BP * (p_1 * ... * p_N)^(1/N)` with the linear brevity penalty
//!   `BP = min(1, |h| / |r|)` and `N = min(max_n, |h|)`.
//! * GTM: unigram F-measure `2PR / (P + R)` over exact matches only.
//! * METEOR: `(1 - penalty) * F` where the penalty is `ch / m` (`paper` mode)
//!   or `0.5 * (ch / m)^3` (`classic` mode), over exact, stem and synonym
//!   matches.
//! * ATEC: `F * max(0, 1 - coefficient * posdiff)`.
//!
//! Note that BLEU's brevity penalty is linear, not the exponential
//! `exp(1 - r/c)` of the usual BLEU definition, so scores are not comparable
//! with other BLEU implementations.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{align_exact, align_unigrams, position_difference, Alignment};
use crate::resources::Resources;
use crate::text::TokenizedSegment;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("reference has length 0")]
    InvalidReference,
    #[error("invalid metric configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown metric {0:?} (expected bleu, gtm, meteor or atec)")]
    UnknownMetric(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Bleu,
    Gtm,
    Meteor,
    Atec,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Bleu, Metric::Gtm, Metric::Meteor, Metric::Atec];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Bleu => "bleu",
            Metric::Gtm => "gtm",
            Metric::Meteor => "meteor",
            Metric::Atec => "atec",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| MetricError::UnknownMetric(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeteorPenalty {
    /// `ch / m`
    #[default]
    Paper,
    /// `0.5 * (ch / m)^3`
    Classic,
}

impl FromStr for MeteorPenalty {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(Self::Paper),
            "classic" => Ok(Self::Classic),
            other => Err(MetricError::InvalidConfig(format!(
                "meteor penalty must be paper or classic, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub max_n: usize,
    pub meteor_penalty: MeteorPenalty,
    pub atec_coefficient: f64,
    pub strip_punctuation: bool,
    /// Replacement for zero n-gram precisions in BLEU; `None` disables
    /// smoothing.
    pub smoothing: Option<f64>,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            max_n: 4,
            meteor_penalty: MeteorPenalty::Paper,
            atec_coefficient: 4.0,
            strip_punctuation: true,
            smoothing: None,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<(), MetricError> {
        if self.max_n < 1 {
            return Err(MetricError::InvalidConfig(
                "max_n must be at least 1".into(),
            ));
        }
        if !(self.atec_coefficient > 0.0 && self.atec_coefficient.is_finite()) {
            return Err(MetricError::InvalidConfig(
                "atec coefficient must be a positive number".into(),
            ));
        }
        if let Some(eps) = self.smoothing {
            if !(eps > 0.0 && eps <= 1.0) {
                return Err(MetricError::InvalidConfig(
                    "smoothing epsilon must be in (0, 1]".into(),
                ));
            }
        }
        Ok(())
    }

    /// Applies punctuation stripping to a segment when enabled.
    pub fn view<'a>(&self, seg: &'a TokenizedSegment) -> Cow<'a, TokenizedSegment> {
        if self.strip_punctuation {
            Cow::Owned(seg.without_punctuation())
        } else {
            Cow::Borrowed(seg)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreFlag {
    /// Hypothesis has no tokens.
    ZeroLength,
    /// Reference has no tokens.
    EmptyReference,
    /// Both sides empty.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricScore {
    pub metric: Metric,
    pub value: f64,
    pub components: BTreeMap<Cow<'static, str>, f64>,
    pub flags: Vec<ScoreFlag>,
}

impl MetricScore {
    fn new(metric: Metric, value: f64) -> Self {
        Self {
            metric,
            value,
            components: BTreeMap::new(),
            flags: Vec::new(),
        }
    }

    fn with(mut self, name: impl Into<Cow<'static, str>>, value: f64) -> Self {
        self.components.insert(name.into(), value);
        self
    }

    fn flagged(mut self, flag: ScoreFlag) -> Self {
        self.flags.push(flag);
        self
    }

    pub fn component(&self, name: &str) -> Option<f64> {
        self.components.get(name).copied()
    }
}

/// Clipped n-gram match counts for one order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NgramPrecision {
    pub matched: usize,
    pub total: usize,
}

impl NgramPrecision {
    /// `None` when the hypothesis has no n-grams of this order.
    pub fn value(&self) -> Option<f64> {
        (self.total > 0).then(|| self.matched as f64 / self.total as f64)
    }
}

/// Hypothesis n-grams found in the reference, each reference n-gram
/// usable at most as often as it occurs there.
pub fn ngram_precision(
    hyp: &TokenizedSegment,
    reference: &TokenizedSegment,
    n: usize,
) -> NgramPrecision {
    assert!(n >= 1, "n-gram order must be at least 1");
    let hyp = hyp.tokens();
    let reference = reference.tokens();
    if hyp.len() < n {
        return NgramPrecision {
            matched: 0,
            total: 0,
        };
    }
    let total = hyp.len() - n + 1;
    if reference.len() < n {
        return NgramPrecision { matched: 0, total };
    }
    let ref_grams = reference.len() - n + 1;
    if ref_grams <= 64 {
        // Short references: claim an unused equal reference n-gram per
        // hypothesis n-gram, tracking claims in a bit mask.
        let mut claimed = 0u64;
        let mut matched = 0;
        for gram in hyp.windows(n) {
            let free =
                (0..ref_grams).find(|&k| claimed & (1 << k) == 0 && reference[k..k + n] == *gram);
            if let Some(k) = free {
                claimed |= 1 << k;
                matched += 1;
            }
        }
        return NgramPrecision { matched, total };
    }
    // Sorted reference n-grams; `left[k]` counts unused copies of the
    // distinct gram starting at `distinct[k]`.
    let mut grams: Vec<&[String]> = reference.windows(n).collect();
    grams.sort_unstable();
    let mut distinct: Vec<&[String]> = Vec::with_capacity(grams.len());
    let mut left: Vec<usize> = Vec::with_capacity(grams.len());
    for gram in grams {
        if distinct.last() == Some(&gram) {
            *left.last_mut().expect("non-empty") += 1;
        } else {
            distinct.push(gram);
            left.push(1);
        }
    }
    let mut matched = 0;
    for gram in hyp.windows(n) {
        if let Ok(k) = distinct.binary_search(&gram) {
            if left[k] > 0 {
                left[k] -= 1;
                matched += 1;
            }
        }
    }
    NgramPrecision { matched, total }
}

/// `min(1, hyp_len / ref_len)`.
pub fn brevity_penalty(hyp_len: usize, ref_len: usize) -> Result<f64, MetricError> {
    if ref_len == 0 {
        return Err(MetricError::InvalidReference);
    }
    Ok((hyp_len as f64 / ref_len as f64).min(1.0))
}

fn precision_name(n: usize) -> Cow<'static, str> {
    const NAMES: [&str; 4] = ["p1", "p2", "p3", "p4"];
    match NAMES.get(n - 1) {
        Some(name) => Cow::Borrowed(name),
        None => Cow::Owned(format!("p{n}")),
    }
}

pub fn bleu_score(
    hyp: &TokenizedSegment,
    reference: &TokenizedSegment,
    cfg: &MetricConfig,
) -> MetricScore {
    let hyp = cfg.view(hyp);
    let reference = cfg.view(reference);
    let (hyp_len, ref_len) = (hyp.len(), reference.len());
    let base = MetricScore::new(Metric::Bleu, 0.0)
        .with("hyp_len", hyp_len as f64)
        .with("ref_len", ref_len as f64);
    if hyp_len == 0 {
        return base.flagged(ScoreFlag::ZeroLength);
    }
    let bp = match brevity_penalty(hyp_len, ref_len) {
        Ok(bp) => bp,
        Err(_) => return base.flagged(ScoreFlag::EmptyReference),
    };
    let mut score = base.with("bp", bp);
    let orders = cfg.max_n.min(hyp_len);
    let mut log_sum = 0.0;
    let mut included = 0usize;
    let mut zero = false;
    for n in 1..=orders {
        let Some(mut p) = ngram_precision(&hyp, &reference, n).value() else {
            continue;
        };
        score = score.with(precision_name(n), p);
        if p == 0.0 {
            match cfg.smoothing {
                Some(eps) => p = eps,
                None => zero = true,
            }
        }
        if p > 0.0 {
            log_sum += p.ln();
        }
        included += 1;
    }
    if zero || included == 0 {
        return score;
    }
    score.value = bp * (log_sum / included as f64).exp();
    score.value = score.value.clamp(0.0, 1.0);
    score
}

fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Degenerate-length handling shared by the alignment-based metrics.
fn degenerate(metric: Metric, hyp_len: usize, ref_len: usize) -> Option<MetricScore> {
    match (hyp_len, ref_len) {
        (0, 0) => Some(MetricScore::new(metric, 1.0).flagged(ScoreFlag::Degenerate)),
        (0, _) => Some(MetricScore::new(metric, 0.0).flagged(ScoreFlag::ZeroLength)),
        (_, 0) => Some(MetricScore::new(metric, 0.0).flagged(ScoreFlag::EmptyReference)),
        _ => None,
    }
}

struct UnigramCounts {
    precision: f64,
    recall: f64,
    f: f64,
}

fn unigram_counts(alignment: &Alignment, hyp_len: usize, ref_len: usize) -> UnigramCounts {
    let m = alignment.matches() as f64;
    let precision = m / hyp_len as f64;
    let recall = m / ref_len as f64;
    UnigramCounts {
        precision,
        recall,
        f: f_measure(precision, recall),
    }
}

pub fn gtm_score(
    hyp: &TokenizedSegment,
    reference: &TokenizedSegment,
    cfg: &MetricConfig,
) -> MetricScore {
    let hyp = cfg.view(hyp);
    let reference = cfg.view(reference);
    if let Some(s) = degenerate(Metric::Gtm, hyp.len(), reference.len()) {
        return s;
    }
    let alignment = align_exact(&hyp, &reference);
    let c = unigram_counts(&alignment, hyp.len(), reference.len());
    MetricScore::new(Metric::Gtm, c.f)
        .with("precision", c.precision)
        .with("recall", c.recall)
        .with("f", c.f)
        .with("m", alignment.matches() as f64)
}

pub fn meteor_score(
    hyp: &TokenizedSegment,
    reference: &TokenizedSegment,
    resources: &Resources,
    cfg: &MetricConfig,
) -> MetricScore {
    let hyp = cfg.view(hyp);
    let reference = cfg.view(reference);
    if let Some(s) = degenerate(Metric::Meteor, hyp.len(), reference.len()) {
        return s;
    }
    let alignment = align_unigrams(&hyp, &reference, resources);
    meteor_from_alignment(&alignment, hyp.len(), reference.len(), cfg)
}

fn meteor_from_alignment(
    alignment: &Alignment,
    hyp_len: usize,
    ref_len: usize,
    cfg: &MetricConfig,
) -> MetricScore {
    let c = unigram_counts(alignment, hyp_len, ref_len);
    let m = alignment.matches();
    let ch = alignment.chunks();
    let penalty = if m == 0 {
        0.0
    } else {
        let fragmentation = ch as f64 / m as f64;
        match cfg.meteor_penalty {
            MeteorPenalty::Paper => fragmentation,
            MeteorPenalty::Classic => 0.5 * fragmentation.powi(3),
        }
    };
    let value = if m == 0 { 0.0 } else { (1.0 - penalty) * c.f };
    MetricScore::new(Metric::Meteor, value.clamp(0.0, 1.0))
        .with("precision", c.precision)
        .with("recall", c.recall)
        .with("fmean", c.f)
        .with("penalty", penalty)
        .with("m", m as f64)
        .with("ch", ch as f64)
}

pub fn atec_score(
    hyp: &TokenizedSegment,
    reference: &TokenizedSegment,
    resources: &Resources,
    cfg: &MetricConfig,
) -> MetricScore {
    let hyp = cfg.view(hyp);
    let reference = cfg.view(reference);
    if let Some(s) = degenerate(Metric::Atec, hyp.len(), reference.len()) {
        return s;
    }
    let alignment = align_unigrams(&hyp, &reference, resources);
    atec_from_alignment(&alignment, &hyp, &reference, cfg)
}

fn atec_from_alignment(
    alignment: &Alignment,
    hyp: &TokenizedSegment,
    reference: &TokenizedSegment,
    cfg: &MetricConfig,
) -> MetricScore {
    let c = unigram_counts(alignment, hyp.len(), reference.len());
    let posdiff = position_difference(alignment, hyp, reference);
    let penalty = (1.0 - posdiff * cfg.atec_coefficient).max(0.0);
    MetricScore::new(Metric::Atec, (c.f * penalty).clamp(0.0, 1.0))
        .with("precision", c.precision)
        .with("recall", c.recall)
        .with("f", c.f)
        .with("posdiff", posdiff)
        .with("penalty", penalty)
        .with("m", alignment.matches() as f64)
}

/// Scores one hypothesis/reference pair with several metrics, computing the
/// three-stage alignment once.
pub fn score_pair(
    hyp: &TokenizedSegment,
    reference: &TokenizedSegment,
    metrics: &[Metric],
    resources: &Resources,
    cfg: &MetricConfig,
) -> (Vec<MetricScore>, Option<Alignment>) {
    let h = cfg.view(hyp);
    let r = cfg.view(reference);
    let needs_alignment = metrics
        .iter()
        .any(|m| matches!(m, Metric::Meteor | Metric::Atec));
    let alignment = (needs_alignment && !h.is_empty() && !r.is_empty())
        .then(|| align_unigrams(&h, &r, resources));
    let scores = metrics
        .iter()
        .map(|metric| match metric {
            Metric::Bleu => bleu_score(hyp, reference, cfg),
            Metric::Gtm => gtm_score(hyp, reference, cfg),
            Metric::Meteor => match &alignment {
                Some(a) => meteor_from_alignment(a, h.len(), r.len(), cfg),
                None => degenerate(Metric::Meteor, h.len(), r.len()).expect("empty side"),
            },
            Metric::Atec => match &alignment {
                Some(a) => atec_from_alignment(a, &h, &r, cfg),
                None => degenerate(Metric::Atec, h.len(), r.len()).expect("empty side"),
            },
        })
        .collect();
    (scores, alignment)
}

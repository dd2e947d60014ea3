use std::collections::BTreeMap;

use mteval_core::correlation::{corpus_level, sentence_level, CorrelationError};
use mteval_core::human::{HumanJudgment, JudgmentStore};
use mteval_core::metrics::Metric;
use mteval_core::report::{
    CorpusReport, DocumentReport, Fixed6, MetricReport, ReportConfig, ScoreEntry, SegmentReport,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SYSTEM: &str = "sys";

/// Report with one metric; `docs` lists (name, segment count) in order.
fn report(values: &[f64], docs: &[(&str, usize)]) -> MetricReport {
    let mut doc_names = Vec::new();
    let mut documents = Vec::new();
    let mut next = 1;
    for &(name, count) in docs {
        doc_names.extend(std::iter::repeat_n(name, count));
        documents.push(DocumentReport {
            name: name.to_string(),
            first_id: next,
            last_id: next + count - 1,
            segments: count,
            means: BTreeMap::new(),
        });
        next += count;
    }
    let segments = values
        .iter()
        .enumerate()
        .map(|(i, &v)| SegmentReport {
            id: i + 1,
            doc: doc_names[i].to_string(),
            alignment: None,
            scores: BTreeMap::from([(
                Metric::Bleu,
                ScoreEntry {
                    value: Fixed6(v),
                    components: BTreeMap::new(),
                    flags: Vec::new(),
                },
            )]),
        })
        .collect();
    MetricReport {
        config: ReportConfig {
            system: Some(SYSTEM.into()),
            metrics: vec![Metric::Bleu],
            max_n: 4,
            meteor_penalty: Default::default(),
            atec_coefficient: Fixed6(4.0),
            strip_punctuation: true,
            strip_diacritics: false,
            smoothing: None,
            inputs: BTreeMap::new(),
        },
        segments,
        documents,
        corpus: CorpusReport {
            segments: values.len(),
            means: BTreeMap::new(),
        },
    }
}

/// Ten parameter scores whose mean, divided by 4, is closest to `h`.
fn scores_for(h: f64) -> [u8; 10] {
    let total = (h.clamp(0.0, 1.0) * 40.0).round() as u8;
    let mut scores = [total / 10; 10];
    for s in scores.iter_mut().take((total % 10) as usize) {
        *s += 1;
    }
    scores
}

fn store(humans: &[f64]) -> JudgmentStore {
    let mut store = JudgmentStore::in_memory();
    for (i, &h) in humans.iter().enumerate() {
        let j = HumanJudgment::new(
            i as u64 + 1,
            SYSTEM,
            "ann",
            scores_for(h),
            "2024-01-01T00:00:00Z",
        )
        .unwrap();
        store.append(j).unwrap();
    }
    store
}

/// Human scores as the store will report them, after rounding to the scale.
fn quantized(h: f64) -> f64 {
    scores_for(h).iter().map(|&s| s as f64).sum::<f64>() / 40.0
}

#[test]
fn two_affine_segments() {
    let humans = [0.25, 0.75];
    let metric: Vec<f64> = humans.iter().map(|h| 0.5 * h + 0.1).collect();
    let res = sentence_level(
        &report(&metric, &[("all", 2)]),
        &store(&humans),
        SYSTEM,
        Metric::Bleu,
    )
    .unwrap();
    assert!((res.r.unwrap().0 - 1.0).abs() < 1e-12);
    assert_eq!(res.n, 2);
}

#[test]
fn human_scores_without_report_are_insufficient() {
    let err = sentence_level(
        &report(&[], &[]),
        &store(&[0.5, 0.25]),
        SYSTEM,
        Metric::Bleu,
    )
    .unwrap_err();
    assert_eq!(
        err,
        CorrelationError::InsufficientData {
            needed: 2,
            found: 0,
            missing_ids: vec![1, 2],
        }
    );
}

#[test]
fn noisy_sentence_level() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let humans: Vec<f64> = (0..100)
        .map(|_| quantized(rng.gen_range(0.0..1.0)))
        .collect();
    let metric: Vec<f64> = humans
        .iter()
        .map(|h| h + rng.gen_range(-0.05..=0.05))
        .collect();
    let res = sentence_level(
        &report(&metric, &[("all", 100)]),
        &store(&humans),
        SYSTEM,
        Metric::Bleu,
    )
    .unwrap();
    assert!(res.r.unwrap().0 > 0.9, "{:?}", res.r);
}

#[test]
fn noisy_corpus_level() {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let names: Vec<String> = (1..=10).map(|d| format!("doc{d}")).collect();
    let docs: Vec<(&str, usize)> = names.iter().map(|n| (n.as_str(), 100)).collect();
    let mut humans = Vec::new();
    for _ in 0..10 {
        let level = rng.gen_range(0.1..0.9);
        humans.extend((0..100).map(|_| quantized(level + rng.gen_range(-0.1..0.1))));
    }
    let metric: Vec<f64> = humans
        .iter()
        .map(|h| h + rng.gen_range(-0.05..=0.05))
        .collect();
    let res = corpus_level(
        &report(&metric, &docs),
        &store(&humans),
        SYSTEM,
        Metric::Bleu,
    )
    .unwrap();
    assert_eq!(res.n, 10);
    assert!(res.r.unwrap().0 > 0.9, "{:?}", res.r);
}

#[test]
fn affine_document_means() {
    let humans: Vec<f64> = (0..40).map(|i| quantized((i / 4) as f64 / 10.0)).collect();
    let metric: Vec<f64> = humans.iter().map(|h| 0.8 * h + 0.05).collect();
    let names: Vec<String> = (1..=10).map(|d| format!("d{d}")).collect();
    let docs: Vec<(&str, usize)> = names.iter().map(|n| (n.as_str(), 4)).collect();
    let res = corpus_level(
        &report(&metric, &docs),
        &store(&humans),
        SYSTEM,
        Metric::Bleu,
    )
    .unwrap();
    assert!((res.r.unwrap().0 - 1.0).abs() < 1e-6);
}

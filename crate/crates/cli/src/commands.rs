use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};
use std::path::Path;

use log::info;
use mteval_core::correlation::{correlate as correlate_one, CorrelationError, CorrelationReport};
use mteval_core::human::{JudgmentStore, PARAMETERS};
use mteval_core::metrics::MetricConfig;
use mteval_core::report::{score_corpus, MetricReport, ReportError, ScoringOptions};
use mteval_core::resources::Resources;
use mteval_core::text::{prepare, CorpusSide, TextOptions};
use serde::Serialize;

use crate::args::{CorrelateArgs, ExportArgs, ScoreArgs, TokenizeArgs};
use crate::{file_digest, write_atomically, CliError};

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn emit(out: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_atomically(path, contents.as_bytes()),
        None => io::stdout()
            .write_all(contents.as_bytes())
            .map_err(|e| CliError::Internal(format!("standard output: {e}"))),
    }
}

pub fn score(a: &ScoreArgs) -> Result<(), CliError> {
    let hyps = CorpusSide::load(&a.hyp).map_err(input_err)?;
    let mut refs = CorpusSide::load(&a.reference).map_err(input_err)?;
    if let Some(docs) = &a.docs {
        refs = refs.with_manifest(docs).map_err(input_err)?;
    }
    let resources =
        Resources::load(a.stems.as_deref(), a.synonyms.as_deref()).map_err(input_err)?;

    let mut inputs = BTreeMap::new();
    inputs.insert("hyp".to_string(), file_digest(&a.hyp)?);
    inputs.insert("ref".to_string(), file_digest(&a.reference)?);
    for (key, path) in [
        ("docs", &a.docs),
        ("stems", &a.stems),
        ("synonyms", &a.synonyms),
    ] {
        if let Some(p) = path {
            inputs.insert(key.to_string(), file_digest(p)?);
        }
    }

    let opts = ScoringOptions {
        metrics: a.metrics.clone(),
        metric: MetricConfig {
            max_n: a.max_n,
            meteor_penalty: a.meteor_penalty,
            atec_coefficient: a.atec_coefficient,
            strip_punctuation: !a.no_strip_punctuation,
            smoothing: a.smooth,
        },
        text: TextOptions {
            strip_diacritics: a.strip_diacritics,
        },
        verbose: a.verbose,
        workers: a.workers,
        system: a.system.clone(),
    };
    let mut report = score_corpus(&hyps, &refs, &resources, &opts).map_err(|e| match e {
        ReportError::Workers(_) => CliError::Internal(e.to_string()),
        _ => CliError::Input(e.to_string()),
    })?;
    report.config.inputs = inputs;
    info!("scored {} segments", report.segments.len());

    emit(a.out.as_deref(), &report.to_json())?;
    if a.out.is_some() {
        print!("{}", report.summary_table());
    }
    Ok(())
}

pub fn correlate(a: &CorrelateArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&a.report)
        .map_err(|e| CliError::Input(format!("{}: {e}", a.report.display())))?;
    let report = MetricReport::from_json(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", a.report.display())))?;
    let store = JudgmentStore::load(&a.judgments).map_err(input_err)?;

    let systems = if a.system.is_empty() {
        store.systems()
    } else {
        a.system.clone()
    };
    if systems.is_empty() {
        return Err(CliError::Insufficient(format!(
            "{}: no judgments",
            a.judgments.display()
        )));
    }
    let metrics = if a.metric.is_empty() {
        report.config.metrics.clone()
    } else {
        a.metric.clone()
    };

    let mut results = Vec::new();
    for system in &systems {
        for &metric in &metrics {
            match correlate_one(&report, &store, system, metric, a.level) {
                Ok(r) => results.push(r),
                Err(e @ CorrelationError::InsufficientData { .. }) => {
                    return Err(CliError::Insufficient(format!(
                        "system {system:?}, {metric}: {e}"
                    )))
                }
                Err(e) => return Err(CliError::Input(e.to_string())),
            }
        }
    }

    let mut inputs = BTreeMap::new();
    inputs.insert("report".to_string(), file_digest(&a.report)?);
    inputs.insert("judgments".to_string(), file_digest(&a.judgments)?);
    let out = CorrelationReport::new(inputs, results);
    let mut json =
        serde_json::to_string_pretty(&out).map_err(|e| CliError::Internal(e.to_string()))?;
    json.push('\n');
    emit(a.out.as_deref(), &json)
}

#[derive(Serialize)]
struct Export<'a> {
    parameters: &'a [&'a str],
    scores: Vec<mteval_core::human::HumanScore>,
}

pub fn annotate_export(a: &ExportArgs) -> Result<(), CliError> {
    let store = JudgmentStore::load(&a.judgments).map_err(input_err)?;
    let scores = store
        .summaries()
        .into_iter()
        .filter(|s| a.system.as_ref().is_none_or(|sys| &s.system == sys))
        .collect();
    let export = Export {
        parameters: &PARAMETERS,
        scores,
    };
    let mut json =
        serde_json::to_string_pretty(&export).map_err(|e| CliError::Internal(e.to_string()))?;
    json.push('\n');
    emit(a.out.as_deref(), &json)
}

pub fn tokenize(a: &TokenizeArgs) -> Result<(), CliError> {
    let opts = TextOptions {
        strip_diacritics: a.strip_diacritics,
    };
    let reader: Box<dyn BufRead> = match &a.input {
        Some(p) => Box::new(io::BufReader::new(
            std::fs::File::open(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdin().lock()),
    };
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::Input(format!("line {}: {e}", n + 1)))?;
        let mut tokens = prepare(&line, opts);
        if a.strip_punctuation {
            tokens = tokens.without_punctuation();
        }
        writeln!(out, "{}", tokens.tokens().join(" "))
            .map_err(|e| CliError::Internal(format!("standard output: {e}")))?;
    }
    out.flush()
        .map_err(|e| CliError::Internal(format!("standard output: {e}")))
}

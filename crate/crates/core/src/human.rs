//! Human adequacy judgments: ten linguistic parameters, each scored on a
//! five-point scale from 0 (not acceptable) to 4 (ideal).
//!
//! Judgments persist as JSON Lines, one object per line, in the key order
//! `segment_id, system, annotator, scores, timestamp`.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const PARAMETER_COUNT: usize = 10;
pub const MAX_SCORE: u8 = 4;

/// Scale points, lowest first.
pub const SCALE: [(u8, &str); 5] = [
    (0, "Not Acceptable"),
    (1, "Partially Acceptable"),
    (2, "Acceptable"),
    (3, "Perfect"),
    (4, "Ideal"),
];

/// The ten adequacy parameters, in scoring order.
pub const PARAMETERS: [&str; PARAMETER_COUNT] = [
    "Translation of Gender and Number of the Noun/s.",
    "Translation of tense in the source sentence.",
    "Translation of Voice in the source sentence.",
    "Identification of the Proper Nouns.",
    "Use of Adjectives and Adverbs corresponding to the nouns and verbs in the source sentence.",
    "Selection of proper words / synonyms.",
    "The sequence of Noun, Helping Verb and Verb in the translation.",
    "Use of Punctuation signs in the translation.",
    "Maintaining the stress on the significant part in the source sentence in the translation.",
    "Maintaining the semantics of the source sentence in the translation.",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum JudgmentError {
    #[error("invalid judgment: {}", describe(.0))]
    Invalid(Vec<FieldError>),
    #[error("average {0} is outside the 0-4 scale")]
    OutOfRange(f64),
    #[error(
        "duplicate judgment for segment {segment_id}, system {system:?}, annotator {annotator:?}"
    )]
    Duplicate {
        segment_id: u64,
        system: String,
        annotator: String,
    },
    #[error("{path}:{line}: {message}")]
    Corrupt {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn describe(errors: &[FieldError]) -> String {
    errors
        .iter()
        .map(|e| format!("{}: {}", e.field, e.message))
        .collect::<Vec<_>>()
        .join("; ")
}

/// One annotator's ten parameter scores for one system output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HumanJudgment {
    pub segment_id: u64,
    pub system: String,
    pub annotator: String,
    pub scores: [u8; PARAMETER_COUNT],
    pub timestamp: String,
}

impl<'de> Deserialize<'de> for HumanJudgment {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        HumanJudgment::from_value(&value, true).map_err(serde::de::Error::custom)
    }
}

impl HumanJudgment {
    pub fn new(
        segment_id: u64,
        system: impl Into<String>,
        annotator: impl Into<String>,
        scores: [u8; PARAMETER_COUNT],
        timestamp: impl Into<String>,
    ) -> Result<Self, JudgmentError> {
        let judgment = Self {
            segment_id,
            system: system.into(),
            annotator: annotator.into(),
            scores,
            timestamp: timestamp.into(),
        };
        let mut errors = Vec::new();
        judgment.check(&mut errors);
        if errors.is_empty() {
            Ok(judgment)
        } else {
            Err(JudgmentError::Invalid(errors))
        }
    }

    fn check(&self, errors: &mut Vec<FieldError>) {
        if self.system.trim().is_empty() {
            errors.push(FieldError::new("system", "must be a non-empty string"));
        }
        if self.annotator.trim().is_empty() {
            errors.push(FieldError::new("annotator", "must be a non-empty string"));
        }
        if let Some((i, s)) = self.scores.iter().enumerate().find(|(_, &s)| s > MAX_SCORE) {
            errors.push(FieldError::new(
                "scores",
                format!("scores[{i}] = {s} is outside 0-4"),
            ));
        }
        if chrono::DateTime::parse_from_rfc3339(&self.timestamp).is_err() {
            errors.push(FieldError::new(
                "timestamp",
                "must be an ISO-8601 date-time",
            ));
        }
    }

    /// Validates a JSON object field by field. With `require_timestamp`
    /// unset, a missing timestamp is filled with the current UTC time.
    pub fn from_value(value: &Value, require_timestamp: bool) -> Result<Self, JudgmentError> {
        let mut errors = Vec::new();
        let Some(obj) = value.as_object() else {
            return Err(JudgmentError::Invalid(vec![FieldError::new(
                "$",
                "expected a JSON object",
            )]));
        };
        let segment_id = match obj.get("segment_id").map(Value::as_u64) {
            Some(Some(id)) => id,
            Some(None) => {
                errors.push(FieldError::new(
                    "segment_id",
                    "must be a non-negative integer",
                ));
                0
            }
            None => {
                errors.push(FieldError::new("segment_id", "missing"));
                0
            }
        };
        let mut string_field = |name: &str| match obj.get(name) {
            Some(Value::String(s)) => s.clone(),
            Some(_) => {
                errors.push(FieldError::new(name, "must be a string"));
                String::new()
            }
            None => {
                errors.push(FieldError::new(name, "missing"));
                String::new()
            }
        };
        let system = string_field("system");
        let annotator = string_field("annotator");
        let timestamp = match obj.get("timestamp") {
            None | Some(Value::Null) if !require_timestamp => now_timestamp(),
            _ => string_field("timestamp"),
        };
        let mut scores = [0u8; PARAMETER_COUNT];
        match obj.get("scores") {
            Some(Value::Array(items)) if items.len() == PARAMETER_COUNT => {
                for (i, item) in items.iter().enumerate() {
                    match item.as_u64() {
                        Some(s) if s <= MAX_SCORE as u64 => scores[i] = s as u8,
                        _ => errors.push(FieldError::new(
                            "scores",
                            format!("scores[{i}] must be an integer from 0 to 4, got {item}"),
                        )),
                    }
                }
            }
            Some(Value::Array(items)) => errors.push(FieldError::new(
                "scores",
                format!("expected {PARAMETER_COUNT} scores, got {}", items.len()),
            )),
            Some(_) => errors.push(FieldError::new("scores", "must be an array of 10 integers")),
            None => errors.push(FieldError::new("scores", "missing")),
        }
        let judgment = Self {
            segment_id,
            system,
            annotator,
            scores,
            timestamp,
        };
        if errors.is_empty() {
            judgment.check(&mut errors);
        }
        if errors.is_empty() {
            Ok(judgment)
        } else {
            Err(JudgmentError::Invalid(errors))
        }
    }

    pub fn key(&self) -> (u64, &str, &str) {
        (self.segment_id, &self.system, &self.annotator)
    }

    /// Mean of the ten parameter scores, in `[0, 4]`.
    pub fn average_score(&self) -> f64 {
        let total: u32 = self.scores.iter().map(|&s| s as u32).sum();
        total as f64 / PARAMETER_COUNT as f64
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("judgment serializes")
    }
}

pub fn now_timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Converts an average on the 0-4 scale to percent accuracy.
pub fn to_percentage(avg: f64) -> Result<f64, JudgmentError> {
    if !(0.0..=MAX_SCORE as f64).contains(&avg) {
        return Err(JudgmentError::OutOfRange(avg));
    }
    Ok(avg / MAX_SCORE as f64 * 100.0)
}

/// Maps an average on the 0-4 scale onto `[0, 1]` for comparison with
/// metric scores.
pub fn normalized_human(avg: f64) -> f64 {
    avg / MAX_SCORE as f64
}

/// Append-only judgment log, optionally backed by a JSON Lines file.
#[derive(Debug, Default)]
pub struct JudgmentStore {
    judgments: Vec<HumanJudgment>,
    keys: HashSet<(u64, String, String)>,
    file: Option<(PathBuf, File)>,
}

impl JudgmentStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads every judgment in `path` (creating the file if needed) and
    /// keeps it open for appends.
    pub fn open(path: &Path) -> Result<Self, JudgmentError> {
        let io = |source| JudgmentError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut store = if path.exists() {
            Self::load(path)?
        } else {
            Self::in_memory()
        };
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io)?;
        let bytes = fs::read(path).map_err(io)?;
        if !bytes.is_empty() && !bytes.ends_with(b"\n") {
            let tail_start = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
            if serde_json::from_slice::<HumanJudgment>(&bytes[tail_start..]).is_ok() {
                // complete record that only lacks its newline
                file.write_all(b"\n").map_err(io)?;
            } else {
                warn!("{}: dropping incomplete last line", path.display());
                file.set_len(tail_start as u64).map_err(io)?;
            }
            file.sync_data().map_err(io)?;
        }
        store.file = Some((path.to_path_buf(), file));
        Ok(store)
    }

    /// Reads a judgment file without opening it for writing. A final line
    /// without a newline that does not parse is treated as an interrupted
    /// write and skipped.
    pub fn load(path: &Path) -> Result<Self, JudgmentError> {
        let text = fs::read_to_string(path).map_err(|source| JudgmentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut store = Self::in_memory();
        let terminated = text.ends_with('\n');
        let lines: Vec<&str> = text.lines().collect();
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let corrupt = |message: String| JudgmentError::Corrupt {
                path: path.display().to_string(),
                line: i + 1,
                message,
            };
            let parsed = serde_json::from_str::<HumanJudgment>(line);
            let judgment = match parsed {
                Ok(j) => j,
                Err(e) if i + 1 == lines.len() && !terminated => {
                    warn!(
                        "{}:{}: skipping incomplete last line ({e})",
                        path.display(),
                        i + 1
                    );
                    continue;
                }
                Err(e) => return Err(corrupt(e.to_string())),
            };
            store.insert(judgment).map_err(|e| corrupt(e.to_string()))?;
        }
        Ok(store)
    }

    fn insert(&mut self, judgment: HumanJudgment) -> Result<(), JudgmentError> {
        let key = (
            judgment.segment_id,
            judgment.system.clone(),
            judgment.annotator.clone(),
        );
        if self.keys.contains(&key) {
            return Err(JudgmentError::Duplicate {
                segment_id: key.0,
                system: key.1,
                annotator: key.2,
            });
        }
        self.keys.insert(key);
        self.judgments.push(judgment);
        Ok(())
    }

    /// Appends a judgment. For file-backed stores the line is written,
    /// flushed and synced before this returns.
    pub fn append(&mut self, judgment: HumanJudgment) -> Result<(), JudgmentError> {
        if self.contains(judgment.segment_id, &judgment.system, &judgment.annotator) {
            return Err(JudgmentError::Duplicate {
                segment_id: judgment.segment_id,
                system: judgment.system,
                annotator: judgment.annotator,
            });
        }
        if let Some((path, file)) = &mut self.file {
            let mut line = judgment.to_json_line();
            line.push('\n');
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .and_then(|_| file.sync_data())
                .map_err(|source| JudgmentError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
        }
        self.insert(judgment)
    }

    pub fn contains(&self, segment_id: u64, system: &str, annotator: &str) -> bool {
        self.keys
            .contains(&(segment_id, system.to_string(), annotator.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &HumanJudgment> {
        self.judgments.iter()
    }

    pub fn len(&self) -> usize {
        self.judgments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }

    pub fn systems(&self) -> Vec<String> {
        let mut systems: Vec<String> = self.judgments.iter().map(|j| j.system.clone()).collect();
        systems.sort();
        systems.dedup();
        systems
    }

    /// Normalized human score per segment for one system, averaging over
    /// annotators.
    pub fn human_scores(&self, system: &str) -> BTreeMap<u64, f64> {
        self.summaries()
            .into_iter()
            .filter(|s| s.system == system)
            .map(|s| (s.segment_id, s.normalized))
            .collect()
    }

    /// One row per (system, segment), averaged across annotators, sorted by
    /// system then segment.
    pub fn summaries(&self) -> Vec<HumanScore> {
        let mut groups: BTreeMap<(&str, u64), Vec<f64>> = BTreeMap::new();
        for j in &self.judgments {
            groups
                .entry((j.system.as_str(), j.segment_id))
                .or_default()
                .push(j.average_score());
        }
        groups
            .into_iter()
            .map(|((system, segment_id), averages)| {
                let average = averages.iter().sum::<f64>() / averages.len() as f64;
                HumanScore {
                    system: system.to_string(),
                    segment_id,
                    annotators: averages.len(),
                    average,
                    percentage: average / MAX_SCORE as f64 * 100.0,
                    normalized: normalized_human(average),
                }
            })
            .collect()
    }
}

/// Human score for one system output, pooled over annotators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanScore {
    pub system: String,
    pub segment_id: u64,
    pub annotators: usize,
    pub average: f64,
    pub percentage: f64,
    pub normalized: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    const TS: &str = "2024-05-01T10:00:00Z";
    const GOOGLE: [u8; 10] = [2, 3, 2, 2, 2, 2, 1, 2, 2, 2];
    const BABYLON: [u8; 10] = [0, 1, 1, 2, 0, 1, 0, 1, 1, 1];
    const IJUNOON: [u8; 10] = [1, 2, 1, 2, 0, 2, 1, 1, 1, 1];

    fn judgment(segment: u64, system: &str, annotator: &str, scores: [u8; 10]) -> HumanJudgment {
        HumanJudgment::new(segment, system, annotator, scores, TS).unwrap()
    }

    #[test]
    fn table_averages_and_percentages() {
        let cases = [
            (GOOGLE, 2.0, 50.0, 0.5),
            (BABYLON, 0.8, 20.0, 0.2),
            (IJUNOON, 1.2, 30.0, 0.3),
        ];
        for (scores, avg, pct, norm) in cases {
            let j = judgment(1, "sys", "a", scores);
            assert_eq!(j.average_score(), avg);
            assert_eq!(to_percentage(j.average_score()).unwrap(), pct);
            assert_eq!(normalized_human(j.average_score()), norm);
        }
        assert_eq!(judgment(1, "s", "a", [0; 10]).average_score(), 0.0);
        assert_eq!(to_percentage(4.0).unwrap(), 100.0);
        assert_eq!(normalized_human(0.0), 0.0);
    }

    #[test]
    fn percentage_rejects_out_of_range() {
        assert!(matches!(
            to_percentage(4.5),
            Err(JudgmentError::OutOfRange(_))
        ));
        assert!(to_percentage(-0.1).is_err());
        assert!(to_percentage(f64::NAN).is_err());
    }

    #[test]
    fn line_schema_is_exact() {
        let j = judgment(7, "google", "expert-1", GOOGLE);
        assert_eq!(
            j.to_json_line(),
            r#"{"segment_id":7,"system":"google","annotator":"expert-1","scores":[2,3,2,2,2,2,1,2,2,2],"timestamp":"2024-05-01T10:00:00Z"}"#
        );
        let back: HumanJudgment = serde_json::from_str(&j.to_json_line()).unwrap();
        assert_eq!(back, j);
    }

    #[test]
    fn field_level_errors() {
        let body = json!({"segment_id": 1, "system": "g", "annotator": "a", "scores": [1,2,3,4,0,1,2,3,4]});
        let err = HumanJudgment::from_value(&body, false).unwrap_err();
        match err {
            JudgmentError::Invalid(fields) => {
                assert_eq!(fields.len(), 1);
                assert_eq!(fields[0].field, "scores");
                assert!(fields[0].message.contains("got 9"));
            }
            other => panic!("{other}"),
        }
        let body = json!({"segment_id": -1, "system": 3, "scores": [5,0,0,0,0,0,0,0,0,0]});
        let JudgmentError::Invalid(fields) = HumanJudgment::from_value(&body, false).unwrap_err()
        else {
            panic!()
        };
        let names: Vec<&str> = fields.iter().map(|f| f.field.as_str()).collect();
        assert_eq!(names, ["segment_id", "system", "annotator", "scores"]);
        assert!(HumanJudgment::from_value(&json!([1]), false).is_err());
    }

    #[test]
    fn timestamp_required_on_disk_but_filled_for_submissions() {
        let body = json!({"segment_id": 1, "system": "g", "annotator": "a", "scores": GOOGLE});
        assert!(HumanJudgment::from_value(&body, true).is_err());
        let j = HumanJudgment::from_value(&body, false).unwrap();
        assert!(chrono::DateTime::parse_from_rfc3339(&j.timestamp).is_ok());
        assert!(HumanJudgment::new(1, "g", "a", GOOGLE, "yesterday").is_err());
    }

    #[test]
    fn store_rejects_duplicates_and_keeps_order() {
        let mut store = JudgmentStore::in_memory();
        store.append(judgment(2, "g", "a", GOOGLE)).unwrap();
        store.append(judgment(1, "g", "a", BABYLON)).unwrap();
        store.append(judgment(1, "g", "b", IJUNOON)).unwrap();
        let err = store.append(judgment(1, "g", "a", GOOGLE)).unwrap_err();
        assert!(matches!(
            err,
            JudgmentError::Duplicate { segment_id: 1, .. }
        ));
        let order: Vec<u64> = store.iter().map(|j| j.segment_id).collect();
        assert_eq!(order, [2, 1, 1]);
        // segment 1 pooled over two annotators: (0.8 + 1.2) / 2 = 1.0
        let scores = store.human_scores("g");
        assert_eq!(scores[&1], 0.25);
        assert_eq!(scores[&2], 0.5);
        assert!(store.human_scores("unknown").is_empty());
    }

    #[test]
    fn file_store_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("judgments.jsonl");
        {
            let mut store = JudgmentStore::open(&path).unwrap();
            store.append(judgment(1, "google", "a", GOOGLE)).unwrap();
            store.append(judgment(1, "babylon", "a", BABYLON)).unwrap();
            assert!(store.append(judgment(1, "google", "a", GOOGLE)).is_err());
        }
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.ends_with('\n'));
        let reopened = JudgmentStore::open(&path).unwrap();
        let expected = vec![
            judgment(1, "google", "a", GOOGLE),
            judgment(1, "babylon", "a", BABYLON),
        ];
        assert_eq!(reopened.iter().cloned().collect::<Vec<_>>(), expected);
        assert_eq!(reopened.systems(), ["babylon", "google"]);
    }

    #[test]
    fn torn_last_line_is_skipped_and_repaired() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let good = judgment(1, "g", "a", GOOGLE).to_json_line();
        fs::write(&path, format!("{good}\n{{\"segment_id\":2,\"sys")).unwrap();
        let mut store = JudgmentStore::open(&path).unwrap();
        assert_eq!(store.len(), 1);
        store.append(judgment(2, "g", "a", GOOGLE)).unwrap();
        let reloaded = JudgmentStore::load(&path).unwrap();
        assert_eq!(reloaded.len(), 2);
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let good = judgment(1, "g", "a", GOOGLE).to_json_line();
        fs::write(&path, format!("not json\n{good}\n")).unwrap();
        let err = JudgmentStore::load(&path).unwrap_err();
        assert!(
            matches!(err, JudgmentError::Corrupt { line: 1, .. }),
            "{err}"
        );
        fs::write(&path, format!("{good}\n{good}\n")).unwrap();
        let err = JudgmentStore::load(&path).unwrap_err();
        assert!(
            matches!(err, JudgmentError::Corrupt { line: 2, .. }),
            "{err}"
        );
    }

    #[test]
    fn parameters_and_scale() {
        assert_eq!(PARAMETERS.len(), 10);
        assert!(PARAMETERS[0].starts_with("Translation of Gender"));
        assert_eq!(SCALE[0], (0, "Not Acceptable"));
        assert_eq!(SCALE[4], (4, "Ideal"));
    }

    proptest! {
        #[test]
        fn percentage_is_hundred_times_normalized(total in 0u32..=40) {
            let avg = total as f64 / 10.0;
            let pct = to_percentage(avg).unwrap();
            prop_assert!((pct - 100.0 * normalized_human(avg)).abs() < 1e-12);
        }

        #[test]
        fn average_ignores_parameter_order(
            scores in proptest::array::uniform10(0u8..=4),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = scores;
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = judgment(1, "s", "a", scores).average_score();
            let b = judgment(1, "s", "a", shuffled).average_score();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn store_round_trips_through_file(
            entries in proptest::collection::vec((0u64..5, 0usize..3, proptest::array::uniform10(0u8..=4)), 0..12)
        ) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("j.jsonl");
            let mut store = JudgmentStore::open(&path).unwrap();
            let mut appended = Vec::new();
            for (segment, sys, scores) in entries {
                let j = judgment(segment, ["a", "b", "c"][sys], "ann", scores);
                if store.append(j.clone()).is_ok() {
                    appended.push(j);
                }
            }
            let reloaded = JudgmentStore::load(&path).unwrap();
            prop_assert_eq!(reloaded.iter().cloned().collect::<Vec<_>>(), appended);
        }
    }
}

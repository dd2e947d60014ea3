//! Segment representation, normalization and tokenization.
//!
//! Every metric works on [`TokenizedSegment`]s produced here, so hypothesis
//! and reference text must go through the same [`normalize`] / [`tokenize`]
//! settings before being compared.

use std::fs;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("invalid UTF-8 at byte offset {offset}")]
    InvalidUtf8 { offset: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid UTF-8 on line {line} at byte offset {offset}")]
    FileUtf8 {
        path: String,
        line: usize,
        offset: usize,
    },
    #[error("{path}:{line}: {message}")]
    Manifest {
        path: String,
        line: usize,
        message: String,
    },
    #[error("document ranges do not partition {segments} segments: {message}")]
    Partition { segments: usize, message: String },
}

/// One sentence of a corpus. `id` is the 1-based line number in its file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub id: usize,
    pub text: String,
}

/// Options shared by every tokenization call in one scoring run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TextOptions {
    /// Remove Arabic-script harakat (tashkeel) during normalization.
    pub strip_diacritics: bool,
}

/// Ordered tokens of one sentence.
///
/// The relative position of token `i` is `(i + 1) / len`; it is computed on
/// demand, and [`TokenizedSegment::compare_distance`] compares position
/// differences exactly in integer arithmetic.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenizedSegment {
    tokens: Vec<String>,
}

impl TokenizedSegment {
    pub fn new(tokens: Vec<String>) -> Self {
        Self { tokens }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn relative_position(&self, index: usize) -> f64 {
        debug_assert!(index < self.len());
        (index + 1) as f64 / self.len() as f64
    }

    pub fn relative_positions(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.relative_position(i)).collect()
    }

    /// Copy of the segment with punctuation-only tokens removed.
    pub fn without_punctuation(&self) -> Self {
        Self {
            tokens: self
                .tokens
                .iter()
                .filter(|t| !is_punctuation_token(t))
                .cloned()
                .collect(),
        }
    }

    /// Joins tokens with single spaces.
    pub fn detokenize(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Numerator of `|(i+1)/a - (j+1)/b|` over the common denominator `a*b`.
///
/// Two differences taken between the same pair of segment lengths can be
/// compared by this value without any floating-point rounding.
pub fn scaled_position_gap(i: usize, len_a: usize, j: usize, len_b: usize) -> usize {
    ((i + 1) * len_b).abs_diff((j + 1) * len_a)
}

pub fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

pub fn is_punctuation_token(token: &str) -> bool {
    !token.is_empty() && token.chars().all(is_punctuation)
}

/// Arabic-script combining marks (harakat, superscript alef, Quranic marks).
pub fn is_arabic_diacritic(c: char) -> bool {
    matches!(c,
        '\u{0610}'..='\u{061A}'
        | '\u{064B}'..='\u{065F}'
        | '\u{0670}'
        | '\u{06D6}'..='\u{06DC}'
        | '\u{06DF}'..='\u{06E4}'
        | '\u{06E7}'..='\u{06E8}'
        | '\u{06EA}'..='\u{06ED}')
}

fn is_latin_letter(c: char) -> bool {
    matches!(c,
        'A'..='Z'
        | 'a'..='z'
        | '\u{00C0}'..='\u{024F}'
        | '\u{1E00}'..='\u{1EFF}'
        | '\u{2C60}'..='\u{2C7F}'
        | '\u{A720}'..='\u{A7FF}'
        | '\u{FF21}'..='\u{FF3A}')
}

/// Canonical form used everywhere before tokenization.
///
/// NFC, whitespace trimmed and collapsed to single spaces, Latin letters
/// lowercased. Other scripts are only NFC-normalized.
pub fn normalize(text: &str) -> String {
    normalize_with(text, TextOptions::default())
}

pub fn normalize_with(text: &str, opts: TextOptions) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.nfc() {
        if c.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if opts.strip_diacritics && is_arabic_diacritic(c) {
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        if is_latin_letter(c) {
            out.extend(c.to_lowercase());
        } else {
            out.push(c);
        }
    }
    // Lowercasing and mark removal can leave non-NFC sequences behind.
    if out.is_ascii() {
        out
    } else {
        out.nfc().collect()
    }
}

/// [`normalize`] over raw bytes, rejecting invalid UTF-8.
pub fn normalize_bytes(bytes: &[u8]) -> Result<String, TextError> {
    let text = std::str::from_utf8(bytes).map_err(|e| TextError::InvalidUtf8 {
        offset: e.valid_up_to(),
    })?;
    Ok(normalize(text))
}

/// Splits normalized text on whitespace and detaches every punctuation
/// character as a token of its own.
pub fn tokenize(text: &str) -> TokenizedSegment {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let mut current = String::new();
        for c in word.chars() {
            if is_punctuation(c) {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(c.to_string());
            } else {
                current.push(c);
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    TokenizedSegment::new(tokens)
}

/// Normalize then tokenize.
pub fn prepare(text: &str, opts: TextOptions) -> TokenizedSegment {
    tokenize(&normalize_with(text, opts))
}

/// A named, contiguous run of segments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub name: String,
    /// Zero-based half-open index range into `CorpusSide::segments`.
    pub range: Range<usize>,
}

/// All segments of one side (hypothesis or reference) of a corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSide {
    pub segments: Vec<Segment>,
    pub documents: Vec<Document>,
}

impl CorpusSide {
    /// Builds a side with a single document spanning every segment.
    pub fn from_lines<I, S>(lines: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let segments: Vec<Segment> = lines
            .into_iter()
            .enumerate()
            .map(|(i, text)| Segment {
                id: i + 1,
                text: text.into(),
            })
            .collect();
        let documents = vec![Document {
            name: "all".to_string(),
            range: 0..segments.len(),
        }];
        Self {
            segments,
            documents,
        }
    }

    /// Reads a corpus file: UTF-8, one segment per line, line number is id.
    pub fn load(path: &Path) -> Result<Self, TextError> {
        let bytes = fs::read(path).map_err(|source| TextError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut lines = Vec::new();
        let mut start = 0usize;
        for (line_no, raw) in bytes.split(|&b| b == b'\n').enumerate() {
            let text = std::str::from_utf8(raw).map_err(|e| TextError::FileUtf8 {
                path: path.display().to_string(),
                line: line_no + 1,
                offset: start + e.valid_up_to(),
            })?;
            start += raw.len() + 1;
            lines.push(text.strip_suffix('\r').unwrap_or(text).to_string());
        }
        // A trailing newline does not start another segment.
        if bytes.ends_with(b"\n") || bytes.is_empty() {
            lines.pop();
        }
        Ok(Self::from_lines(lines))
    }

    /// Replaces the document layout with the ranges read from a manifest of
    /// `name<TAB>start_line<TAB>end_line` lines (1-based, inclusive).
    pub fn with_manifest(mut self, path: &Path) -> Result<Self, TextError> {
        let text = fs::read_to_string(path).map_err(|source| TextError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut documents = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| TextError::Manifest {
                path: path.display().to_string(),
                line: i + 1,
                message,
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(err(format!(
                    "expected 3 tab-separated columns, found {}",
                    cols.len()
                )));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| err(format!("bad line number {s:?}: {e}")))
            };
            let (first, last) = (parse(cols[1])?, parse(cols[2])?);
            if first == 0 || last < first {
                return Err(err(format!("invalid range {first}..={last}")));
            }
            documents.push(Document {
                name: cols[0].to_string(),
                range: first - 1..last,
            });
        }
        self.set_documents(documents)?;
        Ok(self)
    }

    /// Installs a document layout after checking that it partitions the
    /// segments in order with no gap or overlap.
    pub fn set_documents(&mut self, mut documents: Vec<Document>) -> Result<(), TextError> {
        let segments = self.segments.len();
        let fail = |message: String| TextError::Partition { segments, message };
        documents.sort_by_key(|d| d.range.start);
        let mut next = 0;
        for doc in &documents {
            if doc.range.start != next {
                return Err(fail(format!(
                    "document {:?} starts at line {}, expected line {}",
                    doc.name,
                    doc.range.start + 1,
                    next + 1
                )));
            }
            next = doc.range.end;
        }
        if next != segments {
            return Err(fail(format!("documents end at line {next}")));
        }
        self.documents = documents;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

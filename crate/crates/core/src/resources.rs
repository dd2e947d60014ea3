//! Stem table and synonym lexicon used by the stem and synonym matching
//! stages.
//!
//! File formats:
//!
//! * stems: `surface<TAB>stem`, one pair per line;
//! * synonyms: one synset per line, members separated by tabs.
//!
//! In both, blank lines and lines starting with `#` are ignored. Entries are
//! normalized with [`crate::text::normalize`] so they compare equal to
//! tokens produced by the tokenizer.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use log::warn;
use thiserror::Error;

use crate::text::normalize;

#[derive(Debug, Error)]
pub enum ResourceError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

/// Surface form to stem. Absent words are their own stem.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StemTable {
    entries: HashMap<String, String>,
}

impl StemTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> Result<Self, ResourceError> {
        let text = read(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses stem-table text; `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self, ResourceError> {
        let mut entries = HashMap::new();
        for (line_no, line) in content_lines(text) {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 2 {
                return Err(ResourceError::Parse {
                    path: origin.to_string(),
                    line: line_no,
                    message: format!("expected 2 tab-separated columns, found {}", cols.len()),
                });
            }
            let surface = normalize(cols[0]);
            let stem = normalize(cols[1]);
            if surface.is_empty() || stem.is_empty() {
                return Err(ResourceError::Parse {
                    path: origin.to_string(),
                    line: line_no,
                    message: "empty surface form or stem".to_string(),
                });
            }
            if let Some(old) = entries.insert(surface.clone(), stem) {
                warn!("{origin}:{line_no}: duplicate stem entry for {surface:?} (was {old:?}), keeping the later one");
            }
        }
        let table = Self { entries };
        for (surface, stem) in &table.entries {
            if stem != surface && table.entries.contains_key(stem) {
                warn!("{origin}: stem {stem:?} of {surface:?} is itself a key; stemming is not idempotent");
            }
        }
        Ok(table)
    }

    pub fn insert(&mut self, surface: impl Into<String>, stem: impl Into<String>) {
        self.entries.insert(surface.into(), stem.into());
    }

    pub fn stem_of<'a>(&'a self, word: &'a str) -> &'a str {
        self.entries.get(word).map_or(word, String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Sets of interchangeable words. A word may belong to several synsets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymLexicon {
    synsets: Vec<Vec<String>>,
    index: HashMap<String, BTreeSet<usize>>,
}

impl SynonymLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> Result<Self, ResourceError> {
        let text = read(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, ResourceError> {
        let mut lexicon = Self::new();
        for (line_no, line) in content_lines(text) {
            let mut members: Vec<String> = Vec::new();
            for raw in line.split('\t') {
                let word = normalize(raw);
                if word.is_empty() {
                    return Err(ResourceError::Parse {
                        path: origin.to_string(),
                        line: line_no,
                        message: "empty synset member".to_string(),
                    });
                }
                if !members.contains(&word) {
                    members.push(word);
                }
            }
            if members.len() < 2 {
                return Err(ResourceError::Parse {
                    path: origin.to_string(),
                    line: line_no,
                    message: "a synset needs at least two distinct members".to_string(),
                });
            }
            lexicon.add_synset(members);
        }
        Ok(lexicon)
    }

    /// Adds a synset; duplicate members are dropped and sets with fewer than
    /// two distinct words are ignored.
    pub fn add_synset<I, S>(&mut self, members: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut words: Vec<String> = Vec::new();
        for w in members {
            let w = w.into();
            if !words.contains(&w) {
                words.push(w);
            }
        }
        if words.len() < 2 {
            return;
        }
        let id = self.synsets.len();
        for w in &words {
            self.index.entry(w.clone()).or_default().insert(id);
        }
        self.synsets.push(words);
    }

    pub fn are_synonyms(&self, a: &str, b: &str) -> bool {
        if a == b {
            return false;
        }
        match (self.index.get(a), self.index.get(b)) {
            (Some(sa), Some(sb)) => !sa.is_disjoint(sb),
            _ => false,
        }
    }

    pub fn synsets(&self) -> &[Vec<String>] {
        &self.synsets
    }

    pub fn is_empty(&self) -> bool {
        self.synsets.is_empty()
    }
}

/// The stem table and lexicon used together by a scoring run.
#[derive(Debug, Clone, Default)]
pub struct Resources {
    pub stems: StemTable,
    pub synonyms: SynonymLexicon,
}

impl Resources {
    pub fn load(stems: Option<&Path>, synonyms: Option<&Path>) -> Result<Self, ResourceError> {
        Ok(Self {
            stems: stems.map(StemTable::load).transpose()?.unwrap_or_default(),
            synonyms: synonyms
                .map(SynonymLexicon::load)
                .transpose()?
                .unwrap_or_default(),
        })
    }
}

fn read(path: &Path) -> Result<String, ResourceError> {
    fs::read_to_string(path).map_err(|source| ResourceError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

//! One-to-one unigram alignment between a hypothesis and its reference.
//!
//! Matching runs in up to three passes (exact, stem, synonym). Each pass only
//! sees tokens left unmatched by the earlier ones. Within a pass, hypothesis
//! tokens are visited left to right and each takes the unmatched candidate
//! whose relative position is closest to its own; ties go to the smaller
//! reference index. The result is deterministic and, for every stage, covers
//! as many tokens as any matching can.

use serde::{Deserialize, Serialize};

use crate::resources::Resources;
use crate::text::{scaled_position_gap, TokenizedSegment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchStage {
    Exact,
    Stem,
    Synonym,
}

impl MatchStage {
    pub const ALL: [MatchStage; 3] = [MatchStage::Exact, MatchStage::Stem, MatchStage::Synonym];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedPair {
    pub hyp: usize,
    #[serde(rename = "ref")]
    pub reference: usize,
    pub stage: MatchStage,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Alignment {
    pairs: Vec<AlignedPair>,
    chunks: usize,
}

impl Alignment {
    /// Builds an alignment from explicit pairs, sorting them by hypothesis
    /// index. Panics if either side's indices repeat.
    pub fn from_pairs(mut pairs: Vec<AlignedPair>) -> Self {
        pairs.sort_by_key(|p| p.hyp);
        assert!(
            pairs.windows(2).all(|w| w[0].hyp != w[1].hyp),
            "hypothesis index aligned twice"
        );
        let mut refs: Vec<usize> = pairs.iter().map(|p| p.reference).collect();
        refs.sort_unstable();
        assert!(
            refs.windows(2).all(|w| w[0] != w[1]),
            "reference index aligned twice"
        );
        let chunks = count_chunks(&pairs);
        Self { pairs, chunks }
    }

    /// Pairs sorted by hypothesis index.
    pub fn pairs(&self) -> &[AlignedPair] {
        &self.pairs
    }

    /// Number of matched unigrams.
    pub fn matches(&self) -> usize {
        self.pairs.len()
    }

    pub fn chunks(&self) -> usize {
        self.chunks
    }

    pub fn count_stage(&self, stage: MatchStage) -> usize {
        self.pairs.iter().filter(|p| p.stage == stage).count()
    }
}

/// Three-stage alignment (exact, then stem, then synonym).
pub fn align_unigrams(
    hyp: &TokenizedSegment,
    reference: &TokenizedSegment,
    resources: &Resources,
) -> Alignment {
    align_with_stages(hyp, reference, resources, &MatchStage::ALL)
}

/// Exact-match-only alignment.
pub fn align_exact(hyp: &TokenizedSegment, reference: &TokenizedSegment) -> Alignment {
    align_with_stages(hyp, reference, &Resources::default(), &[MatchStage::Exact])
}

pub fn align_with_stages(
    hyp: &TokenizedSegment,
    reference: &TokenizedSegment,
    resources: &Resources,
    stages: &[MatchStage],
) -> Alignment {
    let mut state = Matcher {
        hyp,
        reference,
        hyp_taken: vec![false; hyp.len()],
        ref_taken: vec![false; reference.len()],
        pairs: Vec::with_capacity(hyp.len().min(reference.len())),
    };
    for &stage in stages {
        match stage {
            MatchStage::Exact => state.pass(stage, |h, r| h == r),
            MatchStage::Stem if !resources.stems.is_empty() => {
                let stems = &resources.stems;
                state.pass(stage, |h, r| stems.stem_of(h) == stems.stem_of(r))
            }
            MatchStage::Synonym if !resources.synonyms.is_empty() => {
                let lex = &resources.synonyms;
                state.pass(stage, |h, r| lex.are_synonyms(h, r))
            }
            // An identity stemmer or empty lexicon cannot add matches.
            MatchStage::Stem | MatchStage::Synonym => {}
        }
    }
    let mut pairs = state.pairs;
    pairs.sort_by_key(|p| p.hyp);
    let chunks = count_chunks(&pairs);
    Alignment { pairs, chunks }
}

struct Matcher<'a> {
    hyp: &'a TokenizedSegment,
    reference: &'a TokenizedSegment,
    hyp_taken: Vec<bool>,
    ref_taken: Vec<bool>,
    pairs: Vec<AlignedPair>,
}

impl Matcher<'_> {
    fn pass(&mut self, stage: MatchStage, is_match: impl Fn(&str, &str) -> bool) {
        let (hyp_len, ref_len) = (self.hyp.len(), self.reference.len());
        for (i, h) in self.hyp.tokens().iter().enumerate() {
            if self.hyp_taken[i] {
                continue;
            }
            let best = self
                .reference
                .tokens()
                .iter()
                .enumerate()
                .filter(|&(j, r)| !self.ref_taken[j] && is_match(h, r))
                .min_by_key(|&(j, _)| (scaled_position_gap(i, hyp_len, j, ref_len), j));
            if let Some((j, _)) = best {
                self.hyp_taken[i] = true;
                self.ref_taken[j] = true;
                self.pairs.push(AlignedPair {
                    hyp: i,
                    reference: j,
                    stage,
                });
            }
        }
    }
}

/// Number of maximal runs of pairs that are adjacent, in order, in both
/// strings. `pairs` must be sorted by hypothesis index.
pub fn count_chunks(pairs: &[AlignedPair]) -> usize {
    if pairs.is_empty() {
        return 0;
    }
    1 + pairs
        .windows(2)
        .filter(|w| !(w[1].hyp == w[0].hyp + 1 && w[1].reference == w[0].reference + 1))
        .count()
}

/// Sum over matched pairs of the absolute difference of their relative
/// positions, divided by the hypothesis length.
///
/// The sum is accumulated exactly over the common denominator, so the only
/// rounding is the final division.
pub fn position_difference(
    alignment: &Alignment,
    hyp: &TokenizedSegment,
    reference: &TokenizedSegment,
) -> f64 {
    let (hyp_len, ref_len) = (hyp.len(), reference.len());
    if hyp_len == 0 || ref_len == 0 {
        return 0.0;
    }
    let scaled: usize = alignment
        .pairs()
        .iter()
        .map(|p| scaled_position_gap(p.hyp, hyp_len, p.reference, ref_len))
        .sum();
    scaled as f64 / (hyp_len as f64 * ref_len as f64 * hyp_len as f64)
}

//! Brute-force reference computations, written without reusing any library
//! code path they are checked against.

#![allow(dead_code)]

/// Every sequence of length `0..=max_len` over `alphabet` symbols, as small
/// integers, shortest first.
pub fn all_sequences(alphabet: u8, max_len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for seq in &frontier {
            for s in 0..alphabet {
                let mut longer: Vec<u8> = seq.clone();
                longer.push(s);
                next.push(longer);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleAlignment {
    /// (hyp index, ref index), sorted by hyp index.
    pub pairs: Vec<(usize, usize)>,
    pub max_cardinality: usize,
}

/// Enumerates the one-to-one matchings of equal symbols and returns the one
/// that is lexicographically smallest under the per-hypothesis-token key
/// (unmatched last, then smaller |relative position gap|, then smaller
/// reference index).
///
/// The smallest key always belongs to a matching of maximum size (matching a
/// token beats leaving it unmatched), so the search only visits matchings
/// of size `max_cardinality`, which is the multiset intersection size.
/// Symbols must be below [`MAX_SYMBOLS`] and segments at most
/// [`MAX_BRUTE_LEN`] long.
pub fn brute_force_alignment(hyp: &[u8], reference: &[u8]) -> OracleAlignment {
    assert!(hyp.len() <= MAX_BRUTE_LEN && reference.len() <= MAX_BRUTE_LEN);
    let mut hyp_counts = [0usize; MAX_SYMBOLS];
    let mut ref_counts = [0usize; MAX_SYMBOLS];
    hyp.iter().for_each(|&s| hyp_counts[s as usize] += 1);
    reference.iter().for_each(|&s| ref_counts[s as usize] += 1);
    let max_cardinality = (0..MAX_SYMBOLS)
        .map(|s| hyp_counts[s].min(ref_counts[s]))
        .sum();
    let mut suffix = [[0usize; MAX_SYMBOLS]; MAX_BRUTE_LEN + 1];
    for i in (0..hyp.len()).rev() {
        suffix[i] = suffix[i + 1];
        suffix[i][hyp[i] as usize] += 1;
    }
    let mut search = Search {
        hyp,
        reference,
        target: max_cardinality,
        suffix,
        free: ref_counts,
        current: [NONE; MAX_BRUTE_LEN],
        best: None,
    };
    search.recurse(0, 0, 0);
    let best = search.best.expect("a maximum matching exists");
    OracleAlignment {
        pairs: (0..hyp.len())
            .filter(|&i| best[i] != NONE)
            .map(|i| (i, best[i] as usize))
            .collect(),
        max_cardinality,
    }
}

pub const MAX_BRUTE_LEN: usize = 8;
pub const MAX_SYMBOLS: usize = 8;
const NONE: u8 = u8::MAX;

struct Search<'a> {
    hyp: &'a [u8],
    reference: &'a [u8],
    target: usize,
    /// `suffix[i][s]`: occurrences of `s` in `hyp[i..]`.
    suffix: [[usize; MAX_SYMBOLS]; MAX_BRUTE_LEN + 1],
    /// Unused reference occurrences per symbol.
    free: [usize; MAX_SYMBOLS],
    current: [u8; MAX_BRUTE_LEN],
    best: Option<[u8; MAX_BRUTE_LEN]>,
}

impl Search<'_> {
    /// |(i+1)/h - (j+1)/r| scaled by h*r, exact.
    fn gap(&self, i: usize, j: usize) -> i64 {
        let (h, r) = (self.hyp.len() as i64, self.reference.len() as i64);
        ((i as i64 + 1) * r - (j as i64 + 1) * h).abs()
    }

    fn key(&self, i: usize, slot: u8) -> (u8, i64, u8) {
        if slot == NONE {
            (1, 0, 0)
        } else {
            (0, self.gap(i, slot as usize), slot)
        }
    }

    /// Largest size any completion of the first `i` choices can reach.
    fn reachable(&self, i: usize, size: usize) -> usize {
        size + (0..MAX_SYMBOLS)
            .map(|s| self.suffix[i][s].min(self.free[s]))
            .sum::<usize>()
    }

    fn recurse(&mut self, i: usize, used: u32, size: usize) {
        if i == self.hyp.len() {
            debug_assert_eq!(size, self.target);
            let better = match &self.best {
                None => true,
                Some(best) => (0..self.hyp.len())
                    .map(|k| (self.key(k, self.current[k]), self.key(k, best[k])))
                    .find(|(a, b)| a != b)
                    .is_some_and(|(a, b)| a < b),
            };
            if better {
                self.best = Some(self.current);
            }
            return;
        }
        if self.reachable(i + 1, size) >= self.target {
            self.current[i] = NONE;
            self.recurse(i + 1, used, size);
        }
        let symbol = self.hyp[i] as usize;
        for j in 0..self.reference.len() {
            if used & (1 << j) == 0 && self.reference[j] == self.hyp[i] {
                self.current[i] = j as u8;
                self.free[symbol] -= 1;
                if self.reachable(i + 1, size + 1) >= self.target {
                    self.recurse(i + 1, used | (1 << j), size + 1);
                }
                self.free[symbol] += 1;
            }
        }
        self.current[i] = NONE;
    }
}

/// Counts a pair as the start of a chunk unless its diagonal predecessor
/// is also aligned.
pub fn chunk_scan(pairs: &[(usize, usize)]) -> usize {
    pairs
        .iter()
        .filter(|&&(h, r)| !(h > 0 && r > 0 && pairs.contains(&(h - 1, r - 1))))
        .count()
}

/// Mean absolute relative-position difference over the hypothesis length.
pub fn posdiff(pairs: &[(usize, usize)], hyp_len: usize, ref_len: usize) -> f64 {
    if hyp_len == 0 {
        return 0.0;
    }
    let sum: f64 = pairs
        .iter()
        .map(|&(i, j)| ((i + 1) as f64 / hyp_len as f64 - (j + 1) as f64 / ref_len as f64).abs())
        .sum();
    sum / hyp_len as f64
}

/// Clipped n-gram precision by explicit counting; `None` when the
/// hypothesis has no n-gram of order `n`.
pub fn ngram_precision<T: PartialEq>(
    hyp: &[T],
    reference: &[T],
    n: usize,
) -> Option<(usize, usize)> {
    if hyp.len() < n {
        return None;
    }
    let total = hyp.len() - n + 1;
    let mut matched = 0;
    for start in 0..total {
        let gram = &hyp[start..start + n];
        // count each distinct gram once, at its first occurrence
        if (0..start).any(|s| &hyp[s..s + n] == gram) {
            continue;
        }
        let in_hyp = (0..total).filter(|&s| &hyp[s..s + n] == gram).count();
        let in_ref = if reference.len() >= n {
            (0..=reference.len() - n)
                .filter(|&s| &reference[s..s + n] == gram)
                .count()
        } else {
            0
        };
        matched += in_hyp.min(in_ref);
    }
    Some((matched, total))
}

/// Pearson r via sample covariance over the product of sample standard
/// deviations (two passes, centered data).
pub fn pearson_two_pass(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / (n - 1.0);
    let sx = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let sy = (y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    cov / (sx * sy)
}

//! Lexical overlap: ROUGE-N, ROUGE-L, BLEU and an exact-match METEOR.

use serde::{Deserialize, Serialize};

use crate::text::TokenSequence;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }
}

fn clipped_overlap(cand: &TokenSequence, reference: &TokenSequence, n: usize) -> (usize, usize, usize) {
    let c = cand.ngram_counts(n);
    let r = reference.ngram_counts(n);
    let overlap = c
        .iter()
        .map(|(g, &k)| k.min(r.get(g).copied().unwrap_or(0)))
        .sum();
    (overlap, c.values().sum(), r.values().sum())
}

/// Clipped n-gram overlap. All zeros when either side has no n-grams.
pub fn rouge_n(cand: &TokenSequence, reference: &TokenSequence, n: usize) -> Prf {
    let (overlap, c_total, r_total) = clipped_overlap(cand, reference, n);
    if c_total == 0 || r_total == 0 {
        return Prf::default();
    }
    Prf::from_pr(
        overlap as f64 / c_total as f64,
        overlap as f64 / r_total as f64,
    )
}

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS-based precision, recall and F1.
pub fn rouge_l(cand: &TokenSequence, reference: &TokenSequence) -> Prf {
    if cand.is_empty() || reference.is_empty() {
        return Prf::default();
    }
    let lcs = lcs_len(cand.tokens(), reference.tokens()) as f64;
    Prf::from_pr(lcs / cand.len() as f64, lcs / reference.len() as f64)
}

/// Order of cumulative BLEU reported as "B-L".
pub const BLEU_L_ORDER: usize = 4;

/// Sentence BLEU: geometric mean of clipped n-gram precisions for
/// `1..=max_n`, times the brevity penalty `min(1, exp(1 - r/c))`.
///
/// With `smoothing`, an order whose clipped count is zero contributes
/// `1 / (total + 1)` instead of zero. An empty candidate or `max_n == 0`
/// scores 0.
pub fn bleu(cand: &TokenSequence, reference: &TokenSequence, max_n: usize, smoothing: bool) -> f64 {
    if cand.is_empty() || max_n == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let (clipped, total, _) = clipped_overlap(cand, reference, n);
        let p = if clipped > 0 {
            clipped as f64 / total as f64
        } else if smoothing {
            1.0 / (total as f64 + 1.0)
        } else {
            return 0.0;
        };
        log_sum += p.ln();
    }
    let c = cand.len() as f64;
    let r = reference.len() as f64;
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    bp * (log_sum / max_n as f64).exp()
}

/// METEOR alignment: matched token pairs `(cand_index, ref_index)` sorted by
/// candidate index.
///
/// Alignment repeatedly takes the longest run of still-unaligned tokens that
/// match on both sides (ties: smallest candidate start, then smallest
/// reference start) until no matching pair remains. This aligns every
/// clipped unigram match and keeps contiguous phrases together.
pub fn meteor_alignment(cand: &TokenSequence, reference: &TokenSequence) -> Vec<(usize, usize)> {
    let c = cand.tokens();
    let r = reference.tokens();
    let mut c_used = vec![false; c.len()];
    let mut r_used = vec![false; r.len()];
    let mut pairs = Vec::new();
    // run[i][j] = length of the available matching run starting at (i, j)
    let mut run = vec![vec![0usize; r.len() + 1]; c.len() + 1];
    loop {
        let mut best = (0usize, 0usize, 0usize);
        for i in (0..c.len()).rev() {
            for j in (0..r.len()).rev() {
                run[i][j] = if !c_used[i] && !r_used[j] && c[i] == r[j] {
                    1 + run[i + 1][j + 1]
                } else {
                    0
                };
            }
        }
        for (i, row) in run.iter().enumerate().take(c.len()) {
            for (j, &len) in row.iter().enumerate().take(r.len()) {
                if len > best.2 {
                    best = (i, j, len);
                }
            }
        }
        let (i, j, len) = best;
        if len == 0 {
            break;
        }
        for k in 0..len {
            c_used[i + k] = true;
            r_used[j + k] = true;
            pairs.push((i + k, j + k));
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Number of maximal runs contiguous on both sides in a sorted alignment.
pub fn count_chunks(pairs: &[(usize, usize)]) -> usize {
    pairs
        .iter()
        .enumerate()
        .filter(|(k, &(i, j))| *k == 0 || pairs[k - 1] != (i.wrapping_sub(1), j.wrapping_sub(1)))
        .count()
}

/// Exact-match METEOR:
/// `F_mean = 10PR / (R + 9P)`, `penalty = 0.5 (chunks / m)^3`,
/// `score = F_mean (1 - penalty)`; zero when nothing matches.
pub fn meteor_simple(cand: &TokenSequence, reference: &TokenSequence) -> f64 {
    let pairs = meteor_alignment(cand, reference);
    meteor_from_counts(pairs.len(), count_chunks(&pairs), cand.len(), reference.len())
}

pub fn meteor_from_counts(matches: usize, chunks: usize, cand_len: usize, ref_len: usize) -> f64 {
    if matches == 0 {
        return 0.0;
    }
    let m = matches as f64;
    let p = m / cand_len as f64;
    let r = m / ref_len as f64;
    let f_mean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (chunks as f64 / m).powi(3);
    f_mean * (1.0 - penalty)
}

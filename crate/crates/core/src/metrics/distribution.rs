//! Distributional comparisons over token-count vectors.

use std::collections::BTreeSet;

use crate::text::TokenSequence;

/// Count vectors of `a` and `b` over their sorted union vocabulary.
pub fn count_vectors(a: &TokenSequence, b: &TokenSequence) -> (Vec<f64>, Vec<f64>) {
    let ca = a.unigram_counts();
    let cb = b.unigram_counts();
    let vocab: BTreeSet<&str> = ca.keys().chain(cb.keys()).copied().collect();
    let get = |m: &std::collections::HashMap<&str, usize>, t: &str| {
        m.get(t).copied().unwrap_or(0) as f64
    };
    vocab
        .into_iter()
        .map(|t| (get(&ca, t), get(&cb, t)))
        .unzip()
}

fn kl_base2(p: &[f64], m: &[f64]) -> f64 {
    p.iter()
        .zip(m)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, mi)| pi * (pi / mi).log2())
        .sum()
}

/// Jensen–Shannon divergence (base 2) of two distributions given as
/// non-negative weights over the same support; each side is normalized
/// first. Panics if the lengths differ.
pub fn js_divergence_weights(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "distributions must share a support");
    let sp: f64 = p.iter().sum();
    let sq: f64 = q.iter().sum();
    match (sp > 0.0, sq > 0.0) {
        (false, false) => return 0.0,
        (true, false) | (false, true) => return 1.0,
        _ => {}
    }
    let p: Vec<f64> = p.iter().map(|v| v / sp).collect();
    let q: Vec<f64> = q.iter().map(|v| v / sq).collect();
    let m: Vec<f64> = p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect();
    (0.5 * kl_base2(&p, &m) + 0.5 * kl_base2(&q, &m)).clamp(0.0, 1.0)
}

/// JSD between the unigram distributions of two token sequences. Two empty
/// sequences score 0; exactly one empty sequence scores 1.
pub fn js_divergence(cand: &TokenSequence, reference: &TokenSequence) -> f64 {
    let (p, q) = count_vectors(cand, reference);
    js_divergence_weights(&p, &q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpNorm {
    L1,
    L2,
}

/// Minkowski distance between raw token-count vectors.
pub fn lp_distance(cand: &TokenSequence, reference: &TokenSequence, norm: LpNorm) -> f64 {
    let (a, b) = count_vectors(cand, reference);
    lp_distance_vectors(&a, &b, norm)
}

pub fn lp_distance_vectors(a: &[f64], b: &[f64], norm: LpNorm) -> f64 {
    let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
    match norm {
        LpNorm::L1 => diffs.sum(),
        LpNorm::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
    }
}

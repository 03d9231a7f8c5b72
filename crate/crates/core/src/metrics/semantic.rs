//! Embedding-based metrics over a pluggable [`Encoder`].

use std::collections::HashMap;

use super::overlap::Prf;
use super::MetricError;
use crate::encoder::{cosine_similarity, Embedding, Encoder};
use crate::text::TokenSequence;

fn embed_tokens(
    seq: &TokenSequence,
    encoder: &dyn Encoder,
    cache: &mut HashMap<String, Embedding>,
) -> Result<Vec<Embedding>, MetricError> {
    seq.iter()
        .map(|t| {
            if let Some(e) = cache.get(t) {
                return Ok(e.clone());
            }
            let e = encoder.encode(t)?;
            cache.insert(t.to_owned(), e.clone());
            Ok(e)
        })
        .collect()
}

fn greedy_side(from: &[Embedding], to: &[Embedding]) -> Result<f64, MetricError> {
    let mut total = 0.0;
    for a in from {
        let mut best = 0.0f64;
        for b in to {
            best = best.max(cosine_similarity(a, b)?);
        }
        total += best;
    }
    Ok(total / from.len() as f64)
}

/// Greedy token matching F1 (BERTScore-style) using per-token embeddings.
///
/// Precision averages, over candidate tokens, the best cosine against any
/// reference token; recall is the mirror image. Best similarities are
/// floored at 0 so the score stays in [0, 1].
pub fn embedding_f1(
    cand: &TokenSequence,
    reference: &TokenSequence,
    encoder: &dyn Encoder,
) -> Result<Prf, MetricError> {
    if cand.is_empty() || reference.is_empty() {
        return Ok(Prf::default());
    }
    let mut cache = HashMap::new();
    let c = embed_tokens(cand, encoder, &mut cache)?;
    let r = embed_tokens(reference, encoder, &mut cache)?;
    Ok(Prf::from_pr(greedy_side(&c, &r)?, greedy_side(&r, &c)?))
}

/// `1 − cos(f(cand), f(ref))` over whole-text embeddings.
pub fn cosine_distance(
    cand_text: &str,
    ref_text: &str,
    encoder: &dyn Encoder,
) -> Result<f64, MetricError> {
    let a = encoder.encode(cand_text)?;
    let b = encoder.encode(ref_text)?;
    Ok(1.0 - cosine_similarity(&a, &b)?)
}

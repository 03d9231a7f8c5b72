//! Perplexity under a unigram language model.

use std::collections::HashMap;

use super::MetricError;
use crate::text::TokenSequence;

/// Anything that can assign a natural-log probability to a token.
pub trait TokenLogProb {
    fn log_prob(&self, token: &str) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnigramLm {
    log_probs: HashMap<String, f64>,
    oov_log_prob: f64,
}

impl UnigramLm {
    /// Add-one smoothed fit: with `N` tokens over `V` types,
    /// `p(w) = (c(w) + 1) / (N + V + 1)` and every unseen token gets
    /// `1 / (N + V + 1)`.
    pub fn fit<'a, I>(corpus: I) -> Self
    where
        I: IntoIterator<Item = &'a TokenSequence>,
    {
        let mut counts: HashMap<String, usize> = HashMap::new();
        let mut total = 0usize;
        for seq in corpus {
            for t in seq.iter() {
                *counts.entry(t.to_owned()).or_insert(0) += 1;
                total += 1;
            }
        }
        let denom = (total + counts.len() + 1) as f64;
        let log_probs = counts
            .into_iter()
            .map(|(t, c)| (t, ((c + 1) as f64 / denom).ln()))
            .collect();
        UnigramLm {
            log_probs,
            oov_log_prob: (1.0 / denom).ln(),
        }
    }

    /// Explicit probabilities. Each must lie in (0, 1].
    pub fn from_probabilities<I, S>(probs: I, oov_prob: f64) -> Result<Self, MetricError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let check = |p: f64| {
            if p > 0.0 && p <= 1.0 {
                Ok(p.ln())
            } else {
                Err(MetricError::InvalidProbability(p))
            }
        };
        let log_probs = probs
            .into_iter()
            .map(|(t, p)| check(p).map(|lp| (t.into(), lp)))
            .collect::<Result<_, _>>()?;
        Ok(UnigramLm {
            log_probs,
            oov_log_prob: check(oov_prob)?,
        })
    }

    /// Uniform over the given types; out-of-vocabulary tokens receive the
    /// same `1 / V`.
    pub fn uniform<I, S>(types: I) -> Result<Self, MetricError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let types: Vec<String> = types.into_iter().map(Into::into).collect();
        if types.is_empty() {
            return Err(MetricError::EmptyText);
        }
        let p = 1.0 / types.len() as f64;
        Self::from_probabilities(types.into_iter().map(|t| (t, p)), p)
    }

    pub fn vocab_size(&self) -> usize {
        self.log_probs.len()
    }
}

impl TokenLogProb for UnigramLm {
    fn log_prob(&self, token: &str) -> f64 {
        self.log_probs
            .get(token)
            .copied()
            .unwrap_or(self.oov_log_prob)
    }
}

/// `exp(-(1/N) Σ ln p(token))`.
pub fn perplexity(tokens: &TokenSequence, lm: &dyn TokenLogProb) -> Result<f64, MetricError> {
    let lps: Vec<f64> = tokens.iter().map(|t| lm.log_prob(t)).collect();
    perplexity_from_log_probs(&lps)
}

/// Perplexity from per-token natural-log probabilities, e.g. as returned by
/// a generation backend.
pub fn perplexity_from_log_probs(log_probs: &[f64]) -> Result<f64, MetricError> {
    if log_probs.is_empty() {
        return Err(MetricError::EmptyText);
    }
    let mean = log_probs.iter().sum::<f64>() / log_probs.len() as f64;
    Ok((-mean).exp())
}

//! The fifteen-column evaluation battery.
//!
//! All metrics read text through [`crate::text::tokenize`]. Column meanings:
//!
//! | column | metric                                        | better |
//! |--------|-----------------------------------------------|--------|
//! | R-1    | ROUGE-1 F1                                    | ↑      |
//! | R-2    | ROUGE-2 F1                                    | ↑      |
//! | R-L    | ROUGE-L F1                                    | ↑      |
//! | B-1    | BLEU, max order 1                             | ↑      |
//! | B-2    | cumulative BLEU-2                             | ↑      |
//! | B-3    | cumulative BLEU-3                             | ↑      |
//! | B-L    | cumulative BLEU-4                             | ↑      |
//! | BS     | greedy embedding-matching F1                  | ↑      |
//! | MS     | exact-match METEOR                            | ↑      |
//! | CD     | cosine distance of whole-text embeddings      | ↓      |
//! | JSD    | Jensen–Shannon divergence of unigram dists    | ↓      |
//! | L2     | Euclidean distance of token-count vectors     | ↓      |
//! | L1     | Manhattan distance of token-count vectors     | ↓      |
//! | PS     | unigram-LM perplexity of the candidate        | ↓      |
//! | FRS    | Flesch reading ease of the candidate          | ↑      |

pub mod distribution;
pub mod overlap;
pub mod perplexity;
pub mod readability;
pub mod semantic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::{Encoder, EncoderError};
use crate::text::tokenize;

pub use distribution::{js_divergence, js_divergence_weights, lp_distance, LpNorm};
pub use overlap::{bleu, meteor_simple, rouge_l, rouge_n, Prf, BLEU_L_ORDER};
pub use perplexity::{perplexity, perplexity_from_log_probs, TokenLogProb, UnigramLm};
pub use readability::{flesch_kincaid_grade, flesch_reading_ease, ReadabilityVariant};
pub use semantic::{cosine_distance, embedding_f1};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("text has no tokens")]
    EmptyText,
    #[error("probability {0} outside (0, 1]")]
    InvalidProbability(f64),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

impl Direction {
    pub fn arrow(self) -> &'static str {
        match self {
            Direction::HigherIsBetter => "↑",
            Direction::LowerIsBetter => "↓",
        }
    }
}

/// Column headers in report order, with their optimization direction.
pub const METRIC_COLUMNS: [(&str, Direction); 15] = [
    ("R-1", Direction::HigherIsBetter),
    ("R-2", Direction::HigherIsBetter),
    ("R-L", Direction::HigherIsBetter),
    ("B-1", Direction::HigherIsBetter),
    ("B-2", Direction::HigherIsBetter),
    ("B-3", Direction::HigherIsBetter),
    ("B-L", Direction::HigherIsBetter),
    ("BS", Direction::HigherIsBetter),
    ("MS", Direction::HigherIsBetter),
    ("CD", Direction::LowerIsBetter),
    ("JSD", Direction::LowerIsBetter),
    ("L2", Direction::LowerIsBetter),
    ("L1", Direction::LowerIsBetter),
    ("PS", Direction::LowerIsBetter),
    ("FRS", Direction::HigherIsBetter),
];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub r1: f64,
    pub r2: f64,
    pub rl: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub bl: f64,
    pub bs: f64,
    pub ms: f64,
    pub cd: f64,
    pub jsd: f64,
    pub l2: f64,
    pub l1: f64,
    pub ps: f64,
    pub frs: f64,
}

impl MetricReport {
    /// Values in [`METRIC_COLUMNS`] order.
    pub fn values(&self) -> [f64; 15] {
        [
            self.r1, self.r2, self.rl, self.b1, self.b2, self.b3, self.bl, self.bs, self.ms,
            self.cd, self.jsd, self.l2, self.l1, self.ps, self.frs,
        ]
    }

    pub fn from_values(v: [f64; 15]) -> Self {
        let [r1, r2, rl, b1, b2, b3, bl, bs, ms, cd, jsd, l2, l1, ps, frs] = v;
        MetricReport {
            r1, r2, rl, b1, b2, b3, bl, bs, ms, cd, jsd, l2, l1, ps, frs,
        }
    }

    /// Unweighted column means; `None` for an empty slice.
    pub fn mean(reports: &[MetricReport]) -> Option<MetricReport> {
        if reports.is_empty() {
            return None;
        }
        let mut sums = [0.0; 15];
        for r in reports {
            for (s, v) in sums.iter_mut().zip(r.values()) {
                *s += v;
            }
        }
        let n = reports.len() as f64;
        Some(MetricReport::from_values(sums.map(|s| s / n)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricOptions {
    pub bleu_smoothing: bool,
    pub readability: ReadabilityVariant,
}

/// Scores one candidate explanation against its reference.
pub fn evaluate_pair(
    cand_text: &str,
    ref_text: &str,
    encoder: &dyn Encoder,
    lm: &dyn TokenLogProb,
    opts: MetricOptions,
) -> Result<MetricReport, MetricError> {
    let cand = tokenize(cand_text);
    let reference = tokenize(ref_text);
    if cand.is_empty() || reference.is_empty() {
        return Err(MetricError::EmptyText);
    }
    let smooth = opts.bleu_smoothing;
    Ok(MetricReport {
        r1: rouge_n(&cand, &reference, 1).f1,
        r2: rouge_n(&cand, &reference, 2).f1,
        rl: rouge_l(&cand, &reference).f1,
        b1: bleu(&cand, &reference, 1, smooth),
        b2: bleu(&cand, &reference, 2, smooth),
        b3: bleu(&cand, &reference, 3, smooth),
        bl: bleu(&cand, &reference, BLEU_L_ORDER, smooth),
        bs: embedding_f1(&cand, &reference, encoder)?.f1,
        ms: meteor_simple(&cand, &reference),
        cd: cosine_distance(cand_text, ref_text, encoder)?,
        jsd: js_divergence(&cand, &reference),
        l2: lp_distance(&cand, &reference, LpNorm::L2),
        l1: lp_distance(&cand, &reference, LpNorm::L1),
        ps: perplexity(&cand, lm)?,
        frs: readability::readability(cand_text, opts.readability)?,
    })
}

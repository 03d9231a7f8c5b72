//! Error discrimination, corrective hints and augmented prompts.
//!
//! The reference hint generator is rule based: it diffs content words of the
//! predicted and gold explanations, classifies the failure, and renders a
//! fixed single-line template. Content words are tokens from
//! [`crate::text::tokenize`] minus [`crate::text::STOPWORDS`].
//!
//! Template strings are part of the output contract; prompts (and therefore
//! every downstream report) depend on them byte for byte.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::{cosine_similarity, Encoder, EncoderError};
use crate::modelclient::{ModelClient, ModelError};
use crate::text::{content_words, token_f1, tokenize};

/// Rendered hint for a pair that was not judged an error.
pub const NOOP_HINT: &str =
    "Previous interpretation was acceptable; preserve the figurative meaning.";
pub const PROMPT_IDIOM_PREFIX: &str = "Idiom: ";
pub const PROMPT_HINT_PREFIX: &str = "Hint from a similar past mistake: ";
pub const PROMPT_INSTRUCTION: &str =
    "Provide the literal English translation, then the figurative explanation.";

pub const MAX_GOLD_KEYWORDS: usize = 8;
pub const MAX_AVOID_WORDS: usize = 12;
/// Shared content words with the literal translation needed to call a
/// failure a literal overreach.
pub const LITERAL_OVERLAP_MIN: usize = 2;

#[derive(Debug, Error)]
pub enum HintError {
    #[error("{0} text is empty")]
    EmptyText(&'static str),
    #[error("threshold must lie in [0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("embedding_cosine scoring needs an encoder")]
    MissingEncoder,
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error("critique model failed: {0}")]
    Model(#[from] ModelError),
}

pub type Result<T, E = HintError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    LiteralOverreach,
    MissingGist,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hint {
    pub error_category: ErrorCategory,
    pub avoid_summary: String,
    pub gold_keywords: Vec<String>,
    pub rendered: String,
}

impl Hint {
    pub fn noop() -> Self {
        Hint {
            error_category: ErrorCategory::Partial,
            avoid_summary: String::new(),
            gold_keywords: Vec::new(),
            rendered: NOOP_HINT.to_owned(),
        }
    }
}

pub fn render_hint(avoid_summary: &str, keywords: &[String]) -> String {
    format!(
        "Avoid reading the idiom literally as: {avoid_summary}. \
         The intended figurative meaning involves: {}.",
        keywords.join(", ")
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    #[default]
    TokenF1,
    EmbeddingCosine,
}

fn default_threshold() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscriminatorConfig {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub score_kind: ScoreKind,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig {
            threshold: default_threshold(),
            score_kind: ScoreKind::TokenF1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub is_error: bool,
    pub score: f64,
}

/// Decides whether a predicted explanation misses the gold one.
/// A pair is an error when its score falls strictly below the threshold.
#[derive(Clone)]
pub struct Discriminator {
    config: DiscriminatorConfig,
    encoder: Option<Arc<dyn Encoder>>,
}

impl Discriminator {
    pub fn new(config: DiscriminatorConfig) -> Result<Self> {
        if !(0.0..=1.0).contains(&config.threshold) {
            return Err(HintError::InvalidThreshold(config.threshold));
        }
        Ok(Discriminator {
            config,
            encoder: None,
        })
    }

    pub fn with_encoder(mut self, encoder: Arc<dyn Encoder>) -> Self {
        self.encoder = Some(encoder);
        self
    }

    pub fn config(&self) -> DiscriminatorConfig {
        self.config
    }

    pub fn score(&self, pred: &str, gold: &str) -> Result<f64> {
        if pred.trim().is_empty() {
            return Err(HintError::EmptyText("predicted explanation"));
        }
        if gold.trim().is_empty() {
            return Err(HintError::EmptyText("gold explanation"));
        }
        match self.config.score_kind {
            ScoreKind::TokenF1 => Ok(token_f1(&tokenize(pred), &tokenize(gold))),
            ScoreKind::EmbeddingCosine => {
                let enc = self.encoder.as_ref().ok_or(HintError::MissingEncoder)?;
                Ok(cosine_similarity(&enc.encode(pred)?, &enc.encode(gold)?)?)
            }
        }
    }

    pub fn judge(&self, pred: &str, gold: &str) -> Result<Verdict> {
        let score = self.score(pred, gold)?;
        Ok(Verdict {
            is_error: score < self.config.threshold,
            score,
        })
    }
}

/// Free-function form of [`Discriminator::judge`].
pub fn is_error(pred: &str, gold: &str, discriminator: &Discriminator) -> Result<Verdict> {
    discriminator.judge(pred, gold)
}

/// The hint function φ(predicted, gold). Implementations must be deterministic
/// for the repository build to be reproducible.
pub trait HintGenerator: Send + Sync {
    fn generate_hint(
        &self,
        pred_explanation: &str,
        gold_explanation: &str,
        idiom: &str,
        literal_translation: &str,
    ) -> Result<Hint>;
}

/// Keyword-diff hint generator.
#[derive(Clone)]
pub struct RuleBasedHinter {
    discriminator: Discriminator,
}

impl RuleBasedHinter {
    pub fn new(discriminator: Discriminator) -> Self {
        RuleBasedHinter { discriminator }
    }
}

impl Default for RuleBasedHinter {
    fn default() -> Self {
        RuleBasedHinter::new(
            Discriminator::new(DiscriminatorConfig::default()).expect("default config is valid"),
        )
    }
}

fn avoid_summary(pred: &str) -> String {
    let words: Vec<&str> = pred.split_whitespace().take(MAX_AVOID_WORDS).collect();
    words
        .join(" ")
        .trim_end_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace())
        .to_owned()
}

impl HintGenerator for RuleBasedHinter {
    fn generate_hint(
        &self,
        pred_explanation: &str,
        gold_explanation: &str,
        idiom: &str,
        literal_translation: &str,
    ) -> Result<Hint> {
        if idiom.trim().is_empty() {
            return Err(HintError::EmptyText("idiom"));
        }
        if literal_translation.trim().is_empty() {
            return Err(HintError::EmptyText("literal translation"));
        }
        let verdict = self.discriminator.judge(pred_explanation, gold_explanation)?;

        let pred_words: HashSet<String> = content_words(pred_explanation).into_iter().collect();
        let gold_words = content_words(gold_explanation);
        let gold_keywords: Vec<String> = gold_words
            .iter()
            .filter(|w| !pred_words.contains(*w))
            .take(MAX_GOLD_KEYWORDS)
            .cloned()
            .collect();
        let literal_overlap = content_words(literal_translation)
            .iter()
            .filter(|w| pred_words.contains(*w))
            .count();

        let error_category = if verdict.is_error
            && literal_overlap >= LITERAL_OVERLAP_MIN
            && !gold_keywords.is_empty()
        {
            ErrorCategory::LiteralOverreach
        } else if !gold_keywords.is_empty() && literal_overlap == 0 {
            ErrorCategory::MissingGist
        } else {
            ErrorCategory::Partial
        };

        if !verdict.is_error && gold_keywords.is_empty() {
            return Ok(Hint::noop());
        }

        let shown: Vec<String> = if !gold_keywords.is_empty() {
            gold_keywords.clone()
        } else if !gold_words.is_empty() {
            gold_words.iter().take(MAX_GOLD_KEYWORDS).cloned().collect()
        } else {
            tokenize(gold_explanation)
                .iter()
                .take(MAX_GOLD_KEYWORDS)
                .map(str::to_owned)
                .collect()
        };
        let summary = avoid_summary(pred_explanation);
        Ok(Hint {
            error_category,
            rendered: render_hint(&summary, &shown),
            avoid_summary: summary,
            gold_keywords,
        })
    }
}

/// Hint generator that asks a model to phrase the correction, keeping the
/// rule-based category and keywords.
pub struct CritiqueHinter {
    client: Arc<ModelClient>,
    rules: RuleBasedHinter,
}

impl CritiqueHinter {
    pub fn new(client: Arc<ModelClient>, rules: RuleBasedHinter) -> Self {
        CritiqueHinter { client, rules }
    }

    pub fn critique_prompt(idiom: &str, pred: &str, gold: &str) -> String {
        format!(
            "Idiom: {idiom}\nA model explained it as: {pred}\nThe correct explanation is: {gold}\n\
             Write one sentence of advice that would steer a model away from this mistake \
             without quoting the correct explanation."
        )
    }
}

impl HintGenerator for CritiqueHinter {
    fn generate_hint(
        &self,
        pred_explanation: &str,
        gold_explanation: &str,
        idiom: &str,
        literal_translation: &str,
    ) -> Result<Hint> {
        let mut hint =
            self.rules
                .generate_hint(pred_explanation, gold_explanation, idiom, literal_translation)?;
        if hint.rendered == NOOP_HINT {
            return Ok(hint);
        }
        let out = self.client.generate(&Self::critique_prompt(
            idiom,
            pred_explanation,
            gold_explanation,
        ))?;
        let advice = out.explanation.split_whitespace().collect::<Vec<_>>().join(" ");
        if !advice.is_empty() {
            hint.rendered = advice;
        }
        Ok(hint)
    }
}

/// `Idiom: {x}` [+ hint line] + instruction, newline separated.
pub fn build_prompt(idiom: &str, hint: Option<&Hint>) -> String {
    let mut prompt = format!("{PROMPT_IDIOM_PREFIX}{idiom}\n");
    if let Some(h) = hint {
        prompt.push_str(PROMPT_HINT_PREFIX);
        prompt.push_str(&h.rendered);
        prompt.push('\n');
    }
    prompt.push_str(PROMPT_INSTRUCTION);
    prompt
}

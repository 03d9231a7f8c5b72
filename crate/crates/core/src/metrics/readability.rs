//! Flesch readability formulas.
//!
//! * words: tokens from the shared normalizer
//! * sentences: runs of text between terminators (`.`, `!`, `?`, `।`, `॥`)
//!   that contain at least one alphanumeric character; minimum 1
//! * syllables: per word, the number of maximal `[aeiouy]` groups, minus one
//!   for a trailing silent `e` (not `le`) when more than one group exists;
//!   minimum 1

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::text::tokenize;

const TERMINATORS: &[char] = &['.', '!', '?', '\u{0964}', '\u{0965}'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadabilityVariant {
    #[default]
    ReadingEase,
    GradeLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TextStats {
    pub words: usize,
    pub sentences: usize,
    pub syllables: usize,
}

pub fn count_syllables(word: &str) -> usize {
    let w = word.to_lowercase();
    let is_vowel = |c: char| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y');
    let mut groups = 0;
    let mut prev_vowel = false;
    for c in w.chars() {
        let v = is_vowel(c);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    if groups > 1 && w.ends_with('e') && !w.ends_with("le") {
        groups -= 1;
    }
    groups.max(1)
}

pub fn text_stats(text: &str) -> Result<TextStats, MetricError> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(MetricError::EmptyText);
    }
    let sentences = text
        .split(TERMINATORS)
        .filter(|s| s.chars().any(char::is_alphanumeric))
        .count()
        .max(1);
    let syllables = tokens.iter().map(count_syllables).sum();
    Ok(TextStats {
        words: tokens.len(),
        sentences,
        syllables,
    })
}

/// `206.835 − 1.015·(words/sentences) − 84.6·(syllables/words)`.
pub fn flesch_reading_ease(text: &str) -> Result<f64, MetricError> {
    let s = text_stats(text)?;
    let (w, se, sy) = (s.words as f64, s.sentences as f64, s.syllables as f64);
    Ok(206.835 - 1.015 * (w / se) - 84.6 * (sy / w))
}

/// `0.39·(words/sentences) + 11.8·(syllables/words) − 15.59`.
pub fn flesch_kincaid_grade(text: &str) -> Result<f64, MetricError> {
    let s = text_stats(text)?;
    let (w, se, sy) = (s.words as f64, s.sentences as f64, s.syllables as f64);
    Ok(0.39 * (w / se) + 11.8 * (sy / w) - 15.59)
}

pub fn readability(text: &str, variant: ReadabilityVariant) -> Result<f64, MetricError> {
    match variant {
        ReadabilityVariant::ReadingEase => flesch_reading_ease(text),
        ReadabilityVariant::GradeLevel => flesch_kincaid_grade(text),
    }
}

//! Shared text normalization.
//!
//! Every metric, the discriminator, and the feature-hash encoder see text
//! through [`tokenize`], so their scores are mutually comparable. The rules:
//!
//! 1. Lowercase with Unicode case mapping.
//! 2. Split on whitespace and punctuation. Punctuation is ASCII punctuation,
//!    the General Punctuation block (U+2000..U+206F), CJK symbols
//!    (U+3000..U+303F) and a handful of script-specific marks such as the
//!    Devanagari danda. Combining marks (vowel signs, viramas) are *not*
//!    separators, so Hindi, Bengali and Thai words survive intact.
//! 3. Drop empty pieces.

use std::collections::HashMap;
use std::fmt;

/// Fixed English stopword list used to pick out content words.
///
/// Hints are written in English (the explanation language), so no other
/// languages are covered.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "all", "also", "am", "an", "and", "any", "are", "as", "at", "be", "been",
    "being", "but", "by", "can", "could", "did", "do", "does", "each", "even", "every", "for",
    "from", "had", "has", "have", "he", "her", "here", "him", "his", "how", "i", "if", "in",
    "into", "is", "it", "its", "just", "may", "me", "might", "more", "most", "must", "my", "no",
    "not", "of", "on", "only", "onto", "or", "other", "our", "own", "s", "same", "shall", "she",
    "should", "so", "some", "such", "t", "than", "that", "the", "their", "them", "then", "there",
    "these", "they", "this", "those", "to", "too", "up", "us", "very", "was", "we", "were",
    "what", "when", "where", "which", "while", "who", "whom", "whose", "why", "will", "with",
    "would", "you", "your",
];

const EXTRA_SEPARATORS: &[char] = &[
    '\u{0964}', // devanagari danda
    '\u{0965}', // double danda
    '\u{00AB}', '\u{00BB}', '\u{00A1}', '\u{00BF}', '\u{00B7}', '\u{00A7}', '\u{00B6}',
    '\u{0E2F}', // thai paiyannoi
    '\u{0E5A}', '\u{0E5B}',
    '\u{FF0C}', '\u{FF0E}', '\u{FF01}', '\u{FF1F}', '\u{FF1A}', '\u{FF1B}',
];

fn is_separator(c: char) -> bool {
    c.is_whitespace()
        || c.is_ascii_punctuation()
        || ('\u{2000}'..='\u{206F}').contains(&c)
        || ('\u{3000}'..='\u{303F}').contains(&c)
        || EXTRA_SEPARATORS.contains(&c)
}

/// Ordered, lowercased tokens produced by the shared normalizer.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    /// Wraps pre-split tokens, dropping empties.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        TokenSequence(
            tokens
                .into_iter()
                .map(Into::into)
                .filter(|t: &String| !t.is_empty())
                .collect(),
        )
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    /// Multiset of n-grams. Empty when `n == 0` or the sequence is shorter than `n`.
    pub fn ngram_counts(&self, n: usize) -> HashMap<&[String], usize> {
        let mut counts = HashMap::new();
        if n == 0 || self.0.len() < n {
            return counts;
        }
        for w in self.0.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
        counts
    }

    pub fn unigram_counts(&self) -> HashMap<&str, usize> {
        let mut counts = HashMap::new();
        for t in &self.0 {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
        counts
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

/// Normalizes `text` into a [`TokenSequence`].
pub fn tokenize(text: &str) -> TokenSequence {
    let lowered = text.to_lowercase();
    TokenSequence(
        lowered
            .split(is_separator)
            .filter(|t| !t.is_empty())
            .map(str::to_owned)
            .collect(),
    )
}

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

/// Content words of `text` in first-occurrence order, deduplicated.
pub fn content_words(text: &str) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    tokenize(text)
        .0
        .into_iter()
        .filter(|t| !is_stopword(t))
        .filter(|t| seen.insert(t.clone()))
        .collect()
}

/// Token-level F1 with clipped unigram overlap. Zero when either side is empty.
pub fn token_f1(cand: &TokenSequence, reference: &TokenSequence) -> f64 {
    if cand.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let rc = reference.unigram_counts();
    let overlap: usize = cand
        .unigram_counts()
        .iter()
        .map(|(t, c)| (*c).min(rc.get(t).copied().unwrap_or(0)))
        .sum();
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / cand.len() as f64;
    let r = overlap as f64 / reference.len() as f64;
    2.0 * p * r / (p + r)
}

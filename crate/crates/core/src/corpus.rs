//! Idiom corpora: loading, validation, train/test splitting and the
//! annotation-quality statistics (IPR scores, Cohen's kappa).
//!
//! # File format
//!
//! UTF-8, one JSON object per line. Blank lines are skipped. Field names:
//!
//! | field              | required | notes                          |
//! |--------------------|----------|--------------------------------|
//! | `id`               | yes      | unique within the file         |
//! | `language`         | yes      | `hi`, `bn` or `th`             |
//! | `idiom`            | yes      | source-language text           |
//! | `gold_translation` | yes      | English literal translation    |
//! | `gold_explanation` | yes      | English figurative explanation |
//! | `usage_example`    | no       |                                |
//! | `cultural_note`    | no       |                                |
//! | `image_path`       | no       | carried through, never read    |
//!
//! Unknown fields are rejected so that typos surface as errors.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::hash::Hash;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("cannot split an empty corpus")]
    EmptyCorpus,
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("label lists differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("label lists are empty")]
    EmptyInput,
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Hi,
    Bn,
    Th,
}

impl Language {
    pub fn code(self) -> &'static str {
        match self {
            Language::Hi => "hi",
            Language::Bn => "bn",
            Language::Th => "th",
        }
    }
}

impl std::str::FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "hi" => Ok(Language::Hi),
            "bn" => Ok(Language::Bn),
            "th" => Ok(Language::Th),
            other => Err(format!("unsupported language code {other:?}")),
        }
    }
}

/// One corpus row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdiomRecord {
    pub id: String,
    pub language: Language,
    pub idiom: String,
    pub gold_translation: String,
    pub gold_explanation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage_example: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cultural_note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<String>,
}

impl IdiomRecord {
    fn check(&self) -> std::result::Result<(), String> {
        let required = [
            ("id", &self.id),
            ("idiom", &self.idiom),
            ("gold_translation", &self.gold_translation),
            ("gold_explanation", &self.gold_explanation),
        ];
        for (name, value) in required {
            if value.trim().is_empty() {
                return Err(format!("field `{name}` is empty"));
            }
        }
        Ok(())
    }
}

// Raw shape used only to turn an unknown language code into a readable error
// instead of serde's enum-variant message.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    language: String,
    idiom: String,
    gold_translation: String,
    gold_explanation: String,
    #[serde(default)]
    usage_example: Option<String>,
    #[serde(default)]
    cultural_note: Option<String>,
    #[serde(default)]
    image_path: Option<String>,
}

/// Parses corpus text already in memory. Line numbers in errors are 1-based.
pub fn parse_corpus_str(input: &str) -> Result<Vec<IdiomRecord>> {
    parse_lines(input.lines().map(|l| Ok(l.to_owned())), Path::new("<memory>"))
}

pub fn parse_corpus(path: impl AsRef<Path>) -> Result<Vec<IdiomRecord>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_lines(BufReader::new(file).lines(), path)
}

fn parse_lines<I>(lines: I, path: &Path) -> Result<Vec<IdiomRecord>>
where
    I: Iterator<Item = std::io::Result<String>>,
{
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_owned(),
            source,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(trimmed).map_err(|e| CorpusError::MalformedRecord {
                line: line_no,
                reason: e.to_string(),
            })?;
        let language = raw
            .language
            .parse()
            .map_err(|reason| CorpusError::MalformedRecord {
                line: line_no,
                reason,
            })?;
        let record = IdiomRecord {
            id: raw.id,
            language,
            idiom: raw.idiom,
            gold_translation: raw.gold_translation,
            gold_explanation: raw.gold_explanation,
            usage_example: raw.usage_example,
            cultural_note: raw.cultural_note,
            image_path: raw.image_path,
        };
        record
            .check()
            .map_err(|reason| CorpusError::MalformedRecord {
                line: line_no,
                reason,
            })?;
        if !seen.insert(record.id.clone()) {
            return Err(CorpusError::DuplicateId(record.id));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn serialize_corpus(records: &[IdiomRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_corpus(path: impl AsRef<Path>, records: &[IdiomRecord]) -> Result<()> {
    let path = path.as_ref();
    let io = |source| CorpusError::Io {
        path: path.to_owned(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(serialize_corpus(records).as_bytes()).map_err(io)?;
    Ok(())
}

/// Parameters for [`split_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

impl SplitSpec {
    /// `floor(n * train_fraction)`, robust to the fraction being one ulp
    /// below its decimal value.
    pub fn train_len(&self, n: usize) -> usize {
        let exact = n as f64 * self.train_fraction;
        let k = (exact + 1e-9 * exact.max(1.0)).floor() as usize;
        k.min(n)
    }
}

/// Shuffles deterministically and cuts at `floor(N * train_fraction)`.
///
/// The shuffle is a Fisher–Yates pass from the last index down to 1, drawing
/// `j = next_u64() % (i + 1)` from ChaCha8 seeded with
/// `ChaCha8Rng::seed_from_u64(seed)`.
pub fn split_dataset(
    records: &[IdiomRecord],
    spec: SplitSpec,
) -> Result<(Vec<IdiomRecord>, Vec<IdiomRecord>)> {
    if records.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(spec.train_fraction));
    }
    let order = shuffled_indices(records.len(), spec.seed);
    let cut = spec.train_len(records.len());
    let train = order[..cut].iter().map(|&i| records[i].clone()).collect();
    let test = order[cut..].iter().map(|&i| records[i].clone()).collect();
    Ok((train, test))
}

fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        idx.swap(i, j);
    }
    idx
}

/// Information Persistence Rating: which of the five aspects an annotated
/// explanation retained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IprAssessment {
    pub literal_translation: bool,
    pub contextual_interpretation: bool,
    pub usage_scenario: bool,
    pub cultural_significance: bool,
    pub coherence: bool,
}

impl IprAssessment {
    pub fn flags(&self) -> [bool; 5] {
        [
            self.literal_translation,
            self.contextual_interpretation,
            self.usage_scenario,
            self.cultural_significance,
            self.coherence,
        ]
    }
}

/// Number of retained aspects, 0..=5.
pub fn ipr_score(a: &IprAssessment) -> u8 {
    a.flags().iter().filter(|&&f| f).count() as u8
}

/// Cohen's kappa over arbitrary categorical labels.
///
/// Computed in integer form, `(n·agree − Σ cₐ·c_b) / (n² − Σ cₐ·c_b)`, which
/// is exact and symmetric. When chance agreement is 1 (a single shared label)
/// the result is 1.0.
pub fn cohens_kappa<T: Eq + Hash>(labels_a: &[T], labels_b: &[T]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(CorpusError::LengthMismatch {
            left: labels_a.len(),
            right: labels_b.len(),
        });
    }
    if labels_a.is_empty() {
        return Err(CorpusError::EmptyInput);
    }
    let n = labels_a.len() as u128;
    let agree = labels_a
        .iter()
        .zip(labels_b)
        .filter(|(a, b)| a == b)
        .count() as u128;

    let mut counts: HashMap<&T, (u128, u128)> = HashMap::new();
    for a in labels_a {
        counts.entry(a).or_default().0 += 1;
    }
    for b in labels_b {
        counts.entry(b).or_default().1 += 1;
    }
    let chance: u128 = counts.values().map(|(ca, cb)| ca * cb).sum();
    let denom = n * n - chance;
    if denom == 0 {
        return Ok(1.0);
    }
    let numer = (n * agree) as f64 - chance as f64;
    Ok(numer / denom as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(id: &str) -> IdiomRecord {
        IdiomRecord {
            id: id.to_owned(),
            language: Language::Hi,
            idiom: format!("idiom {id}"),
            gold_translation: "literal".to_owned(),
            gold_explanation: "figurative".to_owned(),
            usage_example: None,
            cultural_note: None,
            image_path: None,
        }
    }

    #[test]
    fn parses_hindi_record() {
        let line = r#"{"id":"h001","language":"hi","idiom":"आसमान से गिरे, खजूर में अटके","gold_translation":"fallen from the sky, stuck in a date palm","gold_explanation":"escaping one difficulty only to become trapped in another"}"#;
        let recs = parse_corpus_str(line).unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!(r.id, "h001");
        assert_eq!(r.language, Language::Hi);
        assert_eq!(r.idiom, "आसमान से गिरे, खजूर में अटके");
        assert_eq!(
            r.gold_explanation,
            "escaping one difficulty only to become trapped in another"
        );
        assert_eq!(r.usage_example, None);
    }

    #[test]
    fn empty_input_is_empty_corpus() {
        assert!(parse_corpus_str("").unwrap().is_empty());
        assert!(parse_corpus_str("\n  \n").unwrap().is_empty());
    }

    #[test]
    fn duplicate_id_rejected() {
        let text = serialize_corpus(&[record("a"), record("a")]);
        match parse_corpus_str(&text) {
            Err(CorpusError::DuplicateId(id)) => assert_eq!(id, "a"),
            other => panic!("expected DuplicateId, got {other:?}"),
        }
    }

    #[test]
    fn malformed_lines_report_line_number() {
        let good = serialize_corpus(&[record("a")]);
        let text = format!("{good}\n{{not json\n");
        match parse_corpus_str(&text) {
            Err(CorpusError::MalformedRecord { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let bad_lang = r#"{"id":"x","language":"en","idiom":"i","gold_translation":"t","gold_explanation":"e"}"#;
        assert!(matches!(
            parse_corpus_str(bad_lang),
            Err(CorpusError::MalformedRecord { line: 1, .. })
        ));
        let empty_field = r#"{"id":"x","language":"th","idiom":" ","gold_translation":"t","gold_explanation":"e"}"#;
        assert!(matches!(
            parse_corpus_str(empty_field),
            Err(CorpusError::MalformedRecord { .. })
        ));
        let unknown = r#"{"id":"x","language":"th","idiom":"i","gold_translation":"t","gold_explanation":"e","extra":1}"#;
        assert!(parse_corpus_str(unknown).is_err());
    }

    #[test]
    fn split_ten_records() {
        let recs: Vec<_> = (0..10).map(|i| record(&i.to_string())).collect();
        let spec = SplitSpec {
            train_fraction: 0.8,
            seed: 7,
        };
        let (train, test) = split_dataset(&recs, spec).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let mut ids: Vec<_> = train.iter().chain(&test).map(|r| r.id.clone()).collect();
        ids.sort();
        let mut expected: Vec<_> = recs.iter().map(|r| r.id.clone()).collect();
        expected.sort();
        assert_eq!(ids, expected);
        assert_eq!(split_dataset(&recs, spec).unwrap(), (train, test));
    }

    #[test]
    fn split_guards() {
        assert!(matches!(
            split_dataset(&[], SplitSpec::default()),
            Err(CorpusError::EmptyCorpus)
        ));
        for f in [0.0, 1.0, -0.1, f64::NAN] {
            let spec = SplitSpec {
                train_fraction: f,
                seed: 0,
            };
            assert!(matches!(
                split_dataset(&[record("a")], spec),
                Err(CorpusError::InvalidFraction(_))
            ));
        }
    }

    #[test]
    fn split_default_fraction() {
        assert_eq!(SplitSpec::default().train_fraction, 0.8);
        assert_eq!(SplitSpec::default().train_len(3533), 2826);
    }

    #[test]
    fn ipr_examples() {
        let all = IprAssessment {
            literal_translation: true,
            contextual_interpretation: true,
            usage_scenario: true,
            cultural_significance: true,
            coherence: true,
        };
        assert_eq!(ipr_score(&all), 5);
        assert_eq!(ipr_score(&IprAssessment::default()), 0);
        let three = IprAssessment {
            usage_scenario: false,
            coherence: false,
            ..all
        };
        assert_eq!(ipr_score(&three), 3);
    }

    #[test]
    fn ipr_all_combinations() {
        for mask in 0u8..32 {
            let bit = |i: u8| mask & (1 << i) != 0;
            let a = IprAssessment {
                literal_translation: bit(0),
                contextual_interpretation: bit(1),
                usage_scenario: bit(2),
                cultural_significance: bit(3),
                coherence: bit(4),
            };
            assert_eq!(ipr_score(&a), mask.count_ones() as u8);
        }
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(cohens_kappa(&[1, 2, 3, 1], &[1, 2, 3, 1]).unwrap(), 1.0);
        assert_eq!(cohens_kappa(&[1, 1, 0, 0], &[1, 0, 0, 1]).unwrap(), 0.0);
        assert_eq!(cohens_kappa(&[1, 1, 1, 0], &[1, 1, 0, 0]).unwrap(), 0.5);
    }

    #[test]
    fn kappa_single_label_full_agreement() {
        assert_eq!(cohens_kappa(&["x", "x", "x"], &["x", "x", "x"]).unwrap(), 1.0);
    }

    #[test]
    fn kappa_guards() {
        assert!(matches!(
            cohens_kappa(&[1, 2], &[1]),
            Err(CorpusError::LengthMismatch { left: 2, right: 1 })
        ));
        assert!(matches!(
            cohens_kappa::<u8>(&[], &[]),
            Err(CorpusError::EmptyInput)
        ));
    }

    fn arb_record() -> impl Strategy<Value = IdiomRecord> {
        let text = "[a-zA-Z\u{0900}-\u{097F} ,.\"\\\\]{1,20}".prop_filter("nonblank", |s: &String| {
            !s.trim().is_empty()
        });
        (
            text.clone(),
            prop_oneof![Just(Language::Hi), Just(Language::Bn), Just(Language::Th)],
            text.clone(),
            text.clone(),
            text.clone(),
            proptest::option::of(text.clone()),
            proptest::option::of(text.clone()),
            proptest::option::of("[a-z/]{1,12}\\.png"),
        )
            .prop_map(|(id, language, idiom, t, e, u, c, img)| IdiomRecord {
                id,
                language,
                idiom,
                gold_translation: t,
                gold_explanation: e,
                usage_example: u,
                cultural_note: c,
                image_path: img,
            })
    }

    proptest! {
        #[test]
        fn serialize_parse_roundtrip(recs in proptest::collection::vec(arb_record(), 0..8)) {
            let mut seen = HashSet::new();
            let recs: Vec<_> = recs.into_iter().filter(|r| seen.insert(r.id.clone())).collect();
            let parsed = parse_corpus_str(&serialize_corpus(&recs)).unwrap();
            prop_assert_eq!(parsed, recs);
        }

        #[test]
        fn split_sizes(n in 1usize..200, f in 0.01f64..0.99, seed in any::<u64>()) {
            let recs: Vec<_> = (0..n).map(|i| record(&i.to_string())).collect();
            let spec = SplitSpec { train_fraction: f, seed };
            let (train, test) = split_dataset(&recs, spec).unwrap();
            prop_assert_eq!(train.len(), spec.train_len(n));
            prop_assert_eq!(train.len() + test.len(), n);
            let ids: HashSet<_> = train.iter().chain(&test).map(|r| r.id.clone()).collect();
            prop_assert_eq!(ids.len(), n);
        }

        #[test]
        fn kappa_symmetric_and_bounded(pairs in proptest::collection::vec((0u8..4, 0u8..4), 1..40)) {
            let (a, b): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let k1 = cohens_kappa(&a, &b).unwrap();
            let k2 = cohens_kappa(&b, &a).unwrap();
            prop_assert_eq!(k1, k2);
            prop_assert!((-1.0..=1.0).contains(&k1));
        }
    }
}

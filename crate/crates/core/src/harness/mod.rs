//! The two-pass experiment.
//!
//! 1. [`run_baseline`]: plain prompts for every record.
//! 2. [`build_repository`]: archive each baseline failure with its hint.
//! 3. [`run_hide`]: retrieve the nearest archived failure per test idiom and
//!    prompt with its hint.
//! 4. [`evaluate`] and [`report`]: score and tabulate.
//!
//! Generation fans out across `max_in_flight` worker threads; results always
//! come back in input order. Backend failures are recorded on the item and
//! the run continues.

pub mod manifest;
pub mod predictions;
pub mod report;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{info, warn};

use crate::corpus::{CorpusError, IdiomRecord};
use crate::efrepo::{ErrorQuintuple, RepoError, Repository};
use crate::encoder::{Encoder, EncoderError};
use crate::hinting::{build_prompt, Discriminator, HintError, HintGenerator};
use crate::metrics::{evaluate_pair, MetricError, MetricOptions, MetricReport, TokenLogProb};
use crate::modelclient::{ModelClient, ModelError};
use crate::text::tokenize;

pub use manifest::{CorpusPaths, RunManifest};
pub use predictions::{PassKind, PredictionItem, PredictionSet};
pub use report::{render as render_report, write_report, ReportFormat};

/// Stable artifact names under a run's output directory.
pub mod files {
    pub const BASELINE_TRAIN: &str = "baseline_train.jsonl";
    pub const BASELINE_TEST: &str = "baseline_test.jsonl";
    pub const REPOSITORY: &str = "repository.jsonl";
    pub const HIDE_TEST: &str = "hide_test.jsonl";
    pub const METRICS_BASELINE: &str = "metrics_baseline.json";
    pub const METRICS_HIDE: &str = "metrics_hide.json";
    pub const TRAIN_SPLIT: &str = "train.jsonl";
    pub const TEST_SPLIT: &str = "test.jsonl";
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("prediction for unknown idiom id {0:?}")]
    JoinFailure(String),
    #[error("nothing to evaluate")]
    EmptyInput,
    #[error("repository is empty")]
    EmptyRepository,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Format {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}: unsupported format version {found}")]
    FormatVersionMismatch { path: PathBuf, found: u32 },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Repo(#[from] RepoError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Hint(#[from] HintError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

/// Maps `f` over `items` on up to `workers` threads, preserving order.
pub fn ordered_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .unwrap_or_else(|e| e.into_inner())
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

fn generate_item(client: &ModelClient, idiom_id: &str, prompt: String) -> PredictionItem {
    match client.generate(&prompt) {
        Ok(out) => PredictionItem {
            idiom_id: idiom_id.to_owned(),
            prompt,
            translation: out.translation,
            explanation: out.explanation,
            retrieved_entry_index: None,
            retrieval_similarity: None,
            hint_injected: false,
            attempts: out.attempts,
            failure: None,
        },
        Err(e) => {
            warn!(idiom_id, error = %e, "generation failed");
            PredictionItem::failed(idiom_id, prompt, e.to_string())
        }
    }
}

/// Hint-free pass over `records`.
pub fn run_baseline(run_id: &str, records: &[IdiomRecord], client: &ModelClient) -> PredictionSet {
    let items = ordered_map(records, client.config().max_in_flight, |r| {
        generate_item(client, &r.id, build_prompt(&r.idiom, None))
    });
    info!(
        run_id,
        n = items.len(),
        failed = items.iter().filter(|i| i.is_failure()).count(),
        "baseline pass done"
    );
    PredictionSet {
        run_id: run_id.to_owned(),
        pass: PassKind::Baseline,
        items,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildSummary {
    pub considered: usize,
    pub flagged: usize,
    /// Items whose generation had failed.
    pub skipped_failures: usize,
    /// Items whose explanation came back empty.
    pub skipped_empty: usize,
}

/// Archives every flagged prediction. Sequential; entry order follows
/// prediction order.
pub fn build_repository(
    predictions: &PredictionSet,
    gold: &[IdiomRecord],
    encoder: &dyn Encoder,
    discriminator: &Discriminator,
    hinter: &dyn HintGenerator,
) -> Result<(Repository, BuildSummary)> {
    let by_id: HashMap<&str, &IdiomRecord> = gold.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut repo = Repository::for_encoder(encoder);
    let mut summary = BuildSummary::default();
    for item in &predictions.items {
        let record = by_id
            .get(item.idiom_id.as_str())
            .ok_or_else(|| HarnessError::JoinFailure(item.idiom_id.clone()))?;
        summary.considered += 1;
        if item.is_failure() {
            summary.skipped_failures += 1;
            continue;
        }
        if item.explanation.trim().is_empty() {
            summary.skipped_empty += 1;
            continue;
        }
        let verdict = discriminator.judge(&item.explanation, &record.gold_explanation)?;
        if !verdict.is_error {
            continue;
        }
        let hint = hinter.generate_hint(
            &item.explanation,
            &record.gold_explanation,
            &record.idiom,
            &record.gold_translation,
        )?;
        let quintuple = ErrorQuintuple {
            idiom_id: record.id.clone(),
            idiom: record.idiom.clone(),
            pred_translation: item.translation.clone(),
            pred_explanation: item.explanation.clone(),
            gold_translation: record.gold_translation.clone(),
            gold_explanation: record.gold_explanation.clone(),
        };
        repo.ingest(&quintuple, hint, encoder.encode(&record.idiom)?)?;
        summary.flagged += 1;
    }
    info!(entries = repo.len(), ?summary, "repository built");
    Ok((repo, summary))
}

/// Retrieval-augmented pass. A hint is injected when the nearest entry's
/// similarity is at least `similarity_floor`.
pub fn run_hide(
    run_id: &str,
    records: &[IdiomRecord],
    repo: &Repository,
    encoder: &dyn Encoder,
    client: &ModelClient,
    similarity_floor: f64,
) -> Result<PredictionSet> {
    if repo.is_empty() {
        return Err(HarnessError::EmptyRepository);
    }
    repo.check_encoder(encoder)?;
    let items = ordered_map(records, client.config().max_in_flight, |r| {
        let hit = match encoder
            .encode(&r.idiom)
            .map_err(RepoError::from)
            .and_then(|z| repo.retrieve_nearest(&z))
        {
            Ok(hit) => hit,
            Err(e) => {
                return PredictionItem::failed(&r.id, build_prompt(&r.idiom, None), e.to_string())
            }
        };
        let inject = hit.similarity >= similarity_floor;
        let prompt = build_prompt(&r.idiom, inject.then_some(&hit.entry.hint));
        let mut item = generate_item(client, &r.id, prompt);
        item.retrieved_entry_index = Some(hit.entry.entry_index);
        item.retrieval_similarity = Some(hit.similarity);
        item.hint_injected = inject;
        item
    });
    info!(
        run_id,
        n = items.len(),
        injected = items.iter().filter(|i| i.hint_injected).count(),
        "hide pass done"
    );
    Ok(PredictionSet {
        run_id: run_id.to_owned(),
        pass: PassKind::Hide,
        items,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordScore {
    pub idiom_id: String,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedRecord {
    pub idiom_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub run_id: String,
    pub pass: PassKind,
    pub corpus: MetricReport,
    pub exact_match: f64,
    pub scored: usize,
    pub per_record: Vec<RecordScore>,
    pub skipped: Vec<SkippedRecord>,
}

impl Evaluation {
    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("evaluation serializes");
        std::fs::write(path, text).map_err(|source| HarnessError::Io {
            path: path.to_owned(),
            source,
        })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_owned(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Format {
            path: path.to_owned(),
            line: e.line(),
            reason: e.to_string(),
        })
    }
}

/// Fraction of items whose normalized explanation equals the gold one.
/// Failed items count as misses.
pub fn exact_match_rate(predictions: &PredictionSet, gold: &[IdiomRecord]) -> Result<f64> {
    if predictions.items.is_empty() {
        return Err(HarnessError::EmptyInput);
    }
    let by_id: HashMap<&str, &IdiomRecord> = gold.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut hits = 0usize;
    for item in &predictions.items {
        let rec = by_id
            .get(item.idiom_id.as_str())
            .ok_or_else(|| HarnessError::JoinFailure(item.idiom_id.clone()))?;
        if !item.is_failure() && tokenize(&item.explanation) == tokenize(&rec.gold_explanation) {
            hits += 1;
        }
    }
    Ok(hits as f64 / predictions.items.len() as f64)
}

/// Scores every prediction's explanation against its gold explanation.
///
/// Failed or unscorable items (e.g. no tokens) are listed in `skipped` and
/// excluded from the corpus means.
pub fn evaluate(
    predictions: &PredictionSet,
    gold: &[IdiomRecord],
    encoder: &dyn Encoder,
    lm: &(dyn TokenLogProb + Sync),
    opts: MetricOptions,
    workers: usize,
) -> Result<Evaluation> {
    if predictions.items.is_empty() {
        return Err(HarnessError::EmptyInput);
    }
    let by_id: HashMap<&str, &IdiomRecord> = gold.iter().map(|r| (r.id.as_str(), r)).collect();
    let pairs = predictions
        .items
        .iter()
        .map(|item| {
            by_id
                .get(item.idiom_id.as_str())
                .map(|r| (item, *r))
                .ok_or_else(|| HarnessError::JoinFailure(item.idiom_id.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let scored = ordered_map(&pairs, workers, |(item, rec)| {
        if let Some(f) = &item.failure {
            return Err(format!("generation failed: {f}"));
        }
        evaluate_pair(&item.explanation, &rec.gold_explanation, encoder, lm, opts)
            .map_err(|e| e.to_string())
    });
    let mut per_record = Vec::new();
    let mut skipped = Vec::new();
    for ((item, _), result) in pairs.iter().zip(scored) {
        match result {
            Ok(report) => per_record.push(RecordScore {
                idiom_id: item.idiom_id.clone(),
                report,
            }),
            Err(reason) => skipped.push(SkippedRecord {
                idiom_id: item.idiom_id.clone(),
                reason,
            }),
        }
    }
    let reports: Vec<MetricReport> = per_record.iter().map(|r| r.report).collect();
    let corpus = MetricReport::mean(&reports).ok_or(HarnessError::EmptyInput)?;
    Ok(Evaluation {
        run_id: predictions.run_id.clone(),
        pass: predictions.pass,
        corpus,
        exact_match: exact_match_rate(predictions, gold)?,
        scored: per_record.len(),
        per_record,
        skipped,
    })
}

/// Renders named corpus rows in the requested format.
pub fn report(rows: &[(String, MetricReport)], format: ReportFormat) -> String {
    render_report(rows, format)
}

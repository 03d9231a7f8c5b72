//! `hide`: drives the baseline → repository → hinted-pass experiment.
//!
//! Every stage reads the run manifest given by `--config` and writes under
//! the manifest's `out_dir` (or `--out-dir` when given), so stages can be
//! rerun or resumed independently.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use tracing::info;

use hide_core::corpus::{parse_corpus, split_dataset, write_corpus, IdiomRecord, SplitSpec};
use hide_core::efrepo::Repository;
use hide_core::encoder::Encoder;
use hide_core::harness::report::{render, write_report, ReportFormat};
use hide_core::harness::{
    build_repository, evaluate, files, run_baseline, run_hide, Evaluation, PassKind,
    PredictionSet, RunManifest,
};
use hide_core::hinting::{CritiqueHinter, Discriminator, HintGenerator, RuleBasedHinter};
use hide_core::metrics::UnigramLm;
use hide_core::modelclient::ModelClient;
use hide_core::text::tokenize;

#[derive(Parser)]
#[command(name = "hide", version, about = "Error-feedback hinting for idiom explanation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run manifest (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the manifest's `out_dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Half {
    Train,
    Test,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum HinterKind {
    Rules,
    Critique,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Markdown,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a corpus file and print per-language counts.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Only validate; write nothing.
        #[arg(long)]
        validate: bool,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Writes a normalized `corpus.jsonl` here unless `--validate`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Deterministic train/test split.
    Split {
        #[arg(long)]
        input: PathBuf,
        /// Defaults to the manifest's value, else 0.8.
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_train: PathBuf,
        #[arg(long)]
        out_test: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Hint-free generation over the train and/or test corpus.
    RunBaseline {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "both")]
        half: Half,
    },
    /// Archive flagged baseline-train predictions with their hints.
    BuildRepo {
        #[command(flatten)]
        common: Common,
        /// Defaults to `<out>/baseline_train.jsonl`.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Defaults to the manifest's train corpus.
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "rules")]
        hinter: HinterKind,
    },
    /// Hinted generation over the test corpus.
    RunHide {
        #[command(flatten)]
        common: Common,
        /// Defaults to `<out>/repository.jsonl`.
        #[arg(long)]
        repo: Option<PathBuf>,
        /// Overrides the manifest's similarity floor.
        #[arg(long)]
        floor: Option<f64>,
    },
    /// Score the test-pass predictions against gold.
    Evaluate {
        #[command(flatten)]
        common: Common,
    },
    /// Tabulate the saved metric files.
    Report {
        #[command(flatten)]
        common: Common,
        /// Also print this rendering to stdout.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Ingest {
            input,
            validate,
            config,
            out_dir,
        } => ingest(&input, validate, config.as_deref(), out_dir),
        Command::Split {
            input,
            fraction,
            seed,
            out_train,
            out_test,
            config,
        } => split(&input, fraction, seed, &out_train, &out_test, config.as_deref()),
        Command::RunBaseline { common, half } => baseline(&common, half),
        Command::BuildRepo {
            common,
            predictions,
            gold,
            hinter,
        } => build_repo(&common, predictions, gold, hinter),
        Command::RunHide { common, repo, floor } => hide(&common, repo, floor),
        Command::Evaluate { common } => eval(&common),
        Command::Report { common, format } => report(&common, format),
    }
}

fn load_manifest(common: &Common) -> Result<RunManifest> {
    let mut m = RunManifest::load(&common.config)
        .with_context(|| format!("loading {}", common.config.display()))?;
    if let Some(dir) = &common.out_dir {
        m.out_dir = dir.clone();
    }
    std::fs::create_dir_all(&m.out_dir)
        .with_context(|| format!("creating {}", m.out_dir.display()))?;
    Ok(m)
}

fn corpus_half(m: &RunManifest, train: bool) -> Result<Vec<IdiomRecord>> {
    let (path, key) = if train {
        (&m.corpus.train, "corpus.train")
    } else {
        (&m.corpus.test, "corpus.test")
    };
    let Some(path) = path else {
        bail!("manifest has no `{key}` path");
    };
    parse_corpus(path).with_context(|| format!("reading {}", path.display()))
}

fn ingest(input: &Path, validate: bool, config: Option<&Path>, out_dir: Option<PathBuf>) -> Result<()> {
    let records = parse_corpus(input).with_context(|| format!("reading {}", input.display()))?;
    let mut by_lang: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &records {
        *by_lang.entry(r.language.code()).or_default() += 1;
    }
    println!("{} records", records.len());
    for (lang, n) in by_lang {
        println!("  {lang}: {n}");
    }
    if validate {
        return Ok(());
    }
    let dir = match (out_dir, config) {
        (Some(d), _) => Some(d),
        (None, Some(c)) => Some(RunManifest::load(c)?.out_dir),
        (None, None) => None,
    };
    if let Some(dir) = dir {
        std::fs::create_dir_all(&dir)?;
        let path = dir.join("corpus.jsonl");
        write_corpus(&path, &records)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn split(
    input: &Path,
    fraction: Option<f64>,
    seed: Option<u64>,
    out_train: &Path,
    out_test: &Path,
    config: Option<&Path>,
) -> Result<()> {
    let base = match config {
        Some(c) => RunManifest::load(c)?.split,
        None => SplitSpec::default(),
    };
    let spec = SplitSpec {
        train_fraction: fraction.unwrap_or(base.train_fraction),
        seed: seed.unwrap_or(base.seed),
    };
    let records = parse_corpus(input).with_context(|| format!("reading {}", input.display()))?;
    let (train, test) = split_dataset(&records, spec)?;
    write_corpus(out_train, &train)?;
    write_corpus(out_test, &test)?;
    println!("train {} / test {}", train.len(), test.len());
    Ok(())
}

fn baseline(common: &Common, half: Half) -> Result<()> {
    let mut m = load_manifest(common)?;
    let client = ModelClient::from_config(m.generation.clone())?;
    let halves: &[(bool, &str)] = match half {
        Half::Train => &[(true, files::BASELINE_TRAIN)],
        Half::Test => &[(false, files::BASELINE_TEST)],
        Half::Both => &[(true, files::BASELINE_TRAIN), (false, files::BASELINE_TEST)],
    };
    for &(train, file) in halves {
        let records = corpus_half(&m, train)?;
        let set = run_baseline(&m.run_id, &records, &client);
        let path = m.out_path(file);
        set.save(&path)?;
        println!(
            "{}: {} predictions, {} failed",
            path.display(),
            set.items.len(),
            set.failures().count()
        );
    }
    m.persist()?;
    Ok(())
}

fn build_repo(
    common: &Common,
    predictions: Option<PathBuf>,
    gold: Option<PathBuf>,
    hinter: HinterKind,
) -> Result<()> {
    let mut m = load_manifest(common)?;
    let preds = PredictionSet::load(predictions.unwrap_or_else(|| m.out_path(files::BASELINE_TRAIN)))?;
    let gold = match gold {
        Some(p) => parse_corpus(&p)?,
        None => corpus_half(&m, true)?,
    };
    let encoder = m.encoder.build()?;
    let disc = Discriminator::new(m.discriminator)?.with_encoder(encoder.clone());
    let rules = RuleBasedHinter::new(disc.clone());
    let hinter: Box<dyn HintGenerator> = match hinter {
        HinterKind::Rules => Box::new(rules),
        HinterKind::Critique => Box::new(CritiqueHinter::new(
            Arc::new(ModelClient::from_config(m.generation.clone())?),
            rules,
        )),
    };
    let (repo, summary) = build_repository(&preds, &gold, encoder.as_ref(), &disc, hinter.as_ref())?;
    let path = m.out_path(files::REPOSITORY);
    repo.save(&path)?;
    println!(
        "{}: {} entries from {} predictions ({} failed, {} empty skipped)",
        path.display(),
        repo.len(),
        summary.considered,
        summary.skipped_failures,
        summary.skipped_empty
    );
    m.persist()?;
    Ok(())
}

fn hide(common: &Common, repo: Option<PathBuf>, floor: Option<f64>) -> Result<()> {
    let mut m = load_manifest(common)?;
    if let Some(f) = floor {
        m.similarity_floor = f;
    }
    let repo = Repository::load(repo.unwrap_or_else(|| m.out_path(files::REPOSITORY)))?;
    let encoder = m.encoder.build()?;
    let client = ModelClient::from_config(m.generation.clone())?;
    let records = corpus_half(&m, false)?;
    let set = run_hide(&m.run_id, &records, &repo, encoder.as_ref(), &client, m.similarity_floor)?;
    let path = m.out_path(files::HIDE_TEST);
    set.save(&path)?;
    println!(
        "{}: {} predictions, {} hinted, {} failed",
        path.display(),
        set.items.len(),
        set.items.iter().filter(|i| i.hint_injected).count(),
        set.failures().count()
    );
    m.persist()?;
    Ok(())
}

/// Perplexity model: add-one unigram fit on the gold explanations of the
/// train half, falling back to the test half.
fn reference_lm(m: &RunManifest, test: &[IdiomRecord]) -> Result<UnigramLm> {
    let source = match &m.corpus.train {
        Some(p) if p.exists() => parse_corpus(p)?,
        _ => test.to_vec(),
    };
    let seqs: Vec<_> = source.iter().map(|r| tokenize(&r.gold_explanation)).collect();
    Ok(UnigramLm::fit(&seqs))
}

fn eval(common: &Common) -> Result<()> {
    let mut m = load_manifest(common)?;
    let gold = corpus_half(&m, false)?;
    let encoder: Arc<dyn Encoder> = m.encoder.build()?;
    let lm = reference_lm(&m, &gold)?;
    let workers = m.generation.max_in_flight;
    let mut any = false;
    for (input, output) in [
        (files::BASELINE_TEST, files::METRICS_BASELINE),
        (files::HIDE_TEST, files::METRICS_HIDE),
    ] {
        let path = m.out_path(input);
        if !path.exists() {
            continue;
        }
        any = true;
        let preds = PredictionSet::load(&path)?;
        let ev = evaluate(&preds, &gold, encoder.as_ref(), &lm, m.metrics, workers)?;
        ev.save(m.out_path(output))?;
        info!(pass = preds.pass.name(), scored = ev.scored, "evaluated");
        println!(
            "{}: {} scored, {} skipped, exact match {:.4}",
            preds.pass.name(),
            ev.scored,
            ev.skipped.len(),
            ev.exact_match
        );
    }
    if !any {
        bail!("no prediction files under {}", m.out_dir.display());
    }
    m.persist()?;
    Ok(())
}

fn report(common: &Common, format: Option<Format>) -> Result<()> {
    let m = load_manifest(common)?;
    let mut rows = Vec::new();
    for file in [files::METRICS_BASELINE, files::METRICS_HIDE] {
        let path = m.out_path(file);
        if path.exists() {
            let ev = Evaluation::load(&path)?;
            let label = match ev.pass {
                PassKind::Baseline => format!("{} baseline", m.run_id),
                PassKind::Hide => format!("{} +HIDE", m.run_id),
            };
            rows.push((label, ev.corpus));
        }
    }
    if rows.is_empty() {
        bail!("no metric files under {}; run `evaluate` first", m.out_dir.display());
    }
    write_report(&m.out_dir, &rows)?;
    match format {
        Some(Format::Csv) => print!("{}", render(&rows, ReportFormat::Delimited)),
        Some(Format::Markdown) => print!("{}", render(&rows, ReportFormat::Markdown)),
        None => println!("wrote report to {}", m.out_dir.display()),
    }
    Ok(())
}

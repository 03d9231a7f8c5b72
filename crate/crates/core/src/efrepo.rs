//! The error-feedback repository: an append-only archive of past failures,
//! each keyed by the embedding of its idiom, queried by exact cosine search.
//!
//! # File format (version 1)
//!
//! Line-delimited JSON. The first line is a header:
//!
//! ```json
//! {"format":"hide-efrepo","version":1,"dim":256,"encoder_fingerprint":"…","entry_count":2}
//! ```
//!
//! followed by one object per entry, in index order:
//!
//! ```json
//! {"entry_index":0,"idiom_id":"h001","embedding_f64le":"<hex>","hint":{…},
//!  "pred_translation":"…","pred_explanation":"…"}
//! ```
//!
//! `embedding_f64le` is the concatenation of each component as a
//! little-endian IEEE-754 binary64, hex encoded, so loads are bit-exact.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::{cosine_similarity, Embedding, Encoder, EncoderError};
use crate::hinting::Hint;

pub const FORMAT_NAME: &str = "hide-efrepo";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RepoError {
    #[error("dimension mismatch: repository has {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("hint text is empty")]
    EmptyHint,
    #[error("quintuple field `{0}` is empty")]
    EmptyField(&'static str),
    #[error("repository is empty")]
    EmptyRepository,
    #[error("encoder fingerprint {actual} does not match repository fingerprint {expected}")]
    EncoderFingerprintMismatch { expected: String, actual: String },
    #[error("unsupported repository format version {found} (expected {FORMAT_VERSION})")]
    FormatVersionMismatch { found: u32 },
    #[error("corrupt repository file at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Encoder(#[from] EncoderError),
}

pub type Result<T, E = RepoError> = std::result::Result<T, E>;

/// A mishandled idiom: source text, the model's pair, and the gold pair.
///
/// The predicted translation may be empty when the model omitted the
/// translation marker; every other field must be non-blank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorQuintuple {
    pub idiom_id: String,
    pub idiom: String,
    pub pred_translation: String,
    pub pred_explanation: String,
    pub gold_translation: String,
    pub gold_explanation: String,
}

impl ErrorQuintuple {
    fn validate(&self) -> Result<()> {
        let fields = [
            ("idiom_id", &self.idiom_id),
            ("idiom", &self.idiom),
            ("pred_explanation", &self.pred_explanation),
            ("gold_translation", &self.gold_translation),
            ("gold_explanation", &self.gold_explanation),
        ];
        for (name, value) in fields {
            if value.trim().is_empty() {
                return Err(RepoError::EmptyField(name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorEntry {
    pub entry_index: usize,
    pub embedding: Embedding,
    pub hint: Hint,
    pub pred_translation: String,
    pub pred_explanation: String,
    pub idiom_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Repository {
    dim: usize,
    encoder_fingerprint: String,
    entries: Vec<ErrorEntry>,
}

/// One retrieval hit.
#[derive(Debug, Clone, Copy)]
pub struct Retrieved<'a> {
    pub entry: &'a ErrorEntry,
    pub similarity: f64,
}

impl Repository {
    pub fn new(dim: usize, encoder_fingerprint: impl Into<String>) -> Self {
        Repository {
            dim,
            encoder_fingerprint: encoder_fingerprint.into(),
            entries: Vec::new(),
        }
    }

    pub fn for_encoder(encoder: &dyn Encoder) -> Self {
        Repository::new(encoder.dim(), encoder.fingerprint())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn encoder_fingerprint(&self) -> &str {
        &self.encoder_fingerprint
    }

    pub fn entries(&self) -> &[ErrorEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends an entry and returns its index.
    pub fn ingest(&mut self, q: &ErrorQuintuple, hint: Hint, z: Embedding) -> Result<usize> {
        if z.dim() != self.dim {
            return Err(RepoError::DimMismatch {
                expected: self.dim,
                actual: z.dim(),
            });
        }
        if hint.rendered.trim().is_empty() {
            return Err(RepoError::EmptyHint);
        }
        q.validate()?;
        let entry_index = self.entries.len();
        self.entries.push(ErrorEntry {
            entry_index,
            embedding: z,
            hint,
            pred_translation: q.pred_translation.clone(),
            pred_explanation: q.pred_explanation.clone(),
            idiom_id: q.idiom_id.clone(),
        });
        Ok(entry_index)
    }

    pub fn check_encoder(&self, encoder: &dyn Encoder) -> Result<()> {
        let actual = encoder.fingerprint();
        if actual != self.encoder_fingerprint {
            return Err(RepoError::EncoderFingerprintMismatch {
                expected: self.encoder_fingerprint.clone(),
                actual,
            });
        }
        Ok(())
    }

    /// Entry maximizing cosine similarity to `z`; ties go to the lowest index.
    pub fn retrieve_nearest(&self, z: &Embedding) -> Result<Retrieved<'_>> {
        self.retrieve_top_k(z, 1).map(|mut hits| hits.swap_remove(0))
    }

    /// The `k` best entries by descending similarity, ties by ascending index.
    pub fn retrieve_top_k(&self, z: &Embedding, k: usize) -> Result<Vec<Retrieved<'_>>> {
        if self.entries.is_empty() {
            return Err(RepoError::EmptyRepository);
        }
        if z.dim() != self.dim {
            return Err(RepoError::DimMismatch {
                expected: self.dim,
                actual: z.dim(),
            });
        }
        let mut scored = self
            .entries
            .iter()
            .map(|e| {
                cosine_similarity(z, &e.embedding).map(|similarity| Retrieved {
                    entry: e,
                    similarity,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        // Stable sort keeps insertion order among equal similarities.
        scored.sort_by(|a, b| b.similarity.total_cmp(&a.similarity));
        scored.truncate(k.max(1));
        Ok(scored)
    }

    /// Encodes `text`, checks the encoder fingerprint, and retrieves.
    pub fn query(&self, encoder: &dyn Encoder, text: &str) -> Result<Retrieved<'_>> {
        self.check_encoder(encoder)?;
        let z = encoder.encode(text)?;
        self.retrieve_nearest(&z)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |source| RepoError::Io {
            path: path.to_owned(),
            source,
        };
        let file = fs::File::create(path).map_err(io)?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|source| RepoError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::read_from(file, path)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let header = Header {
            format: FORMAT_NAME.to_owned(),
            version: FORMAT_VERSION,
            dim: self.dim,
            encoder_fingerprint: self.encoder_fingerprint.clone(),
            entry_count: self.entries.len(),
        };
        serde_json::to_writer(&mut *w, &header)?;
        w.write_all(b"\n")?;
        for e in &self.entries {
            let rec = EntryRecord {
                entry_index: e.entry_index,
                idiom_id: e.idiom_id.clone(),
                embedding_f64le: encode_f64le(e.embedding.values()),
                hint: e.hint.clone(),
                pred_translation: e.pred_translation.clone(),
                pred_explanation: e.pred_explanation.clone(),
            };
            serde_json::to_writer(&mut *w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(reader: R, path: &Path) -> Result<Self> {
        let corrupt = |line: usize, reason: String| RepoError::Corrupt { line, reason };
        let mut lines = BufReader::new(reader).lines();
        let header_line = lines
            .next()
            .ok_or_else(|| corrupt(1, "missing header".into()))?
            .map_err(|source| RepoError::Io {
                path: path.to_owned(),
                source,
            })?;
        let header: Header =
            serde_json::from_str(&header_line).map_err(|e| corrupt(1, e.to_string()))?;
        if header.format != FORMAT_NAME {
            return Err(corrupt(1, format!("unknown format {:?}", header.format)));
        }
        if header.version != FORMAT_VERSION {
            return Err(RepoError::FormatVersionMismatch {
                found: header.version,
            });
        }
        let mut repo = Repository::new(header.dim, header.encoder_fingerprint);
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line.map_err(|source| RepoError::Io {
                path: path.to_owned(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: EntryRecord =
                serde_json::from_str(&line).map_err(|e| corrupt(line_no, e.to_string()))?;
            if rec.entry_index != repo.entries.len() {
                return Err(corrupt(
                    line_no,
                    format!(
                        "entry index {} out of sequence (expected {})",
                        rec.entry_index,
                        repo.entries.len()
                    ),
                ));
            }
            let values =
                decode_f64le(&rec.embedding_f64le).map_err(|reason| corrupt(line_no, reason))?;
            let embedding = Embedding::new(values).map_err(|e| corrupt(line_no, e.to_string()))?;
            if embedding.dim() != repo.dim {
                return Err(corrupt(
                    line_no,
                    format!("embedding has dim {}, header says {}", embedding.dim(), repo.dim),
                ));
            }
            repo.entries.push(ErrorEntry {
                entry_index: rec.entry_index,
                embedding,
                hint: rec.hint,
                pred_translation: rec.pred_translation,
                pred_explanation: rec.pred_explanation,
                idiom_id: rec.idiom_id,
            });
        }
        if repo.entries.len() != header.entry_count {
            return Err(corrupt(
                header.entry_count + 1,
                format!(
                    "header declares {} entries, found {}",
                    header.entry_count,
                    repo.entries.len()
                ),
            ));
        }
        Ok(repo)
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    dim: usize,
    encoder_fingerprint: String,
    entry_count: usize,
}

#[derive(Serialize, Deserialize)]
struct EntryRecord {
    entry_index: usize,
    idiom_id: String,
    embedding_f64le: String,
    hint: Hint,
    pred_translation: String,
    pred_explanation: String,
}

fn encode_f64le(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    hex::encode(bytes)
}

fn decode_f64le(s: &str) -> std::result::Result<Vec<f64>, String> {
    let bytes = hex::decode(s).map_err(|e| format!("bad embedding hex: {e}"))?;
    if bytes.len() % 8 != 0 {
        return Err(format!("embedding byte length {} not a multiple of 8", bytes.len()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

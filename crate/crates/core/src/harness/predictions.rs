//! Prediction sets and their on-disk form.
//!
//! Line-delimited JSON: a header
//! `{"format":"hide-predictions","version":1,"run_id":…,"pass":…,"item_count":n}`
//! then one [`PredictionItem`] per line in input order.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;

pub const FORMAT_NAME: &str = "hide-predictions";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassKind {
    Baseline,
    Hide,
}

impl PassKind {
    pub fn name(self) -> &'static str {
        match self {
            PassKind::Baseline => "baseline",
            PassKind::Hide => "hide",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionItem {
    pub idiom_id: String,
    pub prompt: String,
    pub translation: String,
    pub explanation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieved_entry_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieval_similarity: Option<f64>,
    #[serde(default)]
    pub hint_injected: bool,
    #[serde(default)]
    pub attempts: u32,
    /// Set when the item could not be generated; the text fields are then empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl PredictionItem {
    pub fn failed(idiom_id: &str, prompt: String, reason: String) -> Self {
        PredictionItem {
            idiom_id: idiom_id.to_owned(),
            prompt,
            translation: String::new(),
            explanation: String::new(),
            retrieved_entry_index: None,
            retrieval_similarity: None,
            hint_injected: false,
            attempts: 0,
            failure: Some(reason),
        }
    }

    pub fn is_failure(&self) -> bool {
        self.failure.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub run_id: String,
    pub pass: PassKind,
    pub items: Vec<PredictionItem>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    run_id: String,
    pass: PassKind,
    item_count: usize,
}

impl PredictionSet {
    pub fn failures(&self) -> impl Iterator<Item = &PredictionItem> {
        self.items.iter().filter(|i| i.is_failure())
    }

    /// Retrieval fields appear on HIDE items that reached retrieval and on no
    /// baseline item.
    pub fn check_retrieval_fields(&self) -> Result<(), String> {
        for item in &self.items {
            let has = item.retrieved_entry_index.is_some() && item.retrieval_similarity.is_some();
            let partial = item.retrieved_entry_index.is_some() != item.retrieval_similarity.is_some();
            if partial {
                return Err(format!("{}: half-populated retrieval fields", item.idiom_id));
            }
            match self.pass {
                PassKind::Baseline if has || item.hint_injected => {
                    return Err(format!("{}: baseline item carries retrieval data", item.idiom_id))
                }
                PassKind::Hide if !has && !item.is_failure() => {
                    return Err(format!("{}: hide item lacks retrieval data", item.idiom_id))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let header = Header {
            format: FORMAT_NAME.to_owned(),
            version: FORMAT_VERSION,
            run_id: self.run_id.clone(),
            pass: self.pass,
            item_count: self.items.len(),
        };
        serde_json::to_writer(&mut *w, &header)?;
        w.write_all(b"\n")?;
        for item in &self.items {
            serde_json::to_writer(&mut *w, item)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(reader: R, path: &Path) -> Result<Self, HarnessError> {
        let bad = |line: usize, reason: String| HarnessError::Format {
            path: path.to_owned(),
            line,
            reason,
        };
        let io = |source| HarnessError::Io {
            path: path.to_owned(),
            source,
        };
        let mut lines = BufReader::new(reader).lines();
        let first = lines.next().ok_or_else(|| bad(1, "missing header".into()))?.map_err(io)?;
        let header: Header = serde_json::from_str(&first).map_err(|e| bad(1, e.to_string()))?;
        if header.format != FORMAT_NAME {
            return Err(bad(1, format!("unknown format {:?}", header.format)));
        }
        if header.version != FORMAT_VERSION {
            return Err(HarnessError::FormatVersionMismatch {
                path: path.to_owned(),
                found: header.version,
            });
        }
        let mut items = Vec::with_capacity(header.item_count);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            items.push(serde_json::from_str(&line).map_err(|e| bad(i + 2, e.to_string()))?);
        }
        if items.len() != header.item_count {
            return Err(bad(
                items.len() + 2,
                format!("header declares {} items, found {}", header.item_count, items.len()),
            ));
        }
        Ok(PredictionSet {
            run_id: header.run_id,
            pass: header.pass,
            items,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), HarnessError> {
        let path = path.as_ref();
        let io = |source| HarnessError::Io {
            path: path.to_owned(),
            source,
        };
        let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
        self.write_to(&mut w).map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let f = fs::File::open(path).map_err(|source| HarnessError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::read_from(f, path)
    }
}

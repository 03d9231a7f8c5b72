//! Run configuration.
//!
//! A TOML file; relative paths are resolved against the file's directory.
//!
//! ```toml
//! run_id = "demo"
//! out_dir = "runs/demo"
//! similarity_floor = 0.0     # inject a hint only when cos >= floor
//!
//! [corpus]
//! train = "data/train.jsonl"
//! test = "data/test.jsonl"
//!
//! [split]                    # used by `split`
//! train_fraction = 0.8
//! seed = 13
//!
//! [encoder]
//! kind = "feature_hash"
//! dim = 256
//!
//! [discriminator]
//! threshold = 0.5
//! score_kind = "token_f1"
//!
//! [generation]
//! backend = "stub"
//! stub_table = "stub.toml"
//! top_k = 10
//!
//! [metrics]
//! bleu_smoothing = false
//! readability = "reading_ease"
//! ```
//!
//! Auth tokens never live in this file; `token_env` names the environment
//! variable to read instead.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::corpus::SplitSpec;
use crate::encoder::EncoderConfig;
use crate::hinting::DiscriminatorConfig;
use crate::metrics::MetricOptions;
use crate::modelclient::GenerationConfig;

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub run_id: String,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub similarity_floor: f64,
    #[serde(default)]
    pub corpus: CorpusPaths,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub encoder: EncoderConfig,
    #[serde(default)]
    pub discriminator: DiscriminatorConfig,
    #[serde(default)]
    pub generation: GenerationConfig,
    #[serde(default)]
    pub metrics: MetricOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_unix: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub updated_unix: Option<u64>,
}

impl RunManifest {
    pub fn new(run_id: impl Into<String>, out_dir: impl Into<PathBuf>) -> Self {
        RunManifest {
            run_id: run_id.into(),
            out_dir: out_dir.into(),
            similarity_floor: 0.0,
            corpus: CorpusPaths::default(),
            split: SplitSpec::default(),
            encoder: EncoderConfig::default(),
            discriminator: DiscriminatorConfig::default(),
            generation: GenerationConfig::default(),
            metrics: MetricOptions::default(),
            created_unix: None,
            updated_unix: None,
        }
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, HarnessError> {
        let mut m: RunManifest =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        m.resolve_paths(base_dir);
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_owned(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("manifest serializes")
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        for p in [
            &mut self.corpus.full,
            &mut self.corpus.train,
            &mut self.corpus.test,
            &mut self.generation.stub_table,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn out_path(&self, file: &str) -> PathBuf {
        self.out_dir.join(file)
    }

    /// Stamps the manifest and writes it to `out_dir/manifest.toml`.
    pub fn persist(&mut self) -> Result<PathBuf, HarnessError> {
        fs::create_dir_all(&self.out_dir).map_err(|source| HarnessError::Io {
            path: self.out_dir.clone(),
            source,
        })?;
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        self.created_unix.get_or_insert(now);
        self.updated_unix = Some(now);
        let path = self.out_path(MANIFEST_FILE);
        fs::write(&path, self.to_toml()).map_err(|source| HarnessError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }
}

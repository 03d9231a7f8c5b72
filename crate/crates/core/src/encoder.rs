//! Text encoders mapping strings to fixed-dimension vectors.
//!
//! Two interchangeable implementations sit behind [`Encoder`]:
//!
//! * [`FeatureHashEncoder`]: deterministic and offline. Each token from
//!   [`crate::text::tokenize`] is hashed into one of `dim` buckets and adds
//!   ±1 there; the vector is then L2-normalized. Hashing is FNV-1a 64 followed
//!   by the SplitMix64 finalizer:
//!
//!   ```text
//!   h      = mix(fnv1a64(token_utf8))
//!   bucket = h % dim
//!   sign   = if mix(h ^ SIGN_SALT) >> 63 == 0 { +1 } else { -1 }
//!   ```
//!
//! * [`RemoteEncoder`]: POSTs `{"model": .., "input": ..}` to an embedding
//!   service and accepts either `{"embedding": [..]}` or
//!   `{"data": [{"embedding": [..]}]}` back.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gate::InFlightGate;
use crate::http;
use crate::text::tokenize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncoderError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("embedding contains a non-finite value")]
    NonFinite,
    #[error("embedding dimension must be positive")]
    ZeroDim,
    #[error("remote encoder unavailable: {0}")]
    RemoteEncoderUnavailable(String),
}

pub type Result<T, E = EncoderError> = std::result::Result<T, E>;

/// A dense real vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(EncoderError::ZeroDim);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EncoderError::NonFinite);
        }
        Ok(Embedding(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Embedding(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    /// Unit-norm copy; the zero vector stays zero.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        Embedding(self.0.iter().map(|v| v / n).collect())
    }
}

impl TryFrom<Vec<f64>> for Embedding {
    type Error = EncoderError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Embedding::new(v)
    }
}

impl From<Embedding> for Vec<f64> {
    fn from(e: Embedding) -> Self {
        e.0
    }
}

/// `dot(a, b) / (|a| |b|)`, clamped to [-1, 1]. Zero when either side is the
/// zero vector.
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(EncoderError::DimMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub trait Encoder: Send + Sync {
    fn dim(&self) -> usize;

    /// Stable identifier of the configuration; repositories refuse queries
    /// from an encoder whose fingerprint differs from the one they were built
    /// with.
    fn fingerprint(&self) -> String;

    fn encode(&self, text: &str) -> Result<Embedding>;
}

pub const DEFAULT_HASH_DIM: usize = 256;

fn default_hash_dim() -> usize {
    DEFAULT_HASH_DIM
}

fn default_remote_timeout_ms() -> u64 {
    30_000
}

fn default_in_flight() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EncoderConfig {
    FeatureHash {
        #[serde(default = "default_hash_dim")]
        dim: usize,
    },
    Remote {
        endpoint: String,
        model: String,
        dim: usize,
        /// Name of the environment variable holding the bearer token.
        #[serde(default)]
        token_env: Option<String>,
        #[serde(default = "default_remote_timeout_ms")]
        timeout_ms: u64,
        #[serde(default = "default_in_flight")]
        max_in_flight: usize,
    },
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig::FeatureHash {
            dim: DEFAULT_HASH_DIM,
        }
    }
}

impl EncoderConfig {
    pub fn dim(&self) -> usize {
        match self {
            EncoderConfig::FeatureHash { dim } | EncoderConfig::Remote { dim, .. } => *dim,
        }
    }

    /// First 16 hex chars of SHA-256 over the fields that affect vectors.
    pub fn fingerprint(&self) -> String {
        let canonical = match self {
            EncoderConfig::FeatureHash { dim } => format!("feature_hash/v1;dim={dim}"),
            EncoderConfig::Remote {
                endpoint,
                model,
                dim,
                ..
            } => format!("remote/v1;endpoint={endpoint};model={model};dim={dim}"),
        };
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn build(&self) -> Result<Arc<dyn Encoder>> {
        if self.dim() == 0 {
            return Err(EncoderError::ZeroDim);
        }
        Ok(match self {
            EncoderConfig::FeatureHash { dim } => Arc::new(FeatureHashEncoder::new(*dim)?),
            EncoderConfig::Remote { .. } => Arc::new(RemoteEncoder::new(self.clone())?),
        })
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const SIGN_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Bucket index and sign for one token.
pub fn hash_token(token: &str, dim: usize) -> (usize, f64) {
    let h = mix64(fnv1a64(token.as_bytes()));
    let bucket = (h % dim as u64) as usize;
    let sign = if mix64(h ^ SIGN_SALT) >> 63 == 0 {
        1.0
    } else {
        -1.0
    };
    (bucket, sign)
}

#[derive(Debug, Clone)]
pub struct FeatureHashEncoder {
    dim: usize,
    fingerprint: String,
}

impl FeatureHashEncoder {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(EncoderError::ZeroDim);
        }
        Ok(FeatureHashEncoder {
            dim,
            fingerprint: EncoderConfig::FeatureHash { dim }.fingerprint(),
        })
    }
}

impl Encoder for FeatureHashEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }

    fn encode(&self, text: &str) -> Result<Embedding> {
        let mut v = vec![0.0; self.dim];
        for tok in tokenize(text).iter() {
            let (bucket, sign) = hash_token(tok, self.dim);
            v[bucket] += sign;
        }
        Ok(Embedding(v).normalized())
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: &'a str,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EmbedResponse {
    Flat { embedding: Vec<f64> },
    Data { data: Vec<EmbedDatum> },
}

#[derive(Deserialize)]
struct EmbedDatum {
    embedding: Vec<f64>,
}

/// Client for an HTTP embedding service.
pub struct RemoteEncoder {
    endpoint: String,
    model: String,
    dim: usize,
    token: Option<String>,
    agent: ureq::Agent,
    gate: InFlightGate,
    fingerprint: String,
}

impl RemoteEncoder {
    pub fn new(cfg: EncoderConfig) -> Result<Self> {
        let fingerprint = cfg.fingerprint();
        match cfg {
            EncoderConfig::Remote {
                endpoint,
                model,
                dim,
                token_env,
                timeout_ms,
                max_in_flight,
            } => Ok(RemoteEncoder {
                endpoint,
                model,
                dim,
                token: http::token_from_env(token_env.as_deref()),
                agent: http::agent(Duration::from_millis(timeout_ms)),
                gate: InFlightGate::new(max_in_flight),
                fingerprint,
            }),
            EncoderConfig::FeatureHash { .. } => Err(EncoderError::RemoteEncoderUnavailable(
                "not a remote encoder configuration".into(),
            )),
        }
    }
}

impl Encoder for RemoteEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }

    fn encode(&self, text: &str) -> Result<Embedding> {
        let _permit = self.gate.acquire();
        let unavailable = EncoderError::RemoteEncoderUnavailable;
        let body = EmbedRequest {
            model: &self.model,
            input: text,
        };
        let reply = http::post_json(&self.agent, &self.endpoint, self.token.as_deref(), &body)
            .map_err(|e| unavailable(format!("{e:?}")))?;
        if !(200..300).contains(&reply.status) {
            return Err(unavailable(format!("status {}", reply.status)));
        }
        let parsed: EmbedResponse = serde_json::from_str(&reply.body)
            .map_err(|e| unavailable(format!("bad response body: {e}")))?;
        let values = match parsed {
            EmbedResponse::Flat { embedding } => embedding,
            EmbedResponse::Data { mut data } if !data.is_empty() => data.swap_remove(0).embedding,
            EmbedResponse::Data { .. } => return Err(unavailable("empty data array".into())),
        };
        if values.len() != self.dim {
            return Err(EncoderError::DimMismatch {
                expected: self.dim,
                actual: values.len(),
            });
        }
        Embedding::new(values)
    }
}

//! Generation model client: prompt in, (translation, explanation) out.
//!
//! Model output follows a two-part convention:
//!
//! ```text
//! Translation: <literal translation>
//! Explanation: <figurative explanation>
//! ```
//!
//! Either order is accepted. Without an `Explanation:` marker the whole
//! response becomes the explanation and the translation is empty.
//!
//! # HTTP backend
//!
//! `POST {endpoint}` with `{"model", "prompt", "temperature", "top_k",
//! "max_tokens"}`. The reply text is read from the first of `text`,
//! `response`, `output`, `completion`, `choices[0].text`,
//! `choices[0].message.content`. 5xx, 429, timeouts and transport errors are
//! retried with exponential backoff; other 4xx fail at once.
//!
//! # Stub backend
//!
//! A TOML rule table, first match wins:
//!
//! ```toml
//! default = "Translation: ?\nExplanation: no idea"
//!
//! [[rules]]
//! contains_all = ["Idiom: x", "entrapment"]
//! response = "Translation: t\nExplanation: e"
//!
//! [[rules]]
//! exact = "some exact prompt"
//! fail = "unreachable"
//! ```
//!
//! A rule matches when every condition it sets holds (`exact`,
//! `contains_all`, `contains_any`). Responses may use `{prompt}` and `{idiom}`
//! placeholders; `{idiom}` is the text after `Idiom: ` on the first line.

use std::fs;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tracing::{debug, warn};

use crate::gate::InFlightGate;
use crate::hinting::PROMPT_IDIOM_PREFIX;
use crate::http::{self, HttpFailure};

pub const TRANSLATION_MARKER: &str = "Translation:";
pub const EXPLANATION_MARKER: &str = "Explanation:";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("backend unreachable after {attempts} attempt(s): {last}")]
    BackendUnreachable { attempts: u32, last: String },
    #[error("backend timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("backend rejected request with status {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("no stub rule matches the prompt and no default is set")]
    NoStubRule,
    #[error("invalid generation config: {0}")]
    Config(String),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    #[default]
    Stub,
}

fn default_temperature() -> f64 {
    1.0
}
fn default_top_k() -> u32 {
    10
}
fn default_max_tokens() -> u32 {
    256
}
fn default_timeout_ms() -> u64 {
    60_000
}
fn default_max_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    500
}
fn default_in_flight() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    #[serde(default)]
    pub backend: BackendKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model_name: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_top_k")]
    pub top_k: u32,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    /// First retry delay; doubles on each further retry.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    /// Environment variable holding the bearer token.
    #[serde(default)]
    pub token_env: Option<String>,
    #[serde(default)]
    pub stub_table: Option<PathBuf>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            backend: BackendKind::Stub,
            endpoint: None,
            model_name: String::new(),
            temperature: default_temperature(),
            top_k: default_top_k(),
            max_tokens: default_max_tokens(),
            timeout_ms: default_timeout_ms(),
            max_retries: default_max_retries(),
            backoff_ms: default_backoff_ms(),
            max_in_flight: default_in_flight(),
            token_env: None,
            stub_table: None,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_k < 1 {
            return Err(ModelError::Config("top_k must be at least 1".into()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(ModelError::Config(format!(
                "temperature must be a non-negative number, got {}",
                self.temperature
            )));
        }
        if self.backend == BackendKind::Http && self.endpoint.is_none() {
            return Err(ModelError::Config("http backend needs an endpoint".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationResult {
    pub translation: String,
    pub explanation: String,
    pub raw: String,
    pub latency: Duration,
    pub attempts: u32,
}

pub fn render_response(translation: &str, explanation: &str) -> String {
    format!("{TRANSLATION_MARKER} {translation}\n{EXPLANATION_MARKER} {explanation}")
}

/// Splits raw model text into (translation, explanation).
pub fn parse_response(raw: &str) -> Result<(String, String)> {
    let text = raw.trim();
    if text.is_empty() {
        return Err(ModelError::MalformedResponse("empty response".into()));
    }
    let t_pos = text.find(TRANSLATION_MARKER);
    let e_pos = text.find(EXPLANATION_MARKER);
    let after = |pos: usize, marker: &str| pos + marker.len();
    Ok(match (t_pos, e_pos) {
        (_, None) => (String::new(), text.to_owned()),
        (None, Some(e)) => (
            String::new(),
            text[after(e, EXPLANATION_MARKER)..].trim().to_owned(),
        ),
        (Some(t), Some(e)) if t < e => (
            text[after(t, TRANSLATION_MARKER)..e].trim().to_owned(),
            text[after(e, EXPLANATION_MARKER)..].trim().to_owned(),
        ),
        (Some(t), Some(e)) => (
            text[after(t, TRANSLATION_MARKER)..].trim().to_owned(),
            text[after(e, EXPLANATION_MARKER)..t].trim().to_owned(),
        ),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StubFailure {
    Unreachable,
    Timeout,
    Malformed,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StubRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contains_all: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contains_any: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail: Option<StubFailure>,
}

impl StubRule {
    pub fn respond(response: impl Into<String>) -> Self {
        StubRule {
            response: Some(response.into()),
            ..Default::default()
        }
    }

    pub fn when_contains_all<I, S>(mut self, needles: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.contains_all = needles.into_iter().map(Into::into).collect();
        self
    }

    pub fn when_exact(mut self, prompt: impl Into<String>) -> Self {
        self.exact = Some(prompt.into());
        self
    }

    fn matches(&self, prompt: &str) -> bool {
        self.exact.as_deref().is_none_or(|e| e == prompt)
            && self.contains_all.iter().all(|n| prompt.contains(n.as_str()))
            && (self.contains_any.is_empty()
                || self.contains_any.iter().any(|n| prompt.contains(n.as_str())))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StubTable {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<String>,
    #[serde(default)]
    pub rules: Vec<StubRule>,
}

impl StubTable {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| ModelError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let table: StubTable =
            toml::from_str(text).map_err(|e| ModelError::Config(format!("stub table: {e}")))?;
        for (i, r) in table.rules.iter().enumerate() {
            if r.response.is_some() == r.fail.is_some() {
                return Err(ModelError::Config(format!(
                    "stub rule {i} must set exactly one of `response` or `fail`"
                )));
            }
        }
        Ok(table)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("stub table serializes")
    }

    fn lookup(&self, prompt: &str) -> std::result::Result<String, StubOutcome> {
        let rule = self.rules.iter().find(|r| r.matches(prompt));
        match rule {
            Some(StubRule {
                fail: Some(f), ..
            }) => Err(StubOutcome::Fail(*f)),
            Some(StubRule {
                response: Some(r), ..
            }) => Ok(fill_placeholders(r, prompt)),
            _ => match &self.default {
                Some(d) => Ok(fill_placeholders(d, prompt)),
                None => Err(StubOutcome::NoRule),
            },
        }
    }
}

enum StubOutcome {
    Fail(StubFailure),
    NoRule,
}

fn fill_placeholders(template: &str, prompt: &str) -> String {
    let idiom = prompt
        .lines()
        .next()
        .and_then(|l| l.strip_prefix(PROMPT_IDIOM_PREFIX))
        .unwrap_or("");
    template.replace("{prompt}", prompt).replace("{idiom}", idiom)
}

enum Backend {
    Http {
        agent: ureq::Agent,
        endpoint: String,
        token: Option<String>,
    },
    Stub(StubTable),
}

/// Shareable client; `generate` may be called from many threads and never
/// has more than `max_in_flight` requests outstanding.
pub struct ModelClient {
    cfg: GenerationConfig,
    backend: Backend,
    gate: InFlightGate,
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
    top_k: u32,
    max_tokens: u32,
}

impl ModelClient {
    pub fn from_config(cfg: GenerationConfig) -> Result<Self> {
        cfg.validate()?;
        let backend = match cfg.backend {
            BackendKind::Http => Backend::Http {
                agent: http::agent(Duration::from_millis(cfg.timeout_ms)),
                endpoint: cfg.endpoint.clone().unwrap_or_default(),
                token: http::token_from_env(cfg.token_env.as_deref()),
            },
            BackendKind::Stub => {
                let path = cfg.stub_table.as_ref().ok_or_else(|| {
                    ModelError::Config("stub backend needs `stub_table`".into())
                })?;
                Backend::Stub(StubTable::load(path)?)
            }
        };
        let gate = InFlightGate::new(cfg.max_in_flight);
        Ok(ModelClient { cfg, backend, gate })
    }

    /// Stub client over an in-memory table.
    pub fn stub(table: StubTable, mut cfg: GenerationConfig) -> Result<Self> {
        cfg.backend = BackendKind::Stub;
        cfg.validate()?;
        let gate = InFlightGate::new(cfg.max_in_flight);
        Ok(ModelClient {
            cfg,
            backend: Backend::Stub(table),
            gate,
        })
    }

    pub fn config(&self) -> &GenerationConfig {
        &self.cfg
    }

    /// Highest number of concurrent requests seen.
    pub fn peak_in_flight(&self) -> usize {
        self.gate.peak()
    }

    pub fn generate(&self, prompt: &str) -> Result<GenerationResult> {
        if prompt.trim().is_empty() {
            return Err(ModelError::EmptyPrompt);
        }
        let _permit = self.gate.acquire();
        let start = Instant::now();
        let (raw, attempts) = match &self.backend {
            Backend::Stub(table) => (self.stub_call(table, prompt)?, 1),
            Backend::Http {
                agent,
                endpoint,
                token,
            } => self.http_call(agent, endpoint, token.as_deref(), prompt)?,
        };
        let (translation, explanation) = parse_response(&raw)?;
        Ok(GenerationResult {
            translation,
            explanation,
            raw,
            latency: start.elapsed(),
            attempts,
        })
    }

    fn stub_call(&self, table: &StubTable, prompt: &str) -> Result<String> {
        let attempts = self.cfg.max_retries + 1;
        table.lookup(prompt).map_err(|outcome| match outcome {
            StubOutcome::Fail(StubFailure::Unreachable) => ModelError::BackendUnreachable {
                attempts,
                last: "stub rule simulated an unreachable backend".into(),
            },
            StubOutcome::Fail(StubFailure::Timeout) => ModelError::Timeout { attempts },
            StubOutcome::Fail(StubFailure::Malformed) => {
                ModelError::MalformedResponse("stub rule simulated a malformed reply".into())
            }
            StubOutcome::NoRule => ModelError::NoStubRule,
        })
    }

    fn http_call(
        &self,
        agent: &ureq::Agent,
        endpoint: &str,
        token: Option<&str>,
        prompt: &str,
    ) -> Result<(String, u32)> {
        let body = GenerateRequest {
            model: &self.cfg.model_name,
            prompt,
            temperature: self.cfg.temperature,
            top_k: self.cfg.top_k,
            max_tokens: self.cfg.max_tokens,
        };
        let max_attempts = self.cfg.max_retries + 1;
        let mut last_failure = String::new();
        let mut last_was_timeout = false;
        for attempt in 1..=max_attempts {
            if attempt > 1 {
                let shift = (attempt - 2).min(16);
                let delay = self.cfg.backoff_ms.saturating_mul(1u64 << shift);
                debug!(attempt, delay_ms = delay, "retrying generation request");
                thread::sleep(Duration::from_millis(delay));
            }
            match http::post_json(agent, endpoint, token, &body) {
                Ok(reply) if (200..300).contains(&reply.status) => {
                    return Ok((extract_text(&reply.body)?, attempt));
                }
                Ok(reply) if reply.status >= 500 || reply.status == 429 => {
                    last_was_timeout = false;
                    last_failure = format!("status {}", reply.status);
                }
                Ok(reply) => {
                    return Err(ModelError::Rejected {
                        status: reply.status,
                        body: reply.body,
                    })
                }
                Err(HttpFailure::Timeout) => {
                    last_was_timeout = true;
                    last_failure = "timeout".into();
                }
                Err(HttpFailure::Transport(msg)) => {
                    last_was_timeout = false;
                    last_failure = msg;
                }
            }
            warn!(attempt, failure = %last_failure, "generation request failed");
        }
        if last_was_timeout {
            Err(ModelError::Timeout {
                attempts: max_attempts,
            })
        } else {
            Err(ModelError::BackendUnreachable {
                attempts: max_attempts,
                last: last_failure,
            })
        }
    }
}

fn extract_text(body: &str) -> Result<String> {
    let v: Value = serde_json::from_str(body)
        .map_err(|e| ModelError::MalformedResponse(format!("response is not JSON: {e}")))?;
    for key in ["text", "response", "output", "completion"] {
        if let Some(s) = v.get(key).and_then(Value::as_str) {
            return Ok(s.to_owned());
        }
    }
    let choice = v.get("choices").and_then(|c| c.get(0));
    if let Some(s) = choice.and_then(|c| c.get("text")).and_then(Value::as_str) {
        return Ok(s.to_owned());
    }
    if let Some(s) = choice
        .and_then(|c| c.pointer("/message/content"))
        .and_then(Value::as_str)
    {
        return Ok(s.to_owned());
    }
    Err(ModelError::MalformedResponse(
        "no text field in response".into(),
    ))
}

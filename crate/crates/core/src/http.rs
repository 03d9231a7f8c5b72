//! Thin blocking JSON-over-HTTP helper shared by the remote encoder and the
//! model client.

use std::time::Duration;

use serde::Serialize;

#[derive(Debug)]
pub(crate) enum HttpFailure {
    Timeout,
    /// Connection refused, DNS failure, broken pipe and similar.
    Transport(String),
}

pub(crate) struct HttpReply {
    pub status: u16,
    pub body: String,
}

pub(crate) fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

pub(crate) fn post_json<B: Serialize>(
    agent: &ureq::Agent,
    url: &str,
    bearer: Option<&str>,
    body: &B,
) -> Result<HttpReply, HttpFailure> {
    let mut req = agent.post(url).header("Accept", "application/json");
    if let Some(token) = bearer {
        req = req.header("Authorization", &format!("Bearer {token}"));
    }
    let mut resp = req.send_json(body).map_err(classify)?;
    let status = resp.status().as_u16();
    let body = resp.body_mut().read_to_string().map_err(classify)?;
    Ok(HttpReply { status, body })
}

fn classify(err: ureq::Error) -> HttpFailure {
    match err {
        ureq::Error::Timeout(_) => HttpFailure::Timeout,
        ureq::Error::Io(e) if e.kind() == std::io::ErrorKind::TimedOut => HttpFailure::Timeout,
        other => HttpFailure::Transport(other.to_string()),
    }
}

/// Reads a bearer token from the named environment variable, if any.
pub(crate) fn token_from_env(var: Option<&str>) -> Option<String> {
    var.and_then(|v| std::env::var(v).ok())
        .filter(|t| !t.trim().is_empty())
}

//! HTTP translation adapter: request templating, response extraction,
//! minimum-interval pacing, a concurrency cap, and retries with exponential
//! backoff.

use std::env;
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use biascope_core::service::{Lang, ServiceError, TranslationService};

use crate::CliError;

const REQUEST_TIMEOUT: Duration = Duration::from_secs(30);
const BACKOFF_BASE: Duration = Duration::from_millis(100);
const BACKOFF_CAP: Duration = Duration::from_secs(5);

fn default_method() -> HttpMethod {
    HttpMethod::Get
}

fn default_retries() -> u32 {
    3
}

fn default_concurrency() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum HttpMethod {
    Get,
    Post,
}

/// The `http` section of a service definition file.
///
/// `request_template` may use the placeholders `{text}`, `{source}`,
/// `{target}` and `{key}`. For GET the rendered template is appended to
/// `base_url` with values percent-encoded; for POST it becomes a JSON body
/// with values JSON-escaped. `response_path` is a dot path into the response
/// JSON (numeric segments index arrays), e.g.
/// `data.translations.0.translatedText`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpAdapterConfig {
    pub base_url: String,
    #[serde(default = "default_method")]
    pub http_method: HttpMethod,
    pub request_template: String,
    pub response_path: String,
    /// Name of the environment variable holding the API credential.
    /// Credentials never live in config files.
    pub key_env: Option<String>,
    /// Minimum milliseconds between request starts.
    #[serde(default)]
    pub min_interval_ms: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
}

/// Paces request starts at least `interval` apart and admits at most
/// `max_concurrency` requests in flight.
struct Limiter {
    interval: Duration,
    max_concurrency: usize,
    state: Mutex<LimiterState>,
    done: Condvar,
}

struct LimiterState {
    in_flight: usize,
    next_start: Option<Instant>,
}

struct LimiterGuard<'a> {
    limiter: &'a Limiter,
}

impl Limiter {
    fn new(interval: Duration, max_concurrency: usize) -> Self {
        Limiter {
            interval,
            max_concurrency,
            state: Mutex::new(LimiterState { in_flight: 0, next_start: None }),
            done: Condvar::new(),
        }
    }

    /// Blocks until a slot is free and this request's start time arrives.
    fn acquire(&self) -> LimiterGuard<'_> {
        let mut state = self.state.lock().expect("limiter poisoned");
        while state.in_flight >= self.max_concurrency {
            state = self.done.wait(state).expect("limiter poisoned");
        }
        state.in_flight += 1;
        let now = Instant::now();
        let start = match state.next_start {
            Some(t) if t > now => t,
            _ => now,
        };
        state.next_start = Some(start + self.interval);
        drop(state);
        let now = Instant::now();
        if start > now {
            thread::sleep(start - now);
        }
        LimiterGuard { limiter: self }
    }
}

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        let mut state = self.limiter.state.lock().expect("limiter poisoned");
        state.in_flight -= 1;
        drop(state);
        self.limiter.done.notify_one();
    }
}

/// A [`TranslationService`] speaking a templated HTTP API.
pub struct HttpTranslator {
    id: String,
    languages: Vec<Lang>,
    config: HttpAdapterConfig,
    /// Resolved credential; empty when the template takes no `{key}`.
    key: String,
    client: reqwest::blocking::Client,
    limiter: Limiter,
}

impl HttpTranslator {
    /// Builds the adapter, resolving the credential eagerly so missing
    /// environment configuration fails before any probe runs.
    pub fn new(
        id: String,
        languages: Vec<Lang>,
        config: HttpAdapterConfig,
    ) -> Result<Self, CliError> {
        if config.max_concurrency == 0 {
            return Err(CliError::config(format!("service {id:?}: max_concurrency must be >= 1")));
        }
        let key = match &config.key_env {
            Some(var) => env::var(var).map_err(|_| {
                CliError::config(format!(
                    "service {id:?}: credential environment variable {var} is not set"
                ))
            })?,
            None => {
                if config.request_template.contains("{key}") {
                    return Err(CliError::config(format!(
                        "service {id:?}: request_template uses {{key}} but no key_env is configured"
                    )));
                }
                String::new()
            }
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(REQUEST_TIMEOUT)
            .build()
            .map_err(|e| CliError::config(format!("service {id:?}: building HTTP client: {e}")))?;
        let limiter =
            Limiter::new(Duration::from_millis(config.min_interval_ms), config.max_concurrency);
        Ok(HttpTranslator { id, languages, config, key, client, limiter })
    }

    fn render(&self, text: &str, source: &Lang, target: &Lang, escape: fn(&str) -> String) -> String {
        self.config
            .request_template
            .replace("{text}", &escape(text))
            .replace("{source}", &escape(source.as_str()))
            .replace("{target}", &escape(target.as_str()))
            .replace("{key}", &escape(&self.key))
    }

    fn send(&self, text: &str, source: &Lang, target: &Lang) -> Result<String, AttemptError> {
        let _slot = self.limiter.acquire();
        let response = match self.config.http_method {
            HttpMethod::Get => {
                let url = format!("{}{}", self.config.base_url, self.render(text, source, target, percent_encode));
                self.client.get(url).send()
            }
            HttpMethod::Post => {
                let body = self.render(text, source, target, json_escape);
                self.client
                    .post(&self.config.base_url)
                    .header("content-type", "application/json")
                    .body(body)
                    .send()
            }
        };
        let response = response.map_err(|e| AttemptError::retryable(format!("transport: {e}")))?;
        let status = response.status();
        let body = response
            .text()
            .map_err(|e| AttemptError::retryable(format!("reading response: {e}")))?;
        if status.is_success() {
            return self.extract(&body).map_err(AttemptError::fatal);
        }
        let snippet: String = body.chars().take(200).collect();
        let message = format!("HTTP {status}: {snippet}");
        if status.as_u16() == 429 || status.is_server_error() {
            Err(AttemptError::retryable(message))
        } else {
            Err(AttemptError::fatal(message))
        }
    }

    /// Walks `response_path` into the response JSON and returns the string
    /// found there.
    fn extract(&self, body: &str) -> Result<String, String> {
        let root: serde_json::Value =
            serde_json::from_str(body).map_err(|e| format!("response is not JSON: {e}"))?;
        let mut node = &root;
        for segment in self.config.response_path.split('.') {
            node = match segment.parse::<usize>() {
                Ok(index) => node.get(index),
                Err(_) => node.get(segment),
            }
            .ok_or_else(|| {
                format!(
                    "response path {:?} missing at segment {segment:?}",
                    self.config.response_path
                )
            })?;
        }
        match node {
            serde_json::Value::String(s) => Ok(s.clone()),
            other => Err(format!(
                "response path {:?} points at a non-string: {other}",
                self.config.response_path
            )),
        }
    }
}

/// One attempt's failure, tagged with whether retrying can help.
struct AttemptError {
    message: String,
    retryable: bool,
}

impl AttemptError {
    fn retryable(message: String) -> Self {
        AttemptError { message, retryable: true }
    }

    fn fatal(message: String) -> Self {
        AttemptError { message, retryable: false }
    }
}

impl TranslationService for HttpTranslator {
    fn id(&self) -> &str {
        &self.id
    }

    fn supported_languages(&self) -> &[Lang] {
        &self.languages
    }

    fn translate(&self, text: &str, source: &Lang, target: &Lang) -> Result<String, ServiceError> {
        if !self.supports_pair(source, target) {
            return Err(ServiceError::UnsupportedPair {
                service: self.id.clone(),
                source: source.clone(),
                target: target.clone(),
            });
        }
        let attempts = self.config.max_retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let backoff = BACKOFF_BASE * 2u32.saturating_pow(attempt - 1);
                thread::sleep(backoff.min(BACKOFF_CAP));
            }
            match self.send(text, source, target) {
                Ok(translated) => {
                    if translated.trim().is_empty() {
                        return Err(ServiceError::EmptyOutput { service: self.id.clone() });
                    }
                    return Ok(translated);
                }
                Err(e) => {
                    if !e.retryable {
                        return Err(ServiceError::Transport {
                            service: self.id.clone(),
                            message: e.message,
                        });
                    }
                    log::warn!("service {:?} attempt {}/{attempts}: {}", self.id, attempt + 1, e.message);
                    last = e.message;
                }
            }
        }
        Err(ServiceError::Transport {
            service: self.id.clone(),
            message: format!("giving up after {attempts} attempt(s): {last}"),
        })
    }
}

/// Percent-encodes a value for URL query placement.
fn percent_encode(value: &str) -> String {
    url::form_urlencoded::byte_serialize(value.as_bytes()).collect()
}

/// Escapes a value for placement inside a JSON string literal.
fn json_escape(value: &str) -> String {
    let quoted = serde_json::Value::String(value.to_string()).to_string();
    quoted[1..quoted.len() - 1].to_string()
}

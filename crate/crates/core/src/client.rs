//! Chat-completion client and the batch runner that fills transcript files.
//!
//! Requests follow the OpenAI-compatible `POST {base_url}/chat/completions`
//! shape with the prompt as a single user message. Transport errors, 429
//! and 5xx responses are retried with exponential backoff; 401 and 403 end
//! the call at once.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::io::AsyncWriteExt;

use crate::generate::BenchmarkInstance;
use crate::transcript::{render_prompt, TranscriptRecord, Usage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub multiplier: f64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            initial_backoff_ms: 1_000,
            multiplier: 2.0,
            max_backoff_ms: 60_000,
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1`, `attempt` counting from 1.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let ms = self.initial_backoff_ms as f64 * self.multiplier.powi(attempt.saturating_sub(1) as i32);
        Duration::from_millis(ms.min(self.max_backoff_ms as f64) as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunnerConfig {
    pub base_url: String,
    /// Name of the environment variable holding the API key. No
    /// `Authorization` header is sent when absent.
    #[serde(default)]
    pub api_key_env: Option<String>,
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_top_p")]
    pub top_p: f64,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_top_p() -> f64 {
    1.0
}
fn default_max_output_tokens() -> u32 {
    16_384
}
fn default_max_in_flight() -> usize {
    4
}
fn default_timeout_secs() -> u64 {
    600
}

impl RunnerConfig {
    /// Greedy decoding with a 16384-token cap.
    pub fn new(base_url: &str, model: &str) -> Self {
        RunnerConfig {
            base_url: base_url.to_string(),
            api_key_env: None,
            model: model.to_string(),
            temperature: 0.0,
            top_p: default_top_p(),
            max_output_tokens: default_max_output_tokens(),
            max_in_flight: default_max_in_flight(),
            retry: RetryPolicy::default(),
            timeout_secs: default_timeout_secs(),
        }
    }

    /// Parses and validates a TOML config.
    pub fn from_toml(text: &str) -> Result<Self, ClientError> {
        let cfg: RunnerConfig = toml::from_str(text).map_err(|e| ClientError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ClientError> {
        let bad = |m: &str| Err(ClientError::Config(m.to_string()));
        if self.max_in_flight == 0 {
            return bad("max_in_flight must be at least 1");
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return bad("temperature must be non-negative");
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad("top_p must be in (0, 1]");
        }
        if self.retry.max_attempts == 0 {
            return bad("retry.max_attempts must be at least 1");
        }
        if self.retry.multiplier.is_nan() || self.retry.multiplier < 1.0 {
            return bad("retry.multiplier must be at least 1");
        }
        if self.timeout_secs == 0 {
            return bad("timeout_secs must be positive");
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return bad("base_url must start with http:// or https://");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("environment variable {0} is not set")]
    MissingKey(String),
    #[error("transcript file: {0}")]
    Io(#[from] std::io::Error),
}

/// Why a single call produced no response.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CallError {
    #[error("authentication failed (HTTP {status})")]
    Auth { status: u16 },
    #[error("HTTP {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("unreadable response: {0}")]
    Decode(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub usage: Option<Usage>,
}

#[derive(Debug, Clone)]
pub struct CallResult {
    pub outcome: Result<Completion, CallError>,
    pub attempts: u32,
    pub latency: Duration,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [Message<'a>; 1],
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    #[serde(default)]
    content: Option<String>,
}

enum Attempt {
    Done(Result<Completion, CallError>),
    Retry(String),
}

pub struct LlmClient {
    http: reqwest::Client,
    cfg: RunnerConfig,
    key: Option<String>,
    url: String,
}

impl LlmClient {
    /// Validates `cfg` and reads the API key from the environment.
    pub fn new(cfg: RunnerConfig) -> Result<Self, ClientError> {
        cfg.validate()?;
        let key = match &cfg.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| ClientError::MissingKey(var.clone()))?),
            None => None,
        };
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| ClientError::Config(e.to_string()))?;
        let url = format!("{}/chat/completions", cfg.base_url.trim_end_matches('/'));
        Ok(LlmClient { http, cfg, key, url })
    }

    pub fn config(&self) -> &RunnerConfig {
        &self.cfg
    }

    async fn attempt(&self, prompt: &str) -> Attempt {
        let body = ChatRequest {
            model: &self.cfg.model,
            messages: [Message {
                role: "user",
                content: prompt,
            }],
            temperature: self.cfg.temperature,
            top_p: self.cfg.top_p,
            max_tokens: self.cfg.max_output_tokens,
        };
        let mut req = self.http.post(&self.url).json(&body);
        if let Some(key) = &self.key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send().await {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Retry("timeout".into()),
            Err(e) => return Attempt::Retry(format!("transport: {e}")),
        };
        let status = resp.status().as_u16();
        let text = match resp.text().await {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(format!("reading body: {e}")),
        };
        match status {
            200..=299 => Attempt::Done(decode(&text)),
            401 | 403 => Attempt::Done(Err(CallError::Auth { status })),
            429 | 500..=599 => Attempt::Retry(format!("HTTP {status}")),
            _ => Attempt::Done(Err(CallError::Rejected {
                status,
                body: text.chars().take(500).collect(),
            })),
        }
    }

    /// One chat completion with the retry policy applied.
    pub async fn complete(&self, prompt: &str) -> CallResult {
        let start = Instant::now();
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(prompt).await {
                Attempt::Done(outcome) => {
                    return CallResult {
                        outcome,
                        attempts,
                        latency: start.elapsed(),
                    };
                }
                Attempt::Retry(last) if attempts >= self.cfg.retry.max_attempts => {
                    return CallResult {
                        outcome: Err(CallError::Exhausted { attempts, last }),
                        attempts,
                        latency: start.elapsed(),
                    };
                }
                Attempt::Retry(_) => tokio::time::sleep(self.cfg.retry.backoff(attempts)).await,
            }
        }
    }
}

fn decode(text: &str) -> Result<Completion, CallError> {
    let resp: ChatResponse = serde_json::from_str(text).map_err(|e| CallError::Decode(e.to_string()))?;
    let content = resp
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| CallError::Decode("no message content".into()))?;
    Ok(Completion {
        text: content,
        usage: resp.usage,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub skipped: usize,
    pub requested: usize,
    pub succeeded: usize,
    pub failed: usize,
}

/// Records already in `path`, in file order. Unreadable lines (a write cut
/// short) are dropped.
pub fn load_transcripts(path: &Path) -> std::io::Result<Vec<TranscriptRecord>> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    Ok(text
        .lines()
        .filter_map(|l| serde_json::from_str::<TranscriptRecord>(l).ok())
        .collect())
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Prompts every instance without a successful record in `path`, at most
/// `max_in_flight` at a time.
///
/// Each finished call is appended to `path` as one line as soon as it
/// arrives. At the end the file is rewritten, sorted by id with one record
/// per id, through a temporary file and a rename.
pub async fn run_benchmark(
    client: &LlmClient,
    instances: &[BenchmarkInstance],
    path: &Path,
) -> Result<RunSummary, ClientError> {
    if instances.is_empty() {
        return Err(ClientError::Config("dataset is empty".into()));
    }
    let existing = load_transcripts(path)?;
    let done: HashSet<&str> = existing
        .iter()
        .filter(|r| r.is_success())
        .map(|r| r.id.as_str())
        .collect();
    let pending: Vec<&BenchmarkInstance> = instances.iter().filter(|i| !done.contains(i.id.as_str())).collect();
    let mut summary = RunSummary {
        skipped: instances.len() - pending.len(),
        requested: pending.len(),
        ..RunSummary::default()
    };

    let mut file = tokio::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .await?;
    let model = client.config().model.clone();
    let mut results = stream::iter(pending)
        .map(|inst| {
            let model = model.clone();
            async move {
                let prompt = render_prompt(inst);
                let call = client.complete(&prompt).await;
                let (response, usage, error) = match call.outcome {
                    Ok(c) => (Some(c.text), c.usage, None),
                    Err(e) => (None, None, Some(e.to_string())),
                };
                TranscriptRecord {
                    id: inst.id.clone(),
                    model,
                    prompt,
                    response,
                    usage,
                    error,
                    attempts: Some(call.attempts),
                }
            }
        })
        .buffer_unordered(client.config().max_in_flight);

    let mut fresh = Vec::new();
    while let Some(record) = results.next().await {
        let mut line = serde_json::to_string(&record).expect("plain data serializes");
        line.push('\n');
        file.write_all(line.as_bytes()).await?;
        file.flush().await?;
        if record.is_success() {
            summary.succeeded += 1;
        } else {
            summary.failed += 1;
        }
        fresh.push(record);
    }
    drop(file);

    // fresh results replace any earlier record for the same id
    let mut merged: BTreeMap<String, TranscriptRecord> = BTreeMap::new();
    for r in existing.into_iter().chain(fresh) {
        let keep_old = merged.get(&r.id).is_some_and(|old| old.is_success() && !r.is_success());
        if !keep_old {
            merged.insert(r.id.clone(), r);
        }
    }
    let mut out = String::new();
    for r in merged.values() {
        out.push_str(&serde_json::to_string(r).expect("plain data serializes"));
        out.push('\n');
    }
    let tmp = temp_path(path);
    tokio::fs::write(&tmp, out).await?;
    tokio::fs::rename(&tmp, path).await?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_toml() {
        let cfg = RunnerConfig::from_toml("base_url = \"http://localhost:1\"\nmodel = \"m\"\n").unwrap();
        assert_eq!(cfg, RunnerConfig::new("http://localhost:1", "m"));
        assert_eq!(cfg.temperature, 0.0);
        assert_eq!(cfg.max_output_tokens, 16_384);
        assert!(cfg.validate().is_ok());
        let bad = RunnerConfig {
            max_in_flight: 0,
            ..cfg.clone()
        };
        assert!(bad.validate().is_err());
        let err =
            RunnerConfig::from_toml("base_url = \"http://x\"\nmodel = \"m\"\napi_key = \"secret\"\n").unwrap_err();
        assert!(err.to_string().contains("api_key"), "{err}");
    }

    #[test]
    fn backoff_grows_and_caps() {
        let p = RetryPolicy {
            max_attempts: 9,
            initial_backoff_ms: 100,
            multiplier: 2.0,
            max_backoff_ms: 500,
        };
        let ms: Vec<u128> = (1..=5).map(|a| p.backoff(a).as_millis()).collect();
        assert_eq!(ms, [100, 200, 400, 500, 500]);
    }

    #[test]
    fn missing_key_is_a_config_error() {
        let cfg = RunnerConfig {
            api_key_env: Some("TMBENCH_TEST_KEY_THAT_IS_NOT_SET".into()),
            ..RunnerConfig::new("http://localhost:1", "m")
        };
        assert!(matches!(LlmClient::new(cfg), Err(ClientError::MissingKey(_))));
    }

    #[test]
    fn response_decoding() {
        let ok = decode(r#"{"choices":[{"message":{"role":"assistant","content":"hi"}}],"usage":{"prompt_tokens":3,"completion_tokens":1,"total_tokens":4}}"#).unwrap();
        assert_eq!(ok.text, "hi");
        assert_eq!(
            ok.usage,
            Some(Usage {
                prompt_tokens: 3,
                completion_tokens: 1
            })
        );
        assert!(decode(r#"{"choices":[]}"#).is_err());
        assert!(decode("not json").is_err());
    }
}

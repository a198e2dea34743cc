use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use super::prompt::{estimate_tokens, PromptBundle};

pub const DEFAULT_API_KEY_ENV: &str = "DRIVEGEN_API_KEY";

fn default_model() -> String {
    "gpt-4".into()
}
fn default_temperature() -> f64 {
    0.7
}
fn default_max_tokens() -> u32 {
    4096
}
fn default_timeout() -> f64 {
    120.0
}
fn default_retries() -> u32 {
    2
}
fn default_backoff() -> f64 {
    1.0
}
fn default_key_env() -> String {
    DEFAULT_API_KEY_ENV.into()
}

/// Chat-completion settings. Exactly one of `endpoint` and `mock_playlist` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Base address of an OpenAI-compatible API, e.g. `http://localhost:8000/v1`.
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    /// Seconds.
    #[serde(default = "default_timeout")]
    pub request_timeout: f64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// Delay before the first retry in seconds, doubled for each further one.
    #[serde(default = "default_backoff")]
    pub retry_backoff: f64,
    /// Prompt budget in estimated tokens; larger prompts are refused before sending.
    #[serde(default)]
    pub context_window: Option<usize>,
    /// Environment variable holding the bearer token.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    /// Directory of numbered reply files replayed in order instead of calling a model.
    #[serde(default)]
    pub mock_playlist: Option<PathBuf>,
}

impl ModelConfig {
    pub fn mock(playlist: impl Into<PathBuf>) -> Self {
        ModelConfig { mock_playlist: Some(playlist.into()), ..Self::endpoint_defaults(None) }
    }

    pub fn http(endpoint: impl Into<String>) -> Self {
        Self::endpoint_defaults(Some(endpoint.into()))
    }

    fn endpoint_defaults(endpoint: Option<String>) -> Self {
        ModelConfig {
            endpoint,
            model: default_model(),
            temperature: default_temperature(),
            max_tokens: default_max_tokens(),
            request_timeout: default_timeout(),
            retries: default_retries(),
            retry_backoff: default_backoff(),
            context_window: None,
            api_key_env: default_key_env(),
            mock_playlist: None,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        match (&self.endpoint, &self.mock_playlist) {
            (Some(_), Some(_)) => Err(GatewayError::Config("set either endpoint or mock_playlist, not both".into())),
            (None, None) => Err(GatewayError::Config("one of endpoint or mock_playlist is required".into())),
            _ if !(self.request_timeout > 0.0) => Err(GatewayError::Config("request_timeout must be positive".into())),
            _ if !(self.retry_backoff >= 0.0) => Err(GatewayError::Config("retry_backoff must be non-negative".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum GatewayError {
    #[error("request failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("token limit exceeded: {0}")]
    TokenLimitExceeded(String),
    #[error("endpoint answered {status}: {body}")]
    Http { status: u16, body: String },
    #[error("unexpected response: {0}")]
    InvalidResponse(String),
    #[error("mock playlist exhausted after {0} replies")]
    PlaylistExhausted(usize),
    #[error("invalid model configuration: {0}")]
    Config(String),
}

/// Anything that turns a prompt into a reply.
pub trait Gateway: Send + Sync {
    fn complete(&self, bundle: &PromptBundle) -> Result<String, GatewayError>;
}

fn check_window(bundle: &PromptBundle, window: Option<usize>) -> Result<(), GatewayError> {
    let tokens = estimate_tokens(&bundle.rendered);
    match window {
        Some(limit) if tokens > limit => {
            Err(GatewayError::TokenLimitExceeded(format!("prompt needs about {tokens} tokens, window is {limit}")))
        }
        _ => Ok(()),
    }
}

pub fn connect(config: &ModelConfig) -> Result<Box<dyn Gateway>, GatewayError> {
    config.validate()?;
    match &config.mock_playlist {
        Some(dir) => Ok(Box::new(MockPlaylist::load(dir, config.context_window)?)),
        None => Ok(Box::new(HttpGateway::new(config.clone())?)),
    }
}

/// Scripted replies, consumed in file-name order.
///
/// `NNN.txt` (any extension) holds a reply. `NNN.err` scripts a failure: its
/// content is `token_limit` or `transport: <message>`.
#[derive(Debug)]
pub struct MockPlaylist {
    entries: Mutex<VecDeque<Result<String, GatewayError>>>,
    served: Mutex<usize>,
    context_window: Option<usize>,
}

impl MockPlaylist {
    pub fn from_replies(replies: Vec<String>) -> Self {
        MockPlaylist {
            entries: Mutex::new(replies.into_iter().map(Ok).collect()),
            served: Mutex::new(0),
            context_window: None,
        }
    }

    pub fn load(dir: &Path, context_window: Option<usize>) -> Result<Self, GatewayError> {
        let read_err = |e: std::io::Error| GatewayError::Config(format!("{}: {e}", dir.display()));
        let mut files: Vec<(u64, PathBuf)> = Vec::new();
        for entry in std::fs::read_dir(dir).map_err(read_err)? {
            let path = entry.map_err(read_err)?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let digits: String = name.chars().take_while(char::is_ascii_digit).collect();
            if path.is_file() && !digits.is_empty() {
                files.push((digits.parse().map_err(|_| GatewayError::Config(format!("bad file name {name}")))?, path));
            }
        }
        files.sort();
        if let Some(pair) = files.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(GatewayError::Config(format!("two playlist files numbered {}", pair[0].0)));
        }
        let mut entries = VecDeque::new();
        for (_, path) in files {
            let text = std::fs::read_to_string(&path).map_err(read_err)?;
            let scripted_failure = path.extension().is_some_and(|e| e == "err");
            entries.push_back(if scripted_failure { Err(parse_scripted_error(&text)) } else { Ok(text) });
        }
        Ok(MockPlaylist { entries: Mutex::new(entries), served: Mutex::new(0), context_window })
    }

    pub fn remaining(&self) -> usize {
        self.entries.lock().expect("playlist lock").len()
    }
}

fn parse_scripted_error(text: &str) -> GatewayError {
    let text = text.trim();
    if text == "token_limit" {
        GatewayError::TokenLimitExceeded("scripted".into())
    } else {
        let message = text.strip_prefix("transport:").unwrap_or(text).trim().to_string();
        GatewayError::Transport { attempts: 1, message }
    }
}

impl Gateway for MockPlaylist {
    fn complete(&self, bundle: &PromptBundle) -> Result<String, GatewayError> {
        check_window(bundle, self.context_window)?;
        let mut served = self.served.lock().expect("playlist lock");
        let next = self.entries.lock().expect("playlist lock").pop_front();
        match next {
            Some(entry) => {
                *served += 1;
                entry
            }
            None => Err(GatewayError::PlaylistExhausted(*served)),
        }
    }
}

/// OpenAI-compatible chat-completion client.
pub struct HttpGateway {
    config: ModelConfig,
    url: String,
    client: reqwest::blocking::Client,
}

enum Attempt {
    Retry(String),
    Fail(GatewayError),
}

impl HttpGateway {
    pub fn new(config: ModelConfig) -> Result<Self, GatewayError> {
        let endpoint = config.endpoint.clone().ok_or_else(|| GatewayError::Config("endpoint missing".into()))?;
        let trimmed = endpoint.trim_end_matches('/');
        let url = if trimmed.ends_with("/chat/completions") {
            trimmed.to_string()
        } else {
            format!("{trimmed}/chat/completions")
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.request_timeout))
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(HttpGateway { config, url, client })
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<String, Attempt> {
        let mut request = self.client.post(&self.url).json(body);
        if let Ok(key) = std::env::var(&self.config.api_key_env) {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| Attempt::Retry(e.to_string()))?;
        if status.is_success() {
            return parse_completion(&text).map_err(Attempt::Fail);
        }
        if text.contains("context_length_exceeded") {
            return Err(Attempt::Fail(GatewayError::TokenLimitExceeded(text)));
        }
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        Err(Attempt::Fail(GatewayError::Http { status: status.as_u16(), body: text }))
    }
}

fn parse_completion(text: &str) -> Result<String, GatewayError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| GatewayError::InvalidResponse(format!("not JSON: {e}")))?;
    let choice = &value["choices"][0];
    if choice["finish_reason"] == "length" {
        return Err(GatewayError::TokenLimitExceeded("reply truncated at max_tokens".into()));
    }
    choice["message"]["content"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| GatewayError::InvalidResponse("missing choices[0].message.content".into()))
}

impl Gateway for HttpGateway {
    fn complete(&self, bundle: &PromptBundle) -> Result<String, GatewayError> {
        check_window(bundle, self.config.context_window)?;
        let body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": bundle.rendered}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        });
        let attempts = self.config.retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.config.retry_backoff * f64::from(1u32 << (attempt - 1).min(16));
                log::warn!("retrying chat completion in {delay:.2}s after: {last}");
                std::thread::sleep(Duration::from_secs_f64(delay));
            }
            match self.attempt(&body) {
                Ok(reply) => return Ok(reply),
                Err(Attempt::Fail(error)) => return Err(error),
                Err(Attempt::Retry(message)) => last = message,
            }
        }
        Err(GatewayError::Transport { attempts, message: last })
    }
}

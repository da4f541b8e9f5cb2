//! Language-model evaluators: prompt construction, the provider client,
//! response parsing and filtering, and YES/NO coding of reasoning traces.

mod coder;
#[cfg(feature = "http")]
mod http;
mod parse;
mod prompt;
mod stub;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use coder::{aggregate_codes, code_trace, parse_code_reply, CodeGroup, CodeRate, Label};
#[cfg(feature = "http")]
pub use http::OpenAiCompatible;
pub use parse::{apply_direct_filter, parse_response, DEFAULT_PROSE_BUDGET};
pub use prompt::{board_description, build_prompt, win_conditions, Prompt, SCRATCHPAD_SENTENCE};
pub use stub::StubProvider;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Query {
    Payoff,
    Funness,
}

impl Query {
    pub fn name(self) -> &'static str {
        match self {
            Query::Payoff => "payoff",
            Query::Funness => "funness",
        }
    }

    pub fn from_name(name: &str) -> Option<Query> {
        match name {
            "payoff" => Some(Query::Payoff),
            "funness" => Some(Query::Funness),
            _ => None,
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptMode {
    Direct,
    #[default]
    Cot,
    Reasoning,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReasoningEffort {
    Low,
    Medium,
    High,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub provider_id: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub reasoning_effort: Option<ReasoningEffort>,
    pub prompt_mode: PromptMode,
    /// Send the system text inside the user message, for providers
    /// without a system channel.
    pub r1_inline_system: bool,
    /// Chat-completions endpoint root for the HTTP provider.
    pub base_url: Option<String>,
    /// Environment variable holding the API key; defaults to
    /// `<PROVIDER_ID>_API_KEY`.
    pub api_key_env: Option<String>,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub timeout_secs: u64,
    pub requests_per_minute: Option<u32>,
    pub max_in_flight: usize,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            provider_id: "stub".into(),
            model_name: "stub".into(),
            temperature: 0.7,
            max_tokens: 32_000,
            reasoning_effort: None,
            prompt_mode: PromptMode::Cot,
            r1_inline_system: false,
            base_url: None,
            api_key_env: None,
            max_retries: 3,
            initial_backoff_ms: 500,
            timeout_secs: 600,
            requests_per_minute: None,
            max_in_flight: 4,
        }
    }
}

impl ProviderConfig {
    /// 1.0 for o1, o3 and GPT-5 class models, 0.7 otherwise.
    pub fn default_temperature(model_name: &str) -> f64 {
        let m = model_name.to_ascii_lowercase();
        if ["o1", "o3", "gpt-5"].iter().any(|p| m.starts_with(p)) {
            1.0
        } else {
            0.7
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reasoning_effort.is_some() && self.prompt_mode != PromptMode::Reasoning {
            return Err(Error::Config("reasoning_effort is only allowed in reasoning mode".into()));
        }
        if !(self.temperature >= 0.0) || !self.temperature.is_finite() {
            return Err(Error::Config(format!("temperature {} must be non-negative", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(Error::Config("max_tokens must be positive".into()));
        }
        if self.max_in_flight == 0 {
            return Err(Error::Config("max_in_flight must be positive".into()));
        }
        if self.requests_per_minute == Some(0) {
            return Err(Error::Config("requests_per_minute must be positive".into()));
        }
        Ok(())
    }

    pub fn api_key_var(&self) -> String {
        self.api_key_env.clone().unwrap_or_else(|| {
            let id: String =
                self.provider_id.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' }).collect();
            format!("{id}_API_KEY")
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("timed out: {0}")]
    Timeout(String),
    #[error("transient provider failure: {0}")]
    Transient(String),
    #[error("provider error: {0}")]
    Fatal(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: Box<ProviderError> },
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ProviderError::RateLimited(_) | ProviderError::Timeout(_) | ProviderError::Transient(_))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    /// Empty when the system text travels inside `user`.
    pub system: String,
    pub user: String,
    /// Sampling seed, passed to providers that accept one.
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    Length,
}

/// A provider's reply before trace extraction.
#[derive(Clone, Debug, PartialEq)]
pub struct RawCompletion {
    pub text: String,
    /// Reasoning returned on a separate channel, if the provider has one.
    pub reasoning: Option<String>,
    pub reasoning_tokens: Option<u64>,
    pub finish_reason: FinishReason,
}

impl RawCompletion {
    pub fn text(text: impl Into<String>) -> RawCompletion {
        RawCompletion { text: text.into(), reasoning: None, reasoning_tokens: None, finish_reason: FinishReason::Stop }
    }
}

/// Minimal request/response contract every backend implements.
pub trait Provider: Send + Sync {
    fn send(&self, config: &ProviderConfig, request: &CompletionRequest) -> Result<RawCompletion, ProviderError>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub trace_text: Option<String>,
    pub reasoning_tokens: Option<u64>,
    pub truncated: bool,
}

/// Splits `<think>...</think>` (or `[think]...[/think]`) segments out of a
/// reply. Returns the remaining text and the joined inner segments. An
/// unterminated opening tag runs to the end of the text.
pub fn extract_think(text: &str) -> (String, Option<String>) {
    let mut rest = String::new();
    let mut traces: Vec<&str> = Vec::new();
    let mut s = text;
    loop {
        let open = [("<think>", "</think>"), ("[think]", "[/think]")]
            .iter()
            .filter_map(|&(o, c)| s.find(o).map(|i| (i, o, c)))
            .min_by_key(|t| t.0);
        match open {
            None => {
                rest.push_str(s);
                break;
            }
            Some((i, o, c)) => {
                rest.push_str(&s[..i]);
                let inner = &s[i + o.len()..];
                match inner.find(c) {
                    Some(j) => {
                        traces.push(inner[..j].trim());
                        s = &inner[j + c.len()..];
                    }
                    None => {
                        traces.push(inner.trim());
                        break;
                    }
                }
            }
        }
    }
    let trace = (!traces.is_empty()).then(|| traces.join("\n\n"));
    (rest.trim().to_string(), trace)
}

/// Approximate token count: one token per four bytes of UTF-8, rounded up.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.len() as u64).div_ceil(4)
}

/// Token bucket shared by every caller of one [`Gateway`].
#[derive(Debug)]
struct RateLimiter {
    per_minute: Option<u32>,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    fn new(per_minute: Option<u32>) -> RateLimiter {
        RateLimiter { per_minute, state: Mutex::new((per_minute.unwrap_or(0) as f64, Instant::now())) }
    }

    fn acquire(&self) {
        let Some(rpm) = self.per_minute else { return };
        let rate = rpm as f64 / 60.0;
        loop {
            let wait = {
                let mut st = self.state.lock().expect("rate limiter poisoned");
                let now = Instant::now();
                st.0 = (st.0 + now.duration_since(st.1).as_secs_f64() * rate).min(rpm as f64);
                st.1 = now;
                if st.0 >= 1.0 {
                    st.0 -= 1.0;
                    return;
                }
                (1.0 - st.0) / rate
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

/// A provider plus its configuration, retry policy and rate limit. Cheap to
/// share across threads.
pub struct Gateway {
    provider: Arc<dyn Provider>,
    config: ProviderConfig,
    limiter: RateLimiter,
}

impl Gateway {
    pub fn new(provider: Arc<dyn Provider>, config: ProviderConfig) -> Result<Gateway> {
        config.validate()?;
        let limiter = RateLimiter::new(config.requests_per_minute);
        Ok(Gateway { provider, config, limiter })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    /// One completion with bounded exponential-backoff retries on transient
    /// failures. Authentication and other fatal errors return immediately.
    pub fn complete(&self, system: &str, user: &str, seed: Option<u64>) -> Result<Completion, ProviderError> {
        let request = CompletionRequest { system: system.to_string(), user: user.to_string(), seed };
        let attempts = self.config.max_retries + 1;
        let mut attempt = 0;
        let raw = loop {
            self.limiter.acquire();
            attempt += 1;
            match self.provider.send(&self.config, &request) {
                Ok(raw) => break raw,
                Err(e) if e.is_retryable() && attempt < attempts => {
                    let delay = self.config.initial_backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                    log::warn!("{}: {e}; retrying in {delay} ms", self.config.provider_id);
                    std::thread::sleep(Duration::from_millis(delay));
                }
                Err(e) if e.is_retryable() => {
                    return Err(ProviderError::Exhausted { attempts, last: Box::new(e) });
                }
                Err(e) => return Err(e),
            }
        };
        let (text, inline_trace) = extract_think(&raw.text);
        let trace_text = raw.reasoning.filter(|r| !r.trim().is_empty()).or(inline_trace);
        let reasoning_tokens = raw.reasoning_tokens.or_else(|| trace_text.as_deref().map(estimate_tokens));
        Ok(Completion { text, trace_text, reasoning_tokens, truncated: raw.finish_reason == FinishReason::Length })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "query", rename_all = "lowercase")]
pub enum Answer {
    Payoff { q1: f64, q2: f64 },
    Funness { rating: f64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    MissingMarker,
    NotANumber,
    OutOfRange,
    Truncated,
    Provider(String),
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureReason::MissingMarker => f.write_str("missing_marker"),
            FailureReason::NotANumber => f.write_str("not_a_number"),
            FailureReason::OutOfRange => f.write_str("out_of_range"),
            FailureReason::Truncated => f.write_str("truncated"),
            FailureReason::Provider(m) => write!(f, "provider: {m}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseOutcome {
    Ok(Answer),
    Filtered,
    Failed(FailureReason),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SampleKey {
    pub evaluator_id: String,
    pub game_id: String,
    pub query: Query,
    pub rollout: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub key: SampleKey,
    pub prompt_mode: PromptMode,
    pub raw_text: String,
    pub trace_text: Option<String>,
    pub reasoning_tokens: Option<u64>,
    pub parse: ParseOutcome,
    #[serde(default)]
    pub coder_labels: BTreeMap<Label, bool>,
}

impl TraceRecord {
    /// Parses a completion; truncated replies fail without parsing and
    /// Direct-mode replies go through the prose filter.
    pub fn from_completion(key: SampleKey, mode: PromptMode, completion: Completion) -> TraceRecord {
        let parse = if completion.truncated {
            ParseOutcome::Failed(FailureReason::Truncated)
        } else {
            parse_response(&completion.text, key.query)
        };
        let record = TraceRecord {
            key,
            prompt_mode: mode,
            raw_text: completion.text,
            trace_text: completion.trace_text,
            reasoning_tokens: completion.reasoning_tokens,
            parse,
            coder_labels: BTreeMap::new(),
        };
        if mode == PromptMode::Direct {
            apply_direct_filter(record, DEFAULT_PROSE_BUDGET)
        } else {
            record
        }
    }
}

use std::time::Duration;

use serde_json::{json, Value};

use super::{CompletionRequest, FinishReason, Provider, ProviderConfig, ProviderError, RawCompletion};

/// Chat-completions client for OpenAI-compatible endpoints. The API key is
/// read from the environment variable named by the provider config.
pub struct OpenAiCompatible {
    client: reqwest::blocking::Client,
}

impl OpenAiCompatible {
    pub fn new(timeout: Duration) -> Result<OpenAiCompatible, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ProviderError::Fatal(format!("building HTTP client: {e}")))?;
        Ok(OpenAiCompatible { client })
    }
}

fn body(config: &ProviderConfig, request: &CompletionRequest) -> Value {
    let mut messages = Vec::new();
    if !request.system.is_empty() {
        messages.push(json!({"role": "system", "content": request.system}));
    }
    messages.push(json!({"role": "user", "content": request.user}));
    let mut body = json!({
        "model": config.model_name,
        "messages": messages,
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
    });
    if let Some(effort) = config.reasoning_effort {
        body["reasoning_effort"] = serde_json::to_value(effort).expect("enum serializes");
    }
    if let Some(seed) = request.seed {
        body["seed"] = json!(seed);
    }
    body
}

fn completion(v: &Value) -> Result<RawCompletion, ProviderError> {
    let choice = &v["choices"][0];
    let message = &choice["message"];
    let text = message["content"].as_str().unwrap_or_default().to_string();
    let reasoning = ["reasoning_content", "reasoning"].iter().find_map(|k| message[*k].as_str()).map(str::to_string);
    let finish_reason = match choice["finish_reason"].as_str() {
        Some("length") => FinishReason::Length,
        Some(_) | None if choice.is_object() => FinishReason::Stop,
        _ => return Err(ProviderError::Fatal(format!("response has no choices: {v}"))),
    };
    let reasoning_tokens = v["usage"]["completion_tokens_details"]["reasoning_tokens"].as_u64();
    Ok(RawCompletion { text, reasoning, reasoning_tokens, finish_reason })
}

impl Provider for OpenAiCompatible {
    fn send(&self, config: &ProviderConfig, request: &CompletionRequest) -> Result<RawCompletion, ProviderError> {
        let var = config.api_key_var();
        let key = std::env::var(&var).map_err(|_| ProviderError::Auth(format!("environment variable {var} is not set")))?;
        let base = config.base_url.as_deref().unwrap_or("https://api.openai.com/v1").trim_end_matches('/');
        let response = self
            .client
            .post(format!("{base}/chat/completions"))
            .bearer_auth(key)
            .json(&body(config, request))
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    ProviderError::Timeout(e.to_string())
                } else {
                    ProviderError::Transient(e.to_string())
                }
            })?;
        let status = response.status();
        let text = response.text().map_err(|e| ProviderError::Transient(e.to_string()))?;
        match status.as_u16() {
            200..=299 => {}
            401 | 403 => return Err(ProviderError::Auth(format!("{status}: {text}"))),
            408 => return Err(ProviderError::Timeout(format!("{status}: {text}"))),
            429 => return Err(ProviderError::RateLimited(format!("{status}: {text}"))),
            500..=599 => return Err(ProviderError::Transient(format!("{status}: {text}"))),
            _ => return Err(ProviderError::Fatal(format!("{status}: {text}"))),
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| ProviderError::Fatal(format!("invalid JSON response: {e}")))?;
        completion(&v)
    }
}

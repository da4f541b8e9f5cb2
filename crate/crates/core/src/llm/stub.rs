use std::sync::atomic::{AtomicU64, Ordering};

use super::{CompletionRequest, FinishReason, Provider, ProviderConfig, ProviderError, RawCompletion};
use crate::fnv1a;

type Responder = dyn Fn(&CompletionRequest) -> Result<RawCompletion, ProviderError> + Send + Sync;

/// Offline provider for tests and dry runs. Counts every call it receives.
pub struct StubProvider {
    respond: Box<Responder>,
    calls: AtomicU64,
}

impl StubProvider {
    pub fn new(respond: impl Fn(&CompletionRequest) -> Result<RawCompletion, ProviderError> + Send + Sync + 'static) -> Self {
        StubProvider { respond: Box::new(respond), calls: AtomicU64::new(0) }
    }

    /// Always replies with `text`.
    pub fn canned(text: impl Into<String>) -> Self {
        let text = text.into();
        StubProvider::new(move |_| Ok(RawCompletion::text(text.clone())))
    }

    /// Well-formed answers derived from a hash of the request: a short
    /// think-delimited trace followed by the answer markers the prompt asks
    /// for, or YES/NO for coding prompts.
    pub fn deterministic() -> Self {
        StubProvider::new(|req| {
            let mut bytes = req.user.as_bytes().to_vec();
            bytes.extend_from_slice(&req.seed.unwrap_or(0).to_le_bytes());
            let h = fnv1a(&bytes);
            if req.user.starts_with("You are categorizing") {
                return Ok(RawCompletion::text(if h % 3 == 0 { "NO" } else { "YES" }));
            }
            let steps = 1 + (h >> 40) % 6;
            let trace: Vec<String> =
                (0..steps).map(|i| format!("Player {} places a piece at ({}, {}).", 1 + i % 2, (h >> (i * 3)) % 5, (h >> (i * 5)) % 5)).collect();
            let answer = if req.user.contains("RESPONSE-Q1") {
                format!("RESPONSE-Q1 = {} and RESPONSE-Q2 = {}", h % 101, (h >> 8) % 101)
            } else {
                format!("RESPONSE = {}", (h >> 16) % 101)
            };
            Ok(RawCompletion {
                text: format!("<think>{}</think>\n{answer}", trace.join(" ")),
                reasoning: None,
                reasoning_tokens: None,
                finish_reason: FinishReason::Stop,
            })
        })
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Provider for StubProvider {
    fn send(&self, _config: &ProviderConfig, request: &CompletionRequest) -> Result<RawCompletion, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.respond)(request)
    }
}

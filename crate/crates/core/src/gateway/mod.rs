//! Uniform access to completion and embedding providers.
//!
//! [`Gateway`] wraps a [`Provider`] with retries, request pacing, a token
//! budget and per-tag usage accounting. Providers only need to implement a
//! single attempt.

mod baseline;
mod classifier;
mod embed;
mod http;
mod mock;

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::clock::Clock;
use crate::ratelimit::RateLimiter;

pub use baseline::{predict_title, tokenize_title, train_title_baseline, train_title_baseline_with_history, TitleClassifierModel};
pub use classifier::{BaselineTitleClassifier, StubTitleClassifier, TitleClassifier};
pub use embed::{cosine, hashing_embedding, normalize, MOCK_EMBEDDING_DIM};
pub use http::{HttpProvider, RemoteTitleClassifier};
pub use mock::{MockProvider, MockRule, RuleTable};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("token budget exceeded: {needed} more tokens requested, {remaining} remaining")]
    BudgetExceeded { needed: u64, remaining: u64 },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),
}

/// Failure of a single provider attempt.
#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum ProviderError {
    /// Worth retrying: timeouts, connection errors, 5xx, 429.
    #[error("transient: {0}")]
    Transient(String),
    #[error("{0}")]
    Fatal(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: u32,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default)]
    pub stop: Option<Vec<String>>,
    /// Pipeline stage label used for usage accounting.
    #[serde(default)]
    pub tag: String,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, max_tokens: u32, tag: impl Into<String>) -> Self {
        CompletionRequest { prompt: prompt.into(), max_tokens, temperature: 0.0, stop: None, tag: tag.into() }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.prompt.is_empty() {
            return Err(GatewayError::InvalidRequest("empty prompt".into()));
        }
        if self.max_tokens < 1 {
            return Err(GatewayError::InvalidRequest("max_tokens must be >= 1".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub provider: String,
    pub model: String,
    pub latency_ms: u64,
}

/// One completion/embedding backend. Implementations make a single attempt;
/// retries and pacing belong to the [`Gateway`].
pub trait Provider: Send + Sync {
    fn id(&self) -> &str;
    fn model(&self) -> &str;
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, ProviderError>;
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError>;
}

/// Rough token count used for budget checks before a call is made.
pub fn estimate_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub factor: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, base_delay: Duration::from_secs(1), factor: 2 }
    }
}

impl RetryPolicy {
    /// Delay before attempt `n + 1`, after `n` failures (n >= 1).
    pub fn delay_after(&self, failures: u32) -> Duration {
        self.base_delay * self.factor.pow(failures.saturating_sub(1))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagUsage {
    pub calls: u64,
    pub attempts: u64,
    pub failures: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl TagUsage {
    pub fn total_tokens(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageReport {
    pub by_tag: BTreeMap<String, TagUsage>,
    /// Tokens as reported by providers, summed over all successful calls.
    pub provider_reported_tokens: u64,
    pub token_cap: Option<u64>,
}

impl UsageReport {
    pub fn total_tokens(&self) -> u64 {
        self.by_tag.values().map(TagUsage::total_tokens).sum()
    }
}

#[derive(Default)]
struct Ledger {
    usage: UsageReport,
    reserved: u64,
}

pub struct GatewayBuilder {
    provider: Arc<dyn Provider>,
    clock: Arc<dyn Clock>,
    retry: RetryPolicy,
    requests_per_minute: Option<u32>,
    token_cap: Option<u64>,
}

impl GatewayBuilder {
    pub fn retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn requests_per_minute(mut self, rpm: Option<u32>) -> Self {
        self.requests_per_minute = rpm.filter(|r| *r > 0);
        self
    }

    pub fn token_cap(mut self, cap: Option<u64>) -> Self {
        self.token_cap = cap;
        self
    }

    pub fn build(self) -> Gateway {
        let limiter = self.requests_per_minute.map(|rpm| RateLimiter::per_minute(rpm, self.clock.clone()));
        Gateway {
            provider: self.provider,
            clock: self.clock,
            retry: self.retry,
            limiter,
            ledger: Mutex::new(Ledger {
                usage: UsageReport { token_cap: self.token_cap, ..Default::default() },
                reserved: 0,
            }),
        }
    }
}

/// Thread-safe front door to a provider.
pub struct Gateway {
    provider: Arc<dyn Provider>,
    clock: Arc<dyn Clock>,
    retry: RetryPolicy,
    limiter: Option<RateLimiter>,
    ledger: Mutex<Ledger>,
}

impl Gateway {
    pub fn builder(provider: Arc<dyn Provider>, clock: Arc<dyn Clock>) -> GatewayBuilder {
        GatewayBuilder { provider, clock, retry: RetryPolicy::default(), requests_per_minute: None, token_cap: None }
    }

    pub fn provider_id(&self) -> &str {
        self.provider.id()
    }

    pub fn model_id(&self) -> &str {
        self.provider.model()
    }

    pub fn usage(&self) -> UsageReport {
        self.ledger.lock().unwrap().usage.clone()
    }

    fn with_retries<T>(&self, tag: &str, mut attempt: impl FnMut() -> Result<T, ProviderError>) -> Result<T, GatewayError> {
        let mut failures = 0;
        loop {
            if let Some(l) = &self.limiter {
                l.acquire();
            }
            let result = attempt();
            {
                let mut ledger = self.ledger.lock().unwrap();
                let entry = ledger.usage.by_tag.entry(tag.to_string()).or_default();
                entry.attempts += 1;
                if result.is_err() {
                    entry.failures += 1;
                }
            }
            match result {
                Ok(v) => return Ok(v),
                Err(ProviderError::Fatal(m)) => return Err(GatewayError::ProviderUnavailable(m)),
                Err(ProviderError::Transient(m)) => {
                    failures += 1;
                    if failures >= self.retry.max_attempts {
                        return Err(GatewayError::ProviderUnavailable(format!("{m} (after {failures} attempts)")));
                    }
                    tracing::debug!(tag, failures, "transient provider failure, backing off");
                    self.clock.sleep(self.retry.delay_after(failures));
                }
            }
        }
    }

    fn reserve(&self, needed: u64) -> Result<(), GatewayError> {
        let mut ledger = self.ledger.lock().unwrap();
        if let Some(cap) = ledger.usage.token_cap {
            let committed = ledger.usage.total_tokens() + ledger.reserved;
            let remaining = cap.saturating_sub(committed);
            if needed > remaining {
                return Err(GatewayError::BudgetExceeded { needed, remaining });
            }
        }
        ledger.reserved += needed;
        Ok(())
    }

    /// Run a completion with retries, pacing and budget enforcement.
    pub fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        request.validate()?;
        let needed = estimate_tokens(&request.prompt) + u64::from(request.max_tokens);
        self.reserve(needed)?;
        let started = Instant::now();
        let result = self.with_retries(&request.tag, || self.provider.complete(request));
        let mut ledger = self.ledger.lock().unwrap();
        ledger.reserved -= needed;
        let mut response = result?;
        response.latency_ms = started.elapsed().as_millis() as u64;
        let entry = ledger.usage.by_tag.entry(request.tag.clone()).or_default();
        entry.calls += 1;
        entry.prompt_tokens += response.prompt_tokens;
        entry.completion_tokens += response.completion_tokens;
        ledger.usage.provider_reported_tokens += response.prompt_tokens + response.completion_tokens;
        Ok(response)
    }

    /// Embed `text` as a unit vector.
    pub fn embed(&self, text: &str) -> Result<Vec<f64>, GatewayError> {
        if text.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("cannot embed empty text".into()));
        }
        let raw = self.with_retries("embed", || self.provider.embed(text))?;
        {
            let mut ledger = self.ledger.lock().unwrap();
            ledger.usage.by_tag.entry("embed".into()).or_default().calls += 1;
        }
        normalize(raw).ok_or_else(|| GatewayError::ProviderUnavailable("provider returned a zero or non-finite embedding".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::FakeClock;
    use std::sync::atomic::{AtomicU32, Ordering};

    /// Fails transiently `failures` times, then echoes.
    struct Flaky {
        failures: u32,
        calls: AtomicU32,
    }

    impl Provider for Flaky {
        fn id(&self) -> &str {
            "flaky"
        }
        fn model(&self) -> &str {
            "flaky-1"
        }
        fn complete(&self, r: &CompletionRequest) -> Result<CompletionResponse, ProviderError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                return Err(ProviderError::Transient("503".into()));
            }
            Ok(CompletionResponse {
                text: "ok".into(),
                prompt_tokens: estimate_tokens(&r.prompt),
                completion_tokens: 1,
                provider: "flaky".into(),
                model: "flaky-1".into(),
                latency_ms: 0,
            })
        }
        fn embed(&self, _: &str) -> Result<Vec<f64>, ProviderError> {
            Err(ProviderError::Fatal("no embeddings".into()))
        }
    }

    fn gateway(failures: u32, clock: &FakeClock) -> Gateway {
        Gateway::builder(Arc::new(Flaky { failures, calls: AtomicU32::new(0) }), Arc::new(clock.clone())).build()
    }

    #[test]
    fn retries_with_exponential_backoff() {
        let clock = FakeClock::fixed();
        let gw = gateway(2, &clock);
        let resp = gw.complete(&CompletionRequest::new("hello there", 3, "content")).unwrap();
        assert_eq!(resp.text, "ok");
        assert_eq!(gw.usage().by_tag["content"].attempts, 3);
        assert_eq!(clock.sleeps(), vec![Duration::from_secs(1), Duration::from_secs(2)]);
    }

    #[test]
    fn gives_up_after_three_attempts() {
        let clock = FakeClock::fixed();
        let gw = gateway(5, &clock);
        let err = gw.complete(&CompletionRequest::new("hello", 3, "summary")).unwrap_err();
        assert!(matches!(err, GatewayError::ProviderUnavailable(_)));
        assert_eq!(gw.usage().by_tag["summary"].attempts, 3);
        assert_eq!(clock.sleeps().len(), 2);
    }

    #[test]
    fn fatal_errors_are_not_retried() {
        let clock = FakeClock::fixed();
        let gw = gateway(0, &clock);
        assert!(matches!(gw.embed("abc"), Err(GatewayError::ProviderUnavailable(_))));
        assert_eq!(gw.usage().by_tag["embed"].attempts, 1);
        assert!(clock.sleeps().is_empty());
    }

    #[test]
    fn budget_cap_blocks_large_requests() {
        let clock = FakeClock::fixed();
        let gw = Gateway::builder(Arc::new(Flaky { failures: 0, calls: AtomicU32::new(0) }), Arc::new(clock))
            .token_cap(Some(10))
            .build();
        let err = gw.complete(&CompletionRequest::new("one two three four five six seven eight", 3, "content")).unwrap_err();
        assert!(matches!(err, GatewayError::BudgetExceeded { needed: 11, remaining: 10 }));
        // a small request fits, and consumes budget
        gw.complete(&CompletionRequest::new("one two", 3, "content")).unwrap();
        assert_eq!(gw.usage().total_tokens(), 3);
        assert!(gw.complete(&CompletionRequest::new("a b c d e", 3, "content")).is_err());
    }

    #[test]
    fn request_validation() {
        let clock = FakeClock::fixed();
        let gw = gateway(0, &clock);
        assert!(matches!(gw.complete(&CompletionRequest::new("", 3, "x")), Err(GatewayError::InvalidRequest(_))));
        assert!(matches!(gw.complete(&CompletionRequest::new("p", 0, "x")), Err(GatewayError::InvalidRequest(_))));
        let mut hot = CompletionRequest::new("p", 1, "x");
        hot.temperature = 2.5;
        assert!(gw.complete(&hot).is_err());
    }

    #[test]
    fn backoff_schedule() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay_after(1), Duration::from_secs(1));
        assert_eq!(p.delay_after(2), Duration::from_secs(2));
        assert_eq!(p.delay_after(3), Duration::from_secs(4));
    }
}

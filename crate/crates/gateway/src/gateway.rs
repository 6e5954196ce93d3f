use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use regex::{RegexSet, RegexSetBuilder};
use serde::Serialize;
use tokio::sync::Semaphore;

use crate::cache::ResponseCache;
use crate::config::{default_refusal_patterns, GatewayConfig, DEFAULT_MAX_IN_FLIGHT, DEFAULT_TEMPERATURE_CEILING};
use crate::error::GatewayError;
use crate::http::HttpProvider;
use crate::provider::{Provider, ProviderFailure, ReplayProvider};
use crate::types::{cache_key, ChatRequest, ChatResponse, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub base: Duration,
    pub cap: Duration,
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based): base * 2^retry, capped.
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry).unwrap_or(u32::MAX);
        self.base.saturating_mul(factor).min(self.cap)
    }
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base: Duration::from_millis(500),
            cap: Duration::from_secs(16),
        }
    }
}

#[derive(Debug, Default)]
struct Counters {
    requests: AtomicU64,
    cache_hits: AtomicU64,
    provider_attempts: AtomicU64,
    retries: AtomicU64,
    refusals: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct GatewayStats {
    /// Calls to [`Gateway::complete`] that passed validation and routing.
    pub requests: u64,
    pub cache_hits: u64,
    pub provider_attempts: u64,
    pub retries: u64,
    pub refusals: u64,
}

struct Slot {
    provider: Arc<dyn Provider>,
    permits: Arc<Semaphore>,
}

pub struct Gateway {
    slots: Vec<Slot>,
    by_name: HashMap<String, usize>,
    routes: HashMap<String, usize>,
    default_route: Option<usize>,
    cache: Option<Arc<ResponseCache>>,
    retry: RetryPolicy,
    temperature_ceiling: f64,
    refusals: RegexSet,
    counters: Counters,
}

pub struct GatewayBuilder {
    providers: Vec<(Arc<dyn Provider>, usize)>,
    routes: Vec<(String, String)>,
    default_provider: Option<String>,
    cache: Option<Arc<ResponseCache>>,
    retry: RetryPolicy,
    temperature_ceiling: f64,
    refusal_patterns: Vec<String>,
    max_in_flight: usize,
}

impl Default for GatewayBuilder {
    fn default() -> Self {
        Self {
            providers: Vec::new(),
            routes: Vec::new(),
            default_provider: None,
            cache: None,
            retry: RetryPolicy::default(),
            temperature_ceiling: DEFAULT_TEMPERATURE_CEILING,
            refusal_patterns: default_refusal_patterns(),
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
        }
    }
}

impl GatewayBuilder {
    /// Sets the in-flight limit for providers added after this call.
    pub fn max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }

    pub fn provider(mut self, provider: Arc<dyn Provider>) -> Self {
        let limit = self.max_in_flight;
        self.providers.push((provider, limit));
        self
    }

    pub fn provider_with_limit(mut self, provider: Arc<dyn Provider>, max_in_flight: usize) -> Self {
        self.providers.push((provider, max_in_flight.max(1)));
        self
    }

    pub fn route(mut self, model_id: impl Into<String>, provider: impl Into<String>) -> Self {
        self.routes.push((model_id.into(), provider.into()));
        self
    }

    pub fn default_provider(mut self, provider: impl Into<String>) -> Self {
        self.default_provider = Some(provider.into());
        self
    }

    pub fn cache(mut self, cache: Arc<ResponseCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn temperature_ceiling(mut self, ceiling: f64) -> Self {
        self.temperature_ceiling = ceiling;
        self
    }

    pub fn refusal_patterns(mut self, patterns: Vec<String>) -> Self {
        self.refusal_patterns = patterns;
        self
    }

    pub fn build(self) -> Result<Gateway, GatewayError> {
        if !(0.0..=1.0).contains(&self.temperature_ceiling) {
            return Err(GatewayError::Config(format!(
                "temperature ceiling {} outside [0, 1]",
                self.temperature_ceiling
            )));
        }
        let mut slots = Vec::new();
        let mut by_name = HashMap::new();
        for (provider, limit) in self.providers {
            let name = provider.name().to_string();
            if by_name.insert(name.clone(), slots.len()).is_some() {
                return Err(GatewayError::Config(format!("provider {name} registered twice")));
            }
            slots.push(Slot {
                provider,
                permits: Arc::new(Semaphore::new(limit)),
            });
        }
        let lookup = |name: &str| {
            by_name
                .get(name)
                .copied()
                .ok_or_else(|| GatewayError::Config(format!("route names unknown provider {name}")))
        };
        let mut routes = HashMap::new();
        for (model, provider) in &self.routes {
            routes.insert(model.clone(), lookup(provider)?);
        }
        let default_route = self.default_provider.as_deref().map(lookup).transpose()?;
        let refusals = RegexSetBuilder::new(&self.refusal_patterns)
            .case_insensitive(true)
            .multi_line(false)
            .build()
            .map_err(|e| GatewayError::Config(format!("refusal pattern: {e}")))?;
        Ok(Gateway {
            slots,
            by_name,
            routes,
            default_route,
            cache: self.cache,
            retry: self.retry,
            temperature_ceiling: self.temperature_ceiling,
            refusals,
            counters: Counters::default(),
        })
    }
}

impl Gateway {
    pub fn builder() -> GatewayBuilder {
        GatewayBuilder::default()
    }

    /// Builds providers, routes and the cache described by `config`.
    /// Credentials are looked up now but only required on first use.
    pub fn from_config(config: &GatewayConfig) -> Result<Self, GatewayError> {
        let mut builder = Gateway::builder()
            .retry(RetryPolicy {
                max_retries: config.max_retries,
                base: Duration::from_millis(config.backoff_base_ms),
                cap: Duration::from_millis(config.backoff_cap_ms),
            })
            .temperature_ceiling(config.temperature_ceiling)
            .refusal_patterns(config.refusal_patterns.clone());
        for (name, pc) in &config.providers {
            let provider: Arc<dyn Provider> = match pc.kind.flavor() {
                None => {
                    let path = pc
                        .fixtures
                        .as_ref()
                        .ok_or_else(|| GatewayError::Config(format!("replay provider {name} needs `fixtures`")))?;
                    Arc::new(
                        ReplayProvider::from_file(name.clone(), path)
                            .map_err(|e| GatewayError::Config(format!("replay fixtures {}: {e}", path.display())))?,
                    )
                }
                Some(flavor) => Arc::new(HttpProvider::from_env(
                    name,
                    flavor,
                    pc.endpoint.clone(),
                    Duration::from_secs(config.request_timeout_s),
                )),
            };
            builder = builder.provider_with_limit(provider, pc.max_in_flight.unwrap_or(config.max_in_flight));
        }
        for (model, provider) in &config.models {
            builder = builder.route(model.clone(), provider.clone());
        }
        if let Some(d) = &config.default_provider {
            builder = builder.default_provider(d.clone());
        }
        if let Some(path) = &config.cache_path {
            builder = builder.cache(Arc::new(ResponseCache::open(path)?));
        }
        builder.build()
    }

    pub fn stats(&self) -> GatewayStats {
        let c = &self.counters;
        GatewayStats {
            requests: c.requests.load(Ordering::SeqCst),
            cache_hits: c.cache_hits.load(Ordering::SeqCst),
            provider_attempts: c.provider_attempts.load(Ordering::SeqCst),
            retries: c.retries.load(Ordering::SeqCst),
            refusals: c.refusals.load(Ordering::SeqCst),
        }
    }

    pub fn cache(&self) -> Option<&ResponseCache> {
        self.cache.as_deref()
    }

    pub fn temperature_ceiling(&self) -> f64 {
        self.temperature_ceiling
    }

    pub fn provider_names(&self) -> impl Iterator<Item = &str> {
        self.by_name.keys().map(String::as_str)
    }

    pub fn is_refusal(&self, text: &str) -> bool {
        self.refusals.is_match(text.trim_start())
    }

    /// Checks the request and resolves its provider without calling it.
    pub fn check(&self, req: &ChatRequest) -> Result<(), GatewayError> {
        self.validate(req)?;
        self.route(&req.model_id).map(|_| ())
    }

    fn validate(&self, req: &ChatRequest) -> Result<(), GatewayError> {
        if req.system_prompt.trim().is_empty() || req.user_prompt.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("prompts must be non-empty".into()));
        }
        if !req.temperature.is_finite() || req.temperature < 0.0 || req.temperature > self.temperature_ceiling {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, {}]",
                req.temperature, self.temperature_ceiling
            )));
        }
        if req.max_output_tokens == 0 {
            return Err(GatewayError::InvalidRequest(
                "max_output_tokens must be positive".into(),
            ));
        }
        Ok(())
    }

    fn route(&self, model_id: &str) -> Result<&Slot, GatewayError> {
        self.routes
            .get(model_id)
            .copied()
            .or(self.default_route)
            .map(|i| &self.slots[i])
            .ok_or_else(|| GatewayError::UnknownModel(model_id.to_string()))
    }

    pub async fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        self.validate(req)?;
        let slot = self.route(&req.model_id)?;
        self.counters.requests.fetch_add(1, Ordering::SeqCst);
        let key = cache_key(req);

        if let Some(text) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            self.counters.cache_hits.fetch_add(1, Ordering::SeqCst);
            return Ok(self.respond(req, text, 0, true));
        }

        let _permit = slot.permits.acquire().await.expect("semaphore never closed");
        let started = Instant::now();
        let mut retry = 0;
        let reply = loop {
            self.counters.provider_attempts.fetch_add(1, Ordering::SeqCst);
            match slot.provider.complete(req).await {
                Ok(reply) => break reply,
                Err(ProviderFailure::Transient { status, body }) if retry < self.retry.max_retries => {
                    let delay = self.retry.delay(retry);
                    tracing::warn!(provider = slot.provider.name(), ?status, retry, ?delay, %body, "transient provider failure");
                    self.counters.retries.fetch_add(1, Ordering::SeqCst);
                    retry += 1;
                    tokio::time::sleep(delay).await;
                }
                Err(ProviderFailure::Transient { status, body } | ProviderFailure::Fatal { status, body }) => {
                    return Err(GatewayError::ProviderError { status, body });
                }
                Err(ProviderFailure::MissingCredentials { env_var }) => {
                    return Err(GatewayError::MissingCredentials {
                        provider: slot.provider.name().to_string(),
                        env_var,
                    });
                }
            }
        };
        let latency_ms = started.elapsed().as_millis() as u64;
        if !reply.stored {
            // written once, after the final successful attempt
            if let Some(cache) = &self.cache {
                cache.put(&key, &reply.text)?;
            }
        }
        Ok(self.respond(req, reply.text, latency_ms, reply.stored))
    }

    fn respond(&self, req: &ChatRequest, text: String, latency_ms: u64, cached: bool) -> ChatResponse {
        let outcome = if self.is_refusal(&text) {
            self.counters.refusals.fetch_add(1, Ordering::SeqCst);
            Outcome::Refusal
        } else {
            Outcome::Completed
        };
        ChatResponse {
            text,
            model_id: req.model_id.clone(),
            latency_ms,
            cached,
            outcome,
        }
    }
}

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use async_trait::async_trait;

use crate::cache::load_records;
use crate::types::{cache_key, CacheKey, ChatRequest};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderFailure {
    /// Worth retrying: rate limits, server errors, connection failures.
    Transient {
        status: Option<u16>,
        body: String,
    },
    Fatal {
        status: Option<u16>,
        body: String,
    },
    MissingCredentials {
        env_var: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderReply {
    pub text: String,
    /// True when the text came from stored fixtures rather than a live model.
    pub stored: bool,
}

#[async_trait]
pub trait Provider: Send + Sync {
    fn name(&self) -> &str;
    async fn complete(&self, req: &ChatRequest) -> Result<ProviderReply, ProviderFailure>;
}

/// Serves stored completions keyed by request digest; a miss is fatal.
pub struct ReplayProvider {
    name: String,
    fixtures: HashMap<CacheKey, String>,
}

impl ReplayProvider {
    pub fn new(name: impl Into<String>, fixtures: HashMap<CacheKey, String>) -> Self {
        Self {
            name: name.into(),
            fixtures,
        }
    }

    pub fn from_file(name: impl Into<String>, path: &Path) -> std::io::Result<Self> {
        Ok(Self::new(name, load_records(path)?))
    }

    pub fn len(&self) -> usize {
        self.fixtures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixtures.is_empty()
    }
}

#[async_trait]
impl Provider for ReplayProvider {
    fn name(&self) -> &str {
        &self.name
    }

    async fn complete(&self, req: &ChatRequest) -> Result<ProviderReply, ProviderFailure> {
        let key = cache_key(req);
        match self.fixtures.get(&key) {
            Some(text) => Ok(ProviderReply {
                text: text.clone(),
                stored: true,
            }),
            None => Err(ProviderFailure::Fatal {
                status: None,
                body: format!("no replay fixture for digest {key}"),
            }),
        }
    }
}

type Responder = dyn Fn(&ChatRequest, u64) -> Result<String, ProviderFailure> + Send + Sync;

/// Answers from a closure given the request and a 0-based call counter.
/// Intended for tests and offline fixture generation.
pub struct FnProvider {
    name: String,
    calls: AtomicU64,
    respond: Box<Responder>,
}

impl FnProvider {
    pub fn new(
        name: impl Into<String>,
        respond: impl Fn(&ChatRequest, u64) -> Result<String, ProviderFailure> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            calls: AtomicU64::new(0),
            respond: Box::new(respond),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl Provider for FnProvider {
    fn name(&self) -> &str {
        &self.name
    }

    async fn complete(&self, req: &ChatRequest) -> Result<ProviderReply, ProviderFailure> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        (self.respond)(req, n).map(|text| ProviderReply { text, stored: false })
    }
}

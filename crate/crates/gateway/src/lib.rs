//! Chat-completion gateway: one `complete` call over hosted providers and a
//! digest-keyed replay store, with retries, bounded concurrency and an
//! append-only response cache.

pub mod cache;
pub mod config;
mod error;
mod gateway;
pub mod http;
pub mod provider;
mod types;

pub use cache::{CacheRecord, ResponseCache};
pub use config::{GatewayConfig, ProviderConfig, ProviderKind};
pub use error::GatewayError;
pub use gateway::{Gateway, GatewayBuilder, GatewayStats, RetryPolicy};
pub use http::{credential_env_var, ApiFlavor, HttpProvider};
pub use provider::{FnProvider, Provider, ProviderFailure, ProviderReply, ReplayProvider};
pub use types::{
    cache_key, canonical_key_json, CacheKey, ChatRequest, ChatResponse, Outcome, DEFAULT_MAX_OUTPUT_TOKENS,
};

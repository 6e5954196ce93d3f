use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::http::ApiFlavor;

pub const DEFAULT_TEMPERATURE_CEILING: f64 = 0.3;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

/// Case-insensitive regexes; a completion matching any of them is a refusal.
pub fn default_refusal_patterns() -> Vec<String> {
    [
        r"^\W*I(?:'m| am) sorry,? (?:but )?I (?:can(?:not|'t)|won't|am unable to)",
        r"^\W*I (?:can(?:not|'t)|won't) (?:help|assist|comply|provide|translate|do that)",
        r"^\W*I(?:'m| am) (?:unable|not able) to",
        r"\bas an AI(?: language)? model\b",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Openai,
    Anthropic,
    Gemini,
    Replay,
}

impl ProviderKind {
    pub fn flavor(self) -> Option<ApiFlavor> {
        match self {
            ProviderKind::Openai => Some(ApiFlavor::Openai),
            ProviderKind::Anthropic => Some(ApiFlavor::Anthropic),
            ProviderKind::Gemini => Some(ApiFlavor::Gemini),
            ProviderKind::Replay => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Replay record file; required for `kind = "replay"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixtures: Option<PathBuf>,
    /// Overrides the gateway-wide in-flight limit for this provider.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_in_flight: Option<usize>,
}

fn d_max_in_flight() -> usize {
    DEFAULT_MAX_IN_FLIGHT
}
fn d_max_retries() -> u32 {
    3
}
fn d_backoff_base_ms() -> u64 {
    500
}
fn d_backoff_cap_ms() -> u64 {
    16_000
}
fn d_timeout_s() -> u64 {
    120
}
fn d_ceiling() -> f64 {
    DEFAULT_TEMPERATURE_CEILING
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_path: Option<PathBuf>,
    #[serde(default = "d_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "d_max_retries")]
    pub max_retries: u32,
    #[serde(default = "d_backoff_base_ms")]
    pub backoff_base_ms: u64,
    #[serde(default = "d_backoff_cap_ms")]
    pub backoff_cap_ms: u64,
    #[serde(default = "d_timeout_s")]
    pub request_timeout_s: u64,
    #[serde(default = "d_ceiling")]
    pub temperature_ceiling: f64,
    #[serde(default = "default_refusal_patterns")]
    pub refusal_patterns: Vec<String>,
    #[serde(default)]
    pub providers: BTreeMap<String, ProviderConfig>,
    /// model id -> provider name
    #[serde(default)]
    pub models: BTreeMap<String, String>,
    /// Provider for model ids missing from `models`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_provider: Option<String>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl GatewayConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Interprets relative file paths against `base` (normally the config file's directory).
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.cache_path.as_mut() {
            fix(p);
        }
        for provider in self.providers.values_mut() {
            if let Some(p) = provider.fixtures.as_mut() {
                fix(p);
            }
        }
    }

    /// A config that answers every model from one replay file.
    pub fn replay_only(fixtures: PathBuf) -> Self {
        let mut config = Self::default();
        config.providers.insert(
            "replay".into(),
            ProviderConfig {
                kind: ProviderKind::Replay,
                endpoint: None,
                fixtures: Some(fixtures),
                max_in_flight: None,
            },
        );
        config.default_provider = Some("replay".into());
        config
    }
}

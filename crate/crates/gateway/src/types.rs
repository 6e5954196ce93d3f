use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub system_prompt: String,
    pub user_prompt: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl ChatRequest {
    /// Temperature 0.0 and the default output cap.
    pub fn new(model_id: impl Into<String>, system_prompt: impl Into<String>, user_prompt: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            system_prompt: system_prompt.into(),
            user_prompt: user_prompt.into(),
            temperature: 0.0,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_max_output_tokens(mut self, max_output_tokens: u32) -> Self {
        self.max_output_tokens = max_output_tokens;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    /// The text matched a configured refusal pattern.
    Refusal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    /// Verbatim completion, untrimmed.
    pub text: String,
    pub model_id: String,
    pub latency_ms: u64,
    pub cached: bool,
    pub outcome: Outcome,
}

impl ChatResponse {
    pub fn is_refusal(&self) -> bool {
        self.outcome == Outcome::Refusal
    }
}

/// SHA-256 digest of a request's identity, as 64 lowercase hex characters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct CacheKey(String);

impl From<CacheKey> for String {
    fn from(k: CacheKey) -> String {
        k.0
    }
}

impl TryFrom<String> for CacheKey {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        CacheKey::parse(&s).ok_or_else(|| format!("not a 64-char lowercase hex digest: {s:?}"))
    }
}

impl CacheKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Accepts an existing digest string; `None` unless it is 64 lowercase hex chars.
    pub fn parse(digest: &str) -> Option<Self> {
        let ok = digest.len() == 64 && digest.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
        ok.then(|| Self(digest.to_string()))
    }
}

impl std::fmt::Display for CacheKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Serialize)]
struct KeyFields<'a> {
    model_id: &'a str,
    system_prompt: &'a str,
    user_prompt: &'a str,
    temperature: f64,
}

/// The exact bytes hashed into a [`CacheKey`]: compact JSON with fields in the
/// order model_id, system_prompt, user_prompt, temperature.
pub fn canonical_key_json(req: &ChatRequest) -> String {
    serde_json::to_string(&KeyFields {
        model_id: &req.model_id,
        system_prompt: &req.system_prompt,
        user_prompt: &req.user_prompt,
        temperature: req.temperature,
    })
    .expect("string and float fields always serialize")
}

pub fn cache_key(req: &ChatRequest) -> CacheKey {
    CacheKey(hex::encode(Sha256::digest(canonical_key_json(req).as_bytes())))
}

//! Chat-completion clients for the hosted provider APIs.

use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::provider::{Provider, ProviderFailure, ProviderReply};
use crate::types::ChatRequest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiFlavor {
    Openai,
    Anthropic,
    Gemini,
}

impl ApiFlavor {
    pub fn default_endpoint(self) -> &'static str {
        match self {
            ApiFlavor::Openai => "https://api.openai.com/v1/chat/completions",
            ApiFlavor::Anthropic => "https://api.anthropic.com/v1/messages",
            ApiFlavor::Gemini => "https://generativelanguage.googleapis.com/v1beta/models/{model}:generateContent",
        }
    }
}

const ANTHROPIC_VERSION: &str = "2023-06-01";

pub fn credential_env_var(provider_name: &str) -> String {
    let upper: String = provider_name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_uppercase()
            } else {
                '_'
            }
        })
        .collect();
    format!("MAATS_API_KEY_{upper}")
}

pub struct HttpProvider {
    name: String,
    flavor: ApiFlavor,
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::Client,
}

impl HttpProvider {
    /// Reads the key from `MAATS_API_KEY_<NAME>`. A missing key surfaces on the
    /// first call, so configs may list providers that a run never uses.
    pub fn from_env(name: &str, flavor: ApiFlavor, endpoint: Option<String>, timeout: Duration) -> Self {
        let api_key = std::env::var(credential_env_var(name)).ok().filter(|k| !k.is_empty());
        Self::new(name, flavor, endpoint, api_key, timeout)
    }

    pub fn new(
        name: &str,
        flavor: ApiFlavor,
        endpoint: Option<String>,
        api_key: Option<String>,
        timeout: Duration,
    ) -> Self {
        Self {
            name: name.to_string(),
            flavor,
            endpoint: endpoint.unwrap_or_else(|| flavor.default_endpoint().to_string()),
            api_key,
            client: reqwest::Client::builder()
                .timeout(timeout)
                .build()
                .expect("static client configuration"),
        }
    }

    fn request(&self, req: &ChatRequest, key: &str) -> reqwest::RequestBuilder {
        match self.flavor {
            ApiFlavor::Openai => self.client.post(&self.endpoint).bearer_auth(key).json(&json!({
                "model": req.model_id,
                "messages": [
                    {"role": "system", "content": req.system_prompt},
                    {"role": "user", "content": req.user_prompt},
                ],
                "temperature": req.temperature,
                "max_tokens": req.max_output_tokens,
            })),
            ApiFlavor::Anthropic => self
                .client
                .post(&self.endpoint)
                .header("x-api-key", key)
                .header("anthropic-version", ANTHROPIC_VERSION)
                .json(&json!({
                    "model": req.model_id,
                    "system": req.system_prompt,
                    "messages": [{"role": "user", "content": req.user_prompt}],
                    "temperature": req.temperature,
                    "max_tokens": req.max_output_tokens,
                })),
            ApiFlavor::Gemini => self
                .client
                .post(self.endpoint.replace("{model}", &req.model_id))
                .header("x-goog-api-key", key)
                .json(&json!({
                    "systemInstruction": {"parts": [{"text": req.system_prompt}]},
                    "contents": [{"role": "user", "parts": [{"text": req.user_prompt}]}],
                    "generationConfig": {
                        "temperature": req.temperature,
                        "maxOutputTokens": req.max_output_tokens,
                    },
                })),
        }
    }
}

/// Pulls the completion text out of a provider response body.
pub fn extract_text(flavor: ApiFlavor, body: &Value) -> Option<String> {
    let joined = |parts: &Vec<Value>, field: &str| -> Option<String> {
        let texts: Vec<&str> = parts.iter().filter_map(|p| p.get(field)?.as_str()).collect();
        (!texts.is_empty()).then(|| texts.concat())
    };
    match flavor {
        ApiFlavor::Openai => body
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string),
        ApiFlavor::Anthropic => joined(body.get("content")?.as_array()?, "text"),
        ApiFlavor::Gemini => joined(body.pointer("/candidates/0/content/parts")?.as_array()?, "text"),
    }
}

fn is_transient(status: u16) -> bool {
    status == 408 || status == 429 || (500..600).contains(&status)
}

#[async_trait]
impl Provider for HttpProvider {
    fn name(&self) -> &str {
        &self.name
    }

    async fn complete(&self, req: &ChatRequest) -> Result<ProviderReply, ProviderFailure> {
        let Some(key) = self.api_key.as_deref() else {
            return Err(ProviderFailure::MissingCredentials {
                env_var: credential_env_var(&self.name),
            });
        };
        let response = self
            .request(req, key)
            .send()
            .await
            .map_err(|e| ProviderFailure::Transient {
                status: None,
                body: e.to_string(),
            })?;
        let status = response.status().as_u16();
        let body = response.text().await.map_err(|e| ProviderFailure::Transient {
            status: Some(status),
            body: e.to_string(),
        })?;
        if !(200..300).contains(&status) {
            return Err(if is_transient(status) {
                ProviderFailure::Transient {
                    status: Some(status),
                    body,
                }
            } else {
                ProviderFailure::Fatal {
                    status: Some(status),
                    body,
                }
            });
        }
        let parsed: Value = serde_json::from_str(&body).map_err(|e| ProviderFailure::Fatal {
            status: Some(status),
            body: format!("unparseable response body: {e}"),
        })?;
        match extract_text(self.flavor, &parsed) {
            Some(text) => Ok(ProviderReply { text, stored: false }),
            None => Err(ProviderFailure::Fatal {
                status: Some(status),
                body: format!("no completion text in response: {body}"),
            }),
        }
    }
}

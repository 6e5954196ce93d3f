use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("unknown model: {0}")]
    UnknownModel(String),
    #[error("missing credentials for provider {provider}: set {env_var}")]
    MissingCredentials { provider: String, env_var: String },
    #[error("provider error (status {}): {body}", status.map(|s| s.to_string()).unwrap_or_else(|| "none".into()))]
    ProviderError { status: Option<u16>, body: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("cache error: {0}")]
    Cache(#[from] std::io::Error),
}

impl GatewayError {
    /// Stable snake_case tag for machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            GatewayError::UnknownModel(_) => "unknown_model",
            GatewayError::MissingCredentials { .. } => "missing_credentials",
            GatewayError::ProviderError { .. } => "provider_error",
            GatewayError::InvalidRequest(_) => "invalid_request",
            GatewayError::Config(_) => "config",
            GatewayError::Cache(_) => "cache",
        }
    }
}

//! The TOML configuration file shared by every subcommand.

use std::path::{Path, PathBuf};

use maats_core::EditorContext;
use maats_gateway::GatewayConfig;
use maats_pipeline::{OrchestratorConfig, ReportConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub evaluator_concurrency: usize,
    pub segment_concurrency: usize,
    pub editor_token_budget: usize,
    pub editor_context: EditorContext,
    /// Directory of `<template>.txt` prompt overrides.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompts_dir: Option<PathBuf>,
    /// Accept language codes outside the supported set.
    pub allow_any_language: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        let o = OrchestratorConfig::default();
        Self {
            temperature: o.temperature,
            max_output_tokens: o.max_output_tokens,
            evaluator_concurrency: o.evaluator_concurrency,
            segment_concurrency: 1,
            editor_token_budget: o.editor_token_budget,
            editor_context: o.editor_context,
            prompts_dir: None,
            allow_any_language: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSection {
    pub resamples: usize,
    pub seed: u64,
    pub fluency_label: bool,
}

impl Default for ReportSection {
    fn default() -> Self {
        let r = ReportConfig::default();
        Self {
            resamples: r.resamples,
            seed: r.seed,
            fluency_label: r.fluency_label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    /// Root holding `runs/` and `rankings/`.
    pub store: PathBuf,
    pub gateway: GatewayConfig,
    pub run: RunSection,
    pub report: ReportSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            store: PathBuf::from("maats-store"),
            gateway: GatewayConfig::default(),
            run: RunSection::default(),
            report: ReportSection::default(),
        }
    }
}

impl Config {
    /// Parses `path` and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::new("config", format!("{}: {e}", path.display())))?;
        let mut config: Config =
            toml::from_str(&text).map_err(|e| CliError::new("config", format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if self.store.is_relative() {
            self.store = base.join(&self.store);
        }
        if let Some(p) = self.run.prompts_dir.as_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        self.gateway.resolve_paths(base);
    }

    pub fn orchestrator(&self) -> OrchestratorConfig {
        OrchestratorConfig {
            temperature: self.run.temperature,
            max_output_tokens: self.run.max_output_tokens,
            evaluator_concurrency: self.run.evaluator_concurrency,
            strict: false,
            editor_context: self.run.editor_context,
            editor_token_budget: self.run.editor_token_budget,
        }
    }

    pub fn report(&self) -> ReportConfig {
        ReportConfig {
            resamples: self.report.resamples,
            seed: self.report.seed,
            fluency_label: self.report.fluency_label,
            ..ReportConfig::default()
        }
    }
}

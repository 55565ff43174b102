//! Backend configuration, loadable from a JSON file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::mock::{MockRule, ScriptedMock};
use super::{HttpBackend, TextBackend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Http,
}

/// Backend selection plus connection settings.
///
/// Model identifier strings are opaque config data. Credentials are never
/// stored in the file; `api_key_env` names the environment variable that
/// holds the key for HTTP backends.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint: String,
    /// Default generation model.
    #[serde(default)]
    pub model: String,
    /// Judge model; falls back to `model` when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_model: Option<String>,
    /// Embedding model (HTTP backends only).
    #[serde(default)]
    pub embed_model: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_dimension")]
    pub embedding_dimension: usize,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    /// Scripted rules (mock backends only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rules: Vec<MockRule>,
}

fn default_timeout() -> u64 {
    60
}

fn default_dimension() -> usize {
    ScriptedMock::DEFAULT_DIMENSION
}

fn default_api_key_env() -> String {
    "MEMGATE_API_KEY".to_string()
}

impl BackendConfig {
    pub fn mock(rules: Vec<MockRule>) -> Self {
        Self {
            kind: BackendKind::Mock,
            endpoint: String::new(),
            model: String::new(),
            judge_model: None,
            embed_model: String::new(),
            timeout_secs: default_timeout(),
            embedding_dimension: default_dimension(),
            api_key_env: default_api_key_env(),
            rules,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: BackendConfig = serde_json::from_str(&raw)
            .map_err(|e| Error::Config(format!("backend config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            BackendKind::Http if self.endpoint.is_empty() => Err(Error::Config(
                "http backend requires an endpoint URL".to_string(),
            )),
            _ if self.embedding_dimension == 0 => Err(Error::Config(
                "embedding_dimension must be at least 1".to_string(),
            )),
            _ => Ok(()),
        }
    }

    pub fn judge_model(&self) -> &str {
        self.judge_model.as_deref().unwrap_or(&self.model)
    }

    /// Build a fresh backend instance.
    ///
    /// Run orchestration builds one instance per user so that mock response
    /// cursors never interleave across parallel user jobs.
    pub fn build(&self) -> Result<Box<dyn TextBackend>> {
        self.validate()?;
        match self.kind {
            BackendKind::Mock => Ok(Box::new(ScriptedMock::new(
                self.rules.clone(),
                self.embedding_dimension,
            ))),
            BackendKind::Http => Ok(Box::new(HttpBackend::new(self.clone())?)),
        }
    }
}

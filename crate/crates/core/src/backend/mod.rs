//! Pluggable text-generation and embedding backend.
//!
//! Every operation in the engine that depends on a language model or an
//! embedding model goes through [`TextBackend`]. Two implementations ship:
//! an HTTP client speaking an OpenAI-style API, and [`mock::ScriptedMock`],
//! a deterministic scripted backend for offline runs and tests.

mod config;
mod http;
pub mod jsonx;
pub mod mock;

pub use config::{BackendConfig, BackendKind};
pub use http::HttpBackend;

use serde::{Deserialize, Serialize};

use crate::error::{BackendError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

/// One text-generation call.
///
/// `model_id` is opaque config data; the empty string means "use the
/// backend's configured default model". Temperature defaults to 0 so that
/// runs are as deterministic as the backend allows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub system_prompt: String,
    pub messages: Vec<(Role, String)>,
    pub model_id: String,
    pub temperature: f64,
}

impl GenerationRequest {
    pub fn new(system_prompt: impl Into<String>, user_text: impl Into<String>) -> Self {
        Self {
            system_prompt: system_prompt.into(),
            messages: vec![(Role::User, user_text.into())],
            model_id: String::new(),
            temperature: 0.0,
        }
    }

    pub fn with_messages(system_prompt: impl Into<String>, messages: Vec<(Role, String)>) -> Self {
        Self {
            system_prompt: system_prompt.into(),
            messages,
            model_id: String::new(),
            temperature: 0.0,
        }
    }

    pub fn with_model(mut self, model_id: impl Into<String>) -> Self {
        self.model_id = model_id.into();
        self
    }

    /// Full request text, used by the mock for substring rule matching.
    pub fn flattened(&self) -> String {
        let mut out = self.system_prompt.clone();
        for (_, text) in &self.messages {
            out.push('\n');
            out.push_str(text);
        }
        out
    }
}

/// Fixed-dimension embedding.
///
/// All vectors produced by one backend instance share a dimension; text
/// that is non-empty embeds to a vector with non-zero norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    pub values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Self {
        Self { values }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt()
    }

    /// Cosine similarity, or `None` when either vector has zero norm or the
    /// dimensions disagree.
    pub fn cosine(&self, other: &EmbeddingVector) -> Option<f64> {
        if self.values.len() != other.values.len() {
            return None;
        }
        let dot: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f64::from(a) * f64::from(b))
            .sum();
        let na = self.norm();
        let nb = other.norm();
        if na == 0.0 || nb == 0.0 {
            return None;
        }
        Some(dot / (na * nb))
    }
}

/// Text-generation plus embedding abstraction.
///
/// Implementations must be safe for concurrent request issue; callers must
/// not assume response ordering across concurrent requests.
pub trait TextBackend: Send + Sync {
    /// Generate a completion. Returns non-empty text or a typed error;
    /// never blocks past the configured timeout.
    fn generate(&self, request: &GenerationRequest) -> Result<String>;

    /// Embed non-empty text into the backend's configured dimension.
    /// Pure function of its input for a fixed backend configuration.
    fn embed(&self, text: &str) -> Result<EmbeddingVector>;
}

pub(crate) fn require_non_empty_text(text: &str) -> Result<()> {
    if text.is_empty() {
        Err(BackendError::EmptyText.into())
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_basics() {
        let a = EmbeddingVector::new(vec![1.0, 0.0]);
        let b = EmbeddingVector::new(vec![0.0, 1.0]);
        let c = EmbeddingVector::new(vec![2.0, 0.0]);
        assert_eq!(a.cosine(&b), Some(0.0));
        assert_eq!(a.cosine(&c), Some(1.0));
        let z = EmbeddingVector::new(vec![0.0, 0.0]);
        assert_eq!(a.cosine(&z), None);
        let short = EmbeddingVector::new(vec![1.0]);
        assert_eq!(a.cosine(&short), None);
    }

    #[test]
    fn request_defaults_to_temperature_zero() {
        let req = GenerationRequest::new("sys", "hello");
        assert_eq!(req.temperature, 0.0);
        assert!(req.model_id.is_empty());
    }
}

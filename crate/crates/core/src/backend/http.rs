//! HTTP backend speaking an OpenAI-style chat/embeddings API.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use crate::error::{BackendError, Result};

use super::{require_non_empty_text, BackendConfig, EmbeddingVector, GenerationRequest, Role, TextBackend};

pub struct HttpBackend {
    config: BackendConfig,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedDatum>,
}

#[derive(Deserialize)]
struct EmbedDatum {
    embedding: Vec<f32>,
}

impl HttpBackend {
    pub fn new(config: BackendConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let api_key = std::env::var(&config.api_key_env).ok();
        Ok(Self {
            config,
            client,
            api_key,
        })
    }

    fn post(&self, path: &str, body: serde_json::Value) -> Result<serde_json::Value> {
        let url = format!("{}/{}", self.config.endpoint.trim_end_matches('/'), path);
        let mut request = self.client.post(&url).json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout(self.config.timeout_secs)
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        let status = response.status();
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(BackendError::Transport(format!("{url}: HTTP {status}: {body}")).into());
        }
        response
            .json()
            .map_err(|e| BackendError::Protocol(e.to_string()).into())
    }
}

impl TextBackend for HttpBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<String> {
        let model = if request.model_id.is_empty() {
            self.config.model.as_str()
        } else {
            request.model_id.as_str()
        };
        let mut messages = Vec::with_capacity(request.messages.len() + 1);
        if !request.system_prompt.is_empty() {
            messages.push(json!({"role": "system", "content": request.system_prompt}));
        }
        for (role, text) in &request.messages {
            let role = match role {
                Role::System => "system",
                Role::User => "user",
                Role::Assistant => "assistant",
            };
            messages.push(json!({"role": role, "content": text}));
        }
        let body = json!({
            "model": model,
            "messages": messages,
            "temperature": request.temperature,
        });
        let value = self.post("chat/completions", body)?;
        let parsed: ChatResponse = serde_json::from_value(value)
            .map_err(|e| BackendError::Protocol(format!("chat response: {e}")))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .unwrap_or_default();
        if content.is_empty() {
            return Err(BackendError::EmptyReply.into());
        }
        Ok(content)
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        require_non_empty_text(text)?;
        let body = json!({
            "model": self.config.embed_model,
            "input": text,
        });
        let value = self.post("embeddings", body)?;
        let parsed: EmbedResponse = serde_json::from_value(value)
            .map_err(|e| BackendError::Protocol(format!("embeddings response: {e}")))?;
        let values = parsed
            .data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .ok_or_else(|| BackendError::Protocol("embeddings response had no data".to_string()))?;
        Ok(EmbeddingVector::new(values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::BackendKind;

    fn unreachable_config() -> BackendConfig {
        let mut config = BackendConfig::mock(vec![]);
        config.kind = BackendKind::Http;
        // Port 1 is reserved and never listening here.
        config.endpoint = "http://127.0.0.1:1".to_string();
        config.timeout_secs = 2;
        config
    }

    #[test]
    fn unreachable_host_is_a_transport_error() {
        let backend = HttpBackend::new(unreachable_config()).unwrap();
        let err = backend
            .generate(&GenerationRequest::new("", "hello"))
            .unwrap_err();
        assert!(matches!(
            err,
            crate::error::Error::Backend(BackendError::Transport(_) | BackendError::Timeout(_))
        ));
    }

    #[test]
    fn unreachable_host_embed_is_a_transport_error() {
        let backend = HttpBackend::new(unreachable_config()).unwrap();
        assert!(backend.embed("x").is_err());
    }
}

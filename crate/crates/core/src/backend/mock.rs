//! Deterministic scripted backend for offline runs and tests.
//!
//! Generation is driven by an ordered rule list: the first rule whose
//! patterns are all substrings of the flattened request wins. Each rule
//! carries a response sequence; calls consume it in order and the last
//! response repeats once exhausted. Embeddings are seeded pseudo-random
//! unit vectors keyed by an FNV-1a hash of the normalized text, so
//! identical strings always map to identical vectors.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{BackendError, Result};
use crate::seeded::{fnv1a64, SeededRng};

use super::{require_non_empty_text, EmbeddingVector, GenerationRequest, TextBackend};

/// One scripted generation rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MockRule {
    /// All patterns must appear as substrings of the request text.
    pub patterns: Vec<String>,
    /// Responses consumed in order; the last one repeats.
    pub responses: Vec<String>,
}

impl MockRule {
    pub fn new<P, R>(patterns: P, responses: R) -> Self
    where
        P: IntoIterator,
        P::Item: Into<String>,
        R: IntoIterator,
        R::Item: Into<String>,
    {
        Self {
            patterns: patterns.into_iter().map(Into::into).collect(),
            responses: responses.into_iter().map(Into::into).collect(),
        }
    }

    fn matches(&self, flattened: &str) -> bool {
        self.patterns.iter().all(|p| flattened.contains(p.as_str()))
    }
}

/// Scripted mock backend. Same input sequence, same output sequence, on
/// every platform.
pub struct ScriptedMock {
    rules: Vec<MockRule>,
    dimension: usize,
    state: Mutex<MockState>,
}

#[derive(Default)]
struct MockState {
    cursors: Vec<usize>,
    request_log: Vec<GenerationRequest>,
    log_requests: bool,
}

impl ScriptedMock {
    pub const DEFAULT_DIMENSION: usize = 64;

    pub fn new(rules: Vec<MockRule>, dimension: usize) -> Self {
        let cursors = vec![0; rules.len()];
        Self {
            rules,
            dimension,
            state: Mutex::new(MockState {
                cursors,
                ..MockState::default()
            }),
        }
    }

    pub fn with_rules(rules: Vec<MockRule>) -> Self {
        Self::new(rules, Self::DEFAULT_DIMENSION)
    }

    /// Convenience: a single always-matching rule.
    pub fn single(response: &str) -> Self {
        Self::with_rules(vec![MockRule::new([""], [response])])
    }

    /// Record every generation request for later inspection (used by tests
    /// that assert on what a component sent to the model).
    pub fn enable_request_log(&self) {
        self.state.lock().unwrap().log_requests = true;
    }

    pub fn logged_requests(&self) -> Vec<GenerationRequest> {
        self.state.lock().unwrap().request_log.clone()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }
}

/// Lowercase and collapse whitespace runs, so that embedding identity is
/// insensitive to case and spacing.
pub fn normalize_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut last_space = true;
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !last_space {
                out.push(' ');
                last_space = true;
            }
        } else {
            for lc in ch.to_lowercase() {
                out.push(lc);
            }
            last_space = false;
        }
    }
    while out.ends_with(' ') {
        out.pop();
    }
    out
}

/// Deterministic unit vector keyed by the FNV-1a hash of the normalized text.
pub fn hash_embedding(text: &str, dimension: usize) -> EmbeddingVector {
    let seed = fnv1a64(normalize_text(text).as_bytes());
    let mut rng = SeededRng::new(seed);
    let mut values: Vec<f32> = (0..dimension)
        .map(|_| (rng.next_f64() * 2.0 - 1.0) as f32)
        .collect();
    let norm = values.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
    if norm == 0.0 {
        values[0] = 1.0;
    } else {
        for v in &mut values {
            *v = (f64::from(*v) / norm) as f32;
        }
    }
    EmbeddingVector::new(values)
}

impl TextBackend for ScriptedMock {
    fn generate(&self, request: &GenerationRequest) -> Result<String> {
        let flattened = request.flattened();
        let mut state = self.state.lock().unwrap();
        if state.log_requests {
            state.request_log.push(request.clone());
        }
        for (i, rule) in self.rules.iter().enumerate() {
            if rule.matches(&flattened) {
                if rule.responses.is_empty() {
                    return Err(BackendError::EmptyReply.into());
                }
                let cursor = state.cursors[i];
                let response = &rule.responses[cursor.min(rule.responses.len() - 1)];
                state.cursors[i] = cursor + 1;
                if response.is_empty() {
                    return Err(BackendError::EmptyReply.into());
                }
                return Ok(response.clone());
            }
        }
        Err(BackendError::NoRule.into())
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        require_non_empty_text(text)?;
        Ok(hash_embedding(text, self.dimension))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_matching_rule_wins() {
        let mock = ScriptedMock::with_rules(vec![
            MockRule::new(["memory_required"], ["{\"memory_required\": true}"]),
            MockRule::new([""], ["fallback"]),
        ]);
        let req = GenerationRequest::new("", "please decide memory_required now");
        assert_eq!(mock.generate(&req).unwrap(), "{\"memory_required\": true}");
        let other = GenerationRequest::new("", "something else");
        assert_eq!(mock.generate(&other).unwrap(), "fallback");
    }

    #[test]
    fn unmatched_prompt_is_a_typed_error() {
        let mock = ScriptedMock::with_rules(vec![MockRule::new(["never"], ["x"])]);
        let err = mock.generate(&GenerationRequest::new("", "hello")).unwrap_err();
        assert!(matches!(
            err,
            crate::error::Error::Backend(BackendError::NoRule)
        ));
    }

    #[test]
    fn response_sequences_consume_then_repeat() {
        let mock = ScriptedMock::with_rules(vec![MockRule::new([""], ["one", "two"])]);
        let req = GenerationRequest::new("", "x");
        assert_eq!(mock.generate(&req).unwrap(), "one");
        assert_eq!(mock.generate(&req).unwrap(), "two");
        assert_eq!(mock.generate(&req).unwrap(), "two");
    }

    #[test]
    fn all_patterns_must_match() {
        let mock = ScriptedMock::with_rules(vec![MockRule::new(["alpha", "beta"], ["both"])]);
        assert!(mock.generate(&GenerationRequest::new("", "alpha only")).is_err());
        assert_eq!(
            mock.generate(&GenerationRequest::new("alpha", "and beta")).unwrap(),
            "both"
        );
    }

    #[test]
    fn embeddings_are_deterministic_unit_vectors() {
        let mock = ScriptedMock::with_rules(vec![]);
        let a1 = mock.embed("a").unwrap();
        let a2 = mock.embed("a").unwrap();
        let b = mock.embed("b").unwrap();
        assert_eq!(a1, a2);
        assert_ne!(a1, b);
        assert!((a1.norm() - 1.0).abs() < 1e-6);
        assert_eq!(a1.dimension(), ScriptedMock::DEFAULT_DIMENSION);
    }

    #[test]
    fn embedding_normalization_folds_case_and_whitespace() {
        let mock = ScriptedMock::with_rules(vec![]);
        let a = mock.embed("Budget  Set To $2000").unwrap();
        let b = mock.embed("budget set to $2000").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_text_embed_is_an_error() {
        let mock = ScriptedMock::with_rules(vec![]);
        assert!(mock.embed("").is_err());
    }

    #[test]
    fn normalize_text_examples() {
        assert_eq!(normalize_text("  Hello   World "), "hello world");
        assert_eq!(normalize_text("A\nB\tC"), "a b c");
    }
}

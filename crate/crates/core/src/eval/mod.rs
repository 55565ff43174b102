//! Evaluation: memory retention rate with checkpoint sampling, gating
//! classification metrics, and profile-diversity analysis.

mod jaccard;
mod metrics;
mod report;
mod retention;

pub use jaccard::{profile_jaccard, JaccardAnalysis};
pub use metrics::{gating_metrics, ConfusionCounts, GatingMetrics};
pub use report::{
    render_text_report, EvalReport, GatingAverages, GatingSection, PolicyReport, ReportConfigEcho,
    RetentionSection, UserRetention,
};
pub use retention::{
    indicator, retention_rate, sample_checkpoints, ReferenceRetention, RetentionOutcome,
    SnapshotStore,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the per-checkpoint presence indicator is decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeKind {
    /// Language-model judge over the retrieved entries.
    Backend,
    /// Deterministic stand-in: case/whitespace-normalized containment of
    /// the fact in any retrieved entry.
    SubstringOracle,
}

impl std::str::FromStr for JudgeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "backend" => Ok(JudgeKind::Backend),
            "substring" | "substring_oracle" => Ok(JudgeKind::SubstringOracle),
            other => Err(Error::Config(format!("unknown judge kind {other}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetentionConfig {
    /// Checkpoints sampled per reference window (K).
    pub checkpoints: usize,
    /// Retrieval depth per indicator call.
    pub k_retrieve: usize,
    pub judge: JudgeKind,
    /// Model id for the backend judge; empty uses the backend default.
    #[serde(default)]
    pub judge_model: String,
}

impl Default for RetentionConfig {
    fn default() -> Self {
        Self {
            checkpoints: 20,
            k_retrieve: 10,
            judge: JudgeKind::SubstringOracle,
            judge_model: String::new(),
        }
    }
}

impl RetentionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.checkpoints < 2 {
            return Err(Error::Config("checkpoints (K) must be at least 2".to_string()));
        }
        if self.k_retrieve < 1 {
            return Err(Error::Config("k_retrieve must be at least 1".to_string()));
        }
        Ok(())
    }
}

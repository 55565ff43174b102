//! Gating classification metrics.
//!
//! Positive class = worth-storing. A false negative misclassifies a
//! worth-storing session as transient; a false positive stores a transient
//! session unnecessarily. Zero-denominator rates surface as explicit
//! `None` markers and are excluded from macro averages, never silently
//! zeroed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gating::GateDecision;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn add(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatingMetrics {
    pub counts: ConfusionCounts,
    /// 2TP / (2TP + FP + FN); None when no positives exist anywhere.
    pub f1: Option<f64>,
    /// FN / (FN + TP); None when there are no positive labels.
    pub fnr: Option<f64>,
    /// FP / (FP + TN); None when there are no negative labels.
    pub fpr: Option<f64>,
}

impl GatingMetrics {
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        let ratio = |num: u64, den: u64| {
            if den == 0 {
                None
            } else {
                Some(num as f64 / den as f64)
            }
        };
        Self {
            f1: ratio(2 * counts.tp, 2 * counts.tp + counts.fp + counts.fn_),
            fnr: ratio(counts.fn_, counts.fn_ + counts.tp),
            fpr: ratio(counts.fp, counts.fp + counts.tn),
            counts,
        }
    }
}

/// Score decisions against ground-truth labels, aligned by session id.
pub fn gating_metrics(decisions: &[GateDecision], labels: &[(u32, bool)]) -> Result<GatingMetrics> {
    if decisions.len() != labels.len() {
        return Err(Error::Validation(format!(
            "misaligned ids: {} decisions vs {} labels",
            decisions.len(),
            labels.len()
        )));
    }
    let mut decisions: Vec<&GateDecision> = decisions.iter().collect();
    decisions.sort_by_key(|d| d.session_id);
    let mut labels: Vec<(u32, bool)> = labels.to_vec();
    labels.sort_by_key(|(id, _)| *id);

    let mut counts = ConfusionCounts::default();
    for (decision, (label_id, label)) in decisions.iter().zip(&labels) {
        if decision.session_id != *label_id {
            return Err(Error::Validation(format!(
                "misaligned ids: decision for session {} paired with label for session {label_id}",
                decision.session_id
            )));
        }
        match (decision.memory_required, *label) {
            (true, true) => counts.tp += 1,
            (true, false) => counts.fp += 1,
            (false, true) => counts.fn_ += 1,
            (false, false) => counts.tn += 1,
        }
    }
    Ok(GatingMetrics::from_counts(counts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decision(session_id: u32, memory_required: bool) -> GateDecision {
        GateDecision {
            session_id,
            memory_required,
            policy: "test".to_string(),
            rationale: None,
        }
    }

    #[test]
    fn perfect_classifier() {
        let labels: Vec<(u32, bool)> = (1..=6).map(|i| (i, i % 2 == 0)).collect();
        let decisions: Vec<GateDecision> =
            labels.iter().map(|(id, l)| decision(*id, *l)).collect();
        let metrics = gating_metrics(&decisions, &labels).unwrap();
        assert_eq!(metrics.f1, Some(1.0));
        assert_eq!(metrics.fnr, Some(0.0));
        assert_eq!(metrics.fpr, Some(0.0));
    }

    #[test]
    fn hand_computed_confusion_matrix() {
        // TP=3, FP=1, FN=1, TN=5: F1 = 0.75, FNR = 0.25, FPR = 1/6.
        let mut labels = Vec::new();
        let mut decisions = Vec::new();
        let mut id = 0;
        let mut push = |pred: bool, label: bool, n: usize| {
            for _ in 0..n {
                id += 1;
                labels.push((id, label));
                decisions.push(decision(id, pred));
            }
        };
        push(true, true, 3);
        push(true, false, 1);
        push(false, true, 1);
        push(false, false, 5);
        let metrics = gating_metrics(&decisions, &labels).unwrap();
        assert_eq!(metrics.counts.tp, 3);
        assert_eq!(metrics.f1, Some(0.75));
        assert_eq!(metrics.fnr, Some(0.25));
        assert!((metrics.fpr.unwrap() - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn all_negative_labels_leave_fnr_undefined() {
        let labels = vec![(1, false), (2, false)];
        let decisions = vec![decision(1, false), decision(2, false)];
        let metrics = gating_metrics(&decisions, &labels).unwrap();
        assert_eq!(metrics.fnr, None);
        assert_eq!(metrics.f1, None);
        assert_eq!(metrics.fpr, Some(0.0));
    }

    #[test]
    fn misaligned_inputs_error() {
        let labels = vec![(1, true), (2, false)];
        let decisions = vec![decision(1, true), decision(3, false)];
        assert!(gating_metrics(&decisions, &labels).is_err());
        assert!(gating_metrics(&decisions[..1], &labels).is_err());
    }

    #[test]
    fn confusion_counts_serialize_with_fn_key() {
        let counts = ConfusionCounts {
            tp: 1,
            fp: 2,
            fn_: 3,
            tn: 4,
        };
        let json = serde_json::to_string(&counts).unwrap();
        assert_eq!(json, r#"{"tp":1,"fp":2,"fn":3,"tn":4}"#);
    }
}

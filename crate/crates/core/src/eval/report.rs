//! Evaluation report: JSON structure plus an aligned plain-text rendering.
//!
//! All maps are BTree-backed and no timestamps or absolute paths appear,
//! so identical runs serialize to identical bytes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{GatingMetrics, JaccardAnalysis, JudgeKind, RetentionOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfigEcho {
    pub checkpoints: usize,
    pub k_retrieve: usize,
    pub judge: JudgeKind,
    pub budget: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRetention {
    pub rr: Option<f64>,
    pub numerator: f64,
    pub denominator: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl From<&RetentionOutcome> for UserRetention {
    fn from(outcome: &RetentionOutcome) -> Self {
        Self {
            rr: outcome.rr,
            numerator: outcome.numerator,
            denominator: outcome.denominator,
            warnings: outcome.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RetentionSection {
    pub per_user: BTreeMap<String, UserRetention>,
    /// Mean of per-user RR values, skipping undefined ones.
    pub macro_rr: Option<f64>,
    /// Pooled numerator over pooled denominator.
    pub micro_rr: Option<f64>,
}

impl RetentionSection {
    pub fn from_users(per_user: BTreeMap<String, UserRetention>) -> Self {
        let defined: Vec<f64> = per_user.values().filter_map(|u| u.rr).collect();
        let macro_rr = if defined.is_empty() {
            None
        } else {
            Some(defined.iter().sum::<f64>() / defined.len() as f64)
        };
        let pooled_num: f64 = per_user.values().map(|u| u.numerator).sum();
        let pooled_den: u64 = per_user.values().map(|u| u.denominator).sum();
        let micro_rr = if pooled_den == 0 {
            None
        } else {
            Some((pooled_num / pooled_den as f64).clamp(0.0, 1.0))
        };
        Self {
            per_user,
            macro_rr,
            micro_rr,
        }
    }
}

/// Macro averages over per-user metric values, skipping undefined rates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GatingAverages {
    pub f1: Option<f64>,
    pub fnr: Option<f64>,
    pub fpr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatingSection {
    pub per_user: BTreeMap<String, GatingMetrics>,
    pub macro_avg: GatingAverages,
    /// Metrics over the pooled confusion counts of all users.
    pub micro: GatingMetrics,
}

impl GatingSection {
    pub fn from_users(per_user: BTreeMap<String, GatingMetrics>) -> Self {
        let mean = |values: Vec<f64>| {
            if values.is_empty() {
                None
            } else {
                Some(values.iter().sum::<f64>() / values.len() as f64)
            }
        };
        let macro_avg = GatingAverages {
            f1: mean(per_user.values().filter_map(|m| m.f1).collect()),
            fnr: mean(per_user.values().filter_map(|m| m.fnr).collect()),
            fpr: mean(per_user.values().filter_map(|m| m.fpr).collect()),
        };
        let mut pooled = super::ConfusionCounts::default();
        for metrics in per_user.values() {
            pooled.add(&metrics.counts);
        }
        Self {
            per_user,
            macro_avg,
            micro: GatingMetrics::from_counts(pooled),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub retention: RetentionSection,
    pub gating: GatingSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: ReportConfigEcho,
    /// Keyed by policy name.
    pub policies: BTreeMap<String, PolicyReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jaccard: Option<JaccardAnalysis>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serialization");
        text.push('\n');
        text
    }
}

fn fmt_opt(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.4}"),
        None => "undef".to_string(),
    }
}

/// Aligned plain-text table mirroring the JSON report.
pub fn render_text_report(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "evaluation (K={}, top-{}, judge={:?}, budget={})\n\n",
        report.config.checkpoints,
        report.config.k_retrieve,
        report.config.judge,
        report.config.budget
    ));
    out.push_str(&format!(
        "{:<12} {:<38} {:>8} {:>8} {:>8} {:>8}\n",
        "policy", "user", "RR", "F1", "FNR", "FPR"
    ));
    for (policy, body) in &report.policies {
        for (user, retention) in &body.retention.per_user {
            let gating = body.gating.per_user.get(user);
            out.push_str(&format!(
                "{:<12} {:<38} {:>8} {:>8} {:>8} {:>8}\n",
                policy,
                user,
                fmt_opt(retention.rr),
                fmt_opt(gating.and_then(|g| g.f1)),
                fmt_opt(gating.and_then(|g| g.fnr)),
                fmt_opt(gating.and_then(|g| g.fpr)),
            ));
        }
        out.push_str(&format!(
            "{:<12} {:<38} {:>8} {:>8} {:>8} {:>8}\n",
            policy,
            "(macro)",
            fmt_opt(body.retention.macro_rr),
            fmt_opt(body.gating.macro_avg.f1),
            fmt_opt(body.gating.macro_avg.fnr),
            fmt_opt(body.gating.macro_avg.fpr),
        ));
        out.push_str(&format!(
            "{:<12} {:<38} {:>8} {:>8} {:>8} {:>8}\n",
            policy,
            "(micro)",
            fmt_opt(body.retention.micro_rr),
            fmt_opt(body.gating.micro.f1),
            fmt_opt(body.gating.micro.fnr),
            fmt_opt(body.gating.micro.fpr),
        ));
    }
    if let Some(jaccard) = &report.jaccard {
        out.push_str(&format!(
            "\nprofile jaccard: mean {:.4}, min {:.4}, max {:.4} over {} users\n",
            jaccard.mean_offdiag,
            jaccard.min_offdiag,
            jaccard.max_offdiag,
            jaccard.personas.len()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::ConfusionCounts;

    #[test]
    fn sections_aggregate_macro_and_micro() {
        let mut per_user = BTreeMap::new();
        per_user.insert(
            "a".to_string(),
            UserRetention {
                rr: Some(1.0),
                numerator: 10.0,
                denominator: 10,
                warnings: vec![],
            },
        );
        per_user.insert(
            "b".to_string(),
            UserRetention {
                rr: Some(0.5),
                numerator: 15.0,
                denominator: 30,
                warnings: vec![],
            },
        );
        let section = RetentionSection::from_users(per_user);
        assert_eq!(section.macro_rr, Some(0.75));
        assert_eq!(section.micro_rr, Some(0.625));

        let mut gating = BTreeMap::new();
        gating.insert(
            "a".to_string(),
            GatingMetrics::from_counts(ConfusionCounts {
                tp: 1,
                fp: 0,
                fn_: 0,
                tn: 0,
            }),
        );
        gating.insert(
            "b".to_string(),
            GatingMetrics::from_counts(ConfusionCounts {
                tp: 0,
                fp: 1,
                fn_: 1,
                tn: 1,
            }),
        );
        let section = GatingSection::from_users(gating);
        assert_eq!(section.micro.counts.total(), 4);
        // User a has FPR undefined (no negatives); macro skips it.
        assert_eq!(section.macro_avg.fpr, Some(0.5));
    }

    #[test]
    fn report_renders_and_round_trips() {
        let report = EvalReport {
            config: ReportConfigEcho {
                checkpoints: 20,
                k_retrieve: 10,
                judge: JudgeKind::SubstringOracle,
                budget: 200,
            },
            policies: BTreeMap::new(),
            jaccard: None,
        };
        let json = report.to_json();
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        assert!(render_text_report(&report).contains("policy"));
    }
}

//! Dataset summary statistics: per-metric min/max/avg across users.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::BenchmarkDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub min: f64,
    pub max: f64,
    pub avg: f64,
}

impl MetricSummary {
    fn from_values(values: &[f64]) -> Self {
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let avg = values.iter().sum::<f64>() / values.len() as f64;
        Self { min, max, avg }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub n_users: usize,
    pub sessions: MetricSummary,
    pub timeline_months: MetricSummary,
    pub reference_memories: MetricSummary,
    pub avg_chars_per_session: MetricSummary,
}

pub fn dataset_stats(dataset: &BenchmarkDataset) -> Result<StatsReport> {
    if dataset.users.is_empty() {
        return Err(Error::Validation("dataset has no users".to_string()));
    }
    let mut sessions = Vec::new();
    let mut months = Vec::new();
    let mut references = Vec::new();
    let mut chars = Vec::new();
    for user in &dataset.users {
        sessions.push(user.timeline.len() as f64);
        months.push(f64::from(
            user.timeline.iter().map(|s| s.month).max().unwrap_or(0),
        ));
        references.push(user.references.len() as f64);
        let per_session: Vec<usize> = user
            .timeline
            .iter()
            .map(|s| s.turns.iter().map(|t| t.text.chars().count()).sum())
            .collect();
        let avg = if per_session.is_empty() {
            0.0
        } else {
            per_session.iter().sum::<usize>() as f64 / per_session.len() as f64
        };
        chars.push(avg);
    }
    Ok(StatsReport {
        n_users: dataset.users.len(),
        sessions: MetricSummary::from_values(&sessions),
        timeline_months: MetricSummary::from_values(&months),
        reference_memories: MetricSummary::from_values(&references),
        avg_chars_per_session: MetricSummary::from_values(&chars),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::dataset_with_project_span;
    use crate::model::Variant;

    #[test]
    fn min_max_avg_across_two_users() {
        // Session-count endpoints 26 and 78 give avg 52 across two users.
        let mut a = dataset_with_project_span(26, "p1", 1, 2);
        let b = dataset_with_project_span(78, "p1", 1, 2);
        let mut user_b = b.users.into_iter().next().unwrap();
        user_b.persona.id = "00000000-0000-4000-8000-000000000001".to_string();
        user_b.profile.persona = user_b.persona.id.clone();
        a.users.push(user_b);

        let stats = dataset_stats(&a).unwrap();
        assert_eq!(stats.n_users, 2);
        assert_eq!(stats.sessions.min, 26.0);
        assert_eq!(stats.sessions.max, 78.0);
        assert_eq!(stats.sessions.avg, 52.0);
    }

    #[test]
    fn single_user_collapses_to_one_value() {
        let dataset = dataset_with_project_span(10, "p1", 1, 2);
        let stats = dataset_stats(&dataset).unwrap();
        assert_eq!(stats.sessions.min, stats.sessions.max);
        assert_eq!(stats.sessions.min, stats.sessions.avg);
        assert_eq!(stats.timeline_months.max, 1.0);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let dataset = BenchmarkDataset {
            variant: Variant::Static,
            users: Vec::new(),
        };
        assert!(dataset_stats(&dataset).is_err());
    }
}

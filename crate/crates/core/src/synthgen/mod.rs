//! Benchmark-generation machinery.
//!
//! The deterministic sub-pipeline (scaling rules, event scheduling, shift
//! sampling, timeline validation) is a pure function of the inputs and the
//! global seed. Everything that needs language output (profiles,
//! skeletons, timeline arrangement, dialogues) routes through the backend
//! and is orchestrated by [`pipeline`].

mod dialogue;
mod pipeline;
mod profile;
mod shift;
mod skeleton;
mod timeline;

pub use dialogue::{generate_dialogue, DialogueContext, DialogueResult};
pub use pipeline::{generate_benchmark, GenerateConfig, GenerateOutput, PersonaSource};
pub use profile::{assign_profile, select_balanced};
pub use shift::{generate_transition_narrative, sample_shift};
pub use skeleton::{generate_oneoff_events, generate_skeleton};
pub use timeline::{arrange_timeline, ArrangedTimeline, TimelinePlacement};

use serde::{Deserialize, Serialize};

use crate::model::{DomainId, Frequency, LifeSkeleton, SkeletonEvent};

/// Per-frequency generation scale: project/event counts for longitudinal
/// domains and the inter-session interval (weeks) for transient scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrequencyScaling {
    pub n_projects: usize,
    pub events_min: usize,
    pub events_max: usize,
    pub interval_weeks: u32,
}

impl FrequencyScaling {
    pub fn for_frequency(frequency: Frequency) -> Self {
        match frequency {
            Frequency::High => Self {
                n_projects: 5,
                events_min: 3,
                events_max: 5,
                interval_weeks: 4,
            },
            Frequency::Medium => Self {
                n_projects: 3,
                events_min: 2,
                events_max: 4,
                interval_weeks: 8,
            },
            Frequency::Low => Self {
                n_projects: 2,
                events_min: 2,
                events_max: 3,
                interval_weeks: 12,
            },
        }
    }
}

/// Number of one-off events for a transient domain over a timeline of
/// `total_months` months: floor(total_months * 4 / interval_weeks).
pub fn transient_event_count(total_months: u32, frequency: Frequency) -> u32 {
    let weeks = FrequencyScaling::for_frequency(frequency).interval_weeks;
    total_months * 4 / weeks
}

/// A transient event with its assigned month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledEvent {
    pub event: SkeletonEvent,
    pub month: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementOutcome {
    pub scheduled: Vec<ScheduledEvent>,
    /// Events whose month landed past the end of the timeline and were
    /// silently dropped.
    pub dropped: u32,
}

/// Space transient events every `interval_weeks` weeks starting at
/// `start_month`; events past `total_months` are dropped (and counted).
pub fn place_transient_events(
    events: &[SkeletonEvent],
    frequency: Frequency,
    total_months: u32,
    start_month: u32,
) -> PlacementOutcome {
    let weeks = FrequencyScaling::for_frequency(frequency).interval_weeks;
    let mut scheduled = Vec::new();
    let mut dropped = 0u32;
    for (i, event) in events.iter().enumerate() {
        let month = start_month + (i as u32 * weeks) / 4;
        if month > total_months {
            dropped += 1;
        } else {
            scheduled.push(ScheduledEvent {
                event: event.clone(),
                month,
            });
        }
    }
    PlacementOutcome { scheduled, dropped }
}

/// One violation found while validating an arranged timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineViolation {
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimelineReport {
    pub violations: Vec<TimelineViolation>,
}

impl TimelineReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, message: String) {
        self.violations.push(TimelineViolation { message });
    }
}

/// Check an arranged ordering of skeleton events against the skeletons it
/// came from: every event exactly once, months within range and
/// non-decreasing, and project order preserved within each domain.
pub fn validate_timeline(
    skeletons: &LifeSkeleton,
    timeline: &[TimelinePlacement],
    total_months: u32,
) -> TimelineReport {
    use std::collections::BTreeMap;

    let mut report = TimelineReport::default();

    // Registry: event -> (domain, project index within domain).
    let mut registry: BTreeMap<&str, (&DomainId, usize)> = BTreeMap::new();
    for (domain, skeleton) in &skeletons.domains {
        match skeleton {
            crate::model::DomainSkeleton::Longitudinal { projects } => {
                for (p, project) in projects.iter().enumerate() {
                    for event in &project.events {
                        registry.insert(event.event_id.as_str(), (domain, p));
                    }
                }
            }
            crate::model::DomainSkeleton::Transient { events } => {
                for event in events {
                    registry.insert(event.event_id.as_str(), (domain, 0));
                }
            }
        }
    }

    let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
    let mut last_month = 0u32;
    let mut last_project: BTreeMap<&DomainId, usize> = BTreeMap::new();
    for (i, placement) in timeline.iter().enumerate() {
        let event_id = placement.event_id.as_str();
        match registry.get(event_id) {
            None => report.push(format!("unknown event {event_id} in timeline")),
            Some((domain, project_index)) => {
                let count = counts.entry(event_id).or_insert(0);
                *count += 1;
                if *count == 2 {
                    report.push(format!("event {event_id} appears twice"));
                }
                let floor = last_project.entry(domain).or_insert(0);
                if *project_index < *floor {
                    report.push(format!(
                        "event {event_id} of project {} placed after a later project in domain {domain}",
                        project_index + 1
                    ));
                }
                *floor = (*floor).max(*project_index);
            }
        }
        if placement.month == 0 || placement.month > total_months {
            report.push(format!(
                "event {event_id} month {} outside [1, {total_months}]",
                placement.month
            ));
        }
        if placement.month < last_month {
            report.push(format!(
                "event {event_id} month {} decreases (position {i})",
                placement.month
            ));
        }
        last_month = placement.month.max(last_month);
    }
    for (event_id, _) in registry {
        if !counts.contains_key(event_id) {
            report.push(format!("event {event_id} missing from timeline"));
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DomainSkeleton, Project};

    #[test]
    fn transient_event_count_matches_the_formula() {
        // floor(T * 4 / w): hand-evaluated.
        assert_eq!(transient_event_count(18, Frequency::High), 18);
        assert_eq!(transient_event_count(18, Frequency::Medium), 9);
        assert_eq!(transient_event_count(18, Frequency::Low), 6);
        assert_eq!(transient_event_count(1, Frequency::Low), 0);
    }

    fn event(id: &str) -> SkeletonEvent {
        SkeletonEvent {
            event_id: id.to_string(),
            title: id.to_string(),
            description: format!("event {id}"),
            gt_memory: Vec::new(),
        }
    }

    #[test]
    fn placement_spaces_events_by_interval() {
        // 3 events at 4-week spacing from month 1 -> months 1, 2, 3.
        let events: Vec<SkeletonEvent> = (0..3).map(|i| event(&format!("e{i}"))).collect();
        let outcome = place_transient_events(&events, Frequency::High, 12, 1);
        let months: Vec<u32> = outcome.scheduled.iter().map(|s| s.month).collect();
        assert_eq!(months, vec![1, 2, 3]);
        assert_eq!(outcome.dropped, 0);

        // 12-week spacing -> months 1, 4, 7.
        let outcome = place_transient_events(&events, Frequency::Low, 12, 1);
        let months: Vec<u32> = outcome.scheduled.iter().map(|s| s.month).collect();
        assert_eq!(months, vec![1, 4, 7]);
    }

    #[test]
    fn placement_drops_events_past_the_end() {
        let events: Vec<SkeletonEvent> = (0..3).map(|i| event(&format!("e{i}"))).collect();
        // Months would be 5, 6, 7 with a 6-month timeline: one drop.
        let outcome = place_transient_events(&events, Frequency::High, 6, 5);
        assert_eq!(outcome.scheduled.len(), 2);
        assert_eq!(outcome.dropped, 1);
        // Conservation: scheduled + dropped = requested.
        assert_eq!(outcome.scheduled.len() as u32 + outcome.dropped, 3);
    }

    #[test]
    fn placement_of_nothing_is_empty() {
        let outcome = place_transient_events(&[], Frequency::Low, 12, 1);
        assert!(outcome.scheduled.is_empty());
        assert_eq!(outcome.dropped, 0);
    }

    fn two_project_skeleton() -> LifeSkeleton {
        let mut domains = std::collections::BTreeMap::new();
        domains.insert(
            DomainId::new("Travel Planning"),
            DomainSkeleton::Longitudinal {
                projects: vec![
                    Project {
                        project_id: "p1".to_string(),
                        events: vec![event("p1.e1"), event("p1.e2")],
                    },
                    Project {
                        project_id: "p2".to_string(),
                        events: vec![event("p2.e1"), event("p2.e2")],
                    },
                ],
            },
        );
        LifeSkeleton { domains }
    }

    fn placement(event_id: &str, month: u32) -> TimelinePlacement {
        TimelinePlacement {
            event_id: event_id.to_string(),
            month,
        }
    }

    #[test]
    fn valid_timeline_has_no_violations() {
        let skeleton = two_project_skeleton();
        let timeline = vec![
            placement("p1.e1", 1),
            placement("p1.e2", 2),
            placement("p2.e1", 2),
            placement("p2.e2", 3),
        ];
        let report = validate_timeline(&skeleton, &timeline, 3);
        assert!(report.is_valid(), "{:?}", report.violations);
    }

    #[test]
    fn duplicate_event_is_reported() {
        let skeleton = two_project_skeleton();
        let timeline = vec![
            placement("p1.e1", 1),
            placement("p1.e1", 1),
            placement("p1.e2", 2),
            placement("p2.e1", 2),
            placement("p2.e2", 3),
        ];
        let report = validate_timeline(&skeleton, &timeline, 3);
        assert!(report
            .violations
            .iter()
            .any(|v| v.message.contains("appears twice")));
    }

    #[test]
    fn project_order_violation_is_reported() {
        let skeleton = two_project_skeleton();
        let timeline = vec![
            placement("p1.e1", 1),
            placement("p2.e1", 1),
            placement("p1.e2", 2),
            placement("p2.e2", 3),
        ];
        let report = validate_timeline(&skeleton, &timeline, 3);
        assert!(report
            .violations
            .iter()
            .any(|v| v.message.contains("after a later project")));
    }

    #[test]
    fn missing_event_is_reported() {
        let skeleton = two_project_skeleton();
        let timeline = vec![placement("p1.e1", 1)];
        let report = validate_timeline(&skeleton, &timeline, 3);
        assert!(report
            .violations
            .iter()
            .any(|v| v.message.contains("missing from timeline")));
    }
}

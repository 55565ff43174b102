//! Backend-driven timeline arrangement.
//!
//! The model places every longitudinal event on a month grid; transient
//! events are scheduled programmatically afterwards. The arranged ordering
//! is validated (every event exactly once, months in range and
//! non-decreasing, project order preserved) with one retry.

use serde::{Deserialize, Serialize};

use crate::backend::{jsonx, GenerationRequest, Role, TextBackend};
use crate::error::{Error, Result};
use crate::model::{DomainSkeleton, LifeSkeleton, Persona};
use crate::prompts::Prompts;

use super::validate_timeline;

/// One event placed at a month; the unit the timeline validator checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelinePlacement {
    pub event_id: String,
    pub month: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrangedTimeline {
    pub total_months: u32,
    #[serde(default)]
    pub anchor_life_events: Vec<String>,
    pub session_sequence: Vec<TimelinePlacement>,
}

#[derive(Deserialize)]
struct TimelineReply {
    total_months: u32,
    #[serde(default)]
    anchor_life_events: Vec<String>,
    session_sequence: Vec<TimelinePlacement>,
}

/// Arrange all longitudinal skeleton events into a chronological order.
/// `max_month` caps the months the model may assign.
pub fn arrange_timeline(
    persona: &Persona,
    skeleton: &LifeSkeleton,
    max_month: u32,
    backend: &dyn TextBackend,
    prompts: &Prompts,
    model_id: &str,
) -> Result<ArrangedTimeline> {
    let mut event_table = String::new();
    let mut skeleton_summary = String::new();
    for (domain, domain_skeleton) in &skeleton.domains {
        if let DomainSkeleton::Longitudinal { projects } = domain_skeleton {
            skeleton_summary.push_str(&format!("{domain}: {} projects\n", projects.len()));
            for project in projects {
                for event in &project.events {
                    event_table.push_str(&format!(
                        "{domain} | {} | {} | {}\n",
                        project.project_id, event.event_id, event.title
                    ));
                }
            }
        }
    }
    let body = prompts.fill(
        &prompts.timeline,
        &[
            ("persona", &super::profile::persona_text(persona)),
            ("skeleton_summary", skeleton_summary.trim_end()),
            ("event_table", event_table.trim_end()),
            ("max_month", &max_month.to_string()),
        ],
    );
    let request =
        GenerationRequest::with_messages(prompts.timeline_system.clone(), vec![(Role::User, body)])
            .with_model(model_id.to_string());

    let mut last_problem = String::new();
    for _ in 0..2 {
        let reply = backend.generate(&request)?;
        let Some(parsed) = jsonx::parse_first::<TimelineReply>(&reply) else {
            last_problem = "reply is not valid timeline JSON".to_string();
            continue;
        };
        let longitudinal_only = longitudinal_view(skeleton);
        let report = validate_timeline(&longitudinal_only, &parsed.session_sequence, parsed.total_months);
        if report.is_valid() {
            return Ok(ArrangedTimeline {
                total_months: parsed.total_months,
                anchor_life_events: parsed.anchor_life_events,
                session_sequence: parsed.session_sequence,
            });
        }
        last_problem = report
            .violations
            .iter()
            .map(|v| v.message.clone())
            .collect::<Vec<_>>()
            .join("; ");
    }
    Err(Error::Validation(format!(
        "timeline arrangement invalid after regeneration: {last_problem}"
    )))
}

/// The skeleton restricted to longitudinal domains (the model only places
/// those; transient events are scheduled programmatically).
fn longitudinal_view(skeleton: &LifeSkeleton) -> LifeSkeleton {
    LifeSkeleton {
        domains: skeleton
            .domains
            .iter()
            .filter(|(_, s)| matches!(s, DomainSkeleton::Longitudinal { .. }))
            .map(|(d, s)| (d.clone(), s.clone()))
            .collect(),
    }
}

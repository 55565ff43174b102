//! Backend-driven skeleton generation.
//!
//! Longitudinal domains get projects/events sized by the frequency scale;
//! transient domains get flat one-off event lists sized by the interval
//! formula. Generated ids are qualified with a domain slug so they stay
//! unique across domains, and reference facts are rejected when they
//! duplicate facts already covered by previously generated domains.

use std::collections::BTreeSet;

use serde::Deserialize;

use crate::backend::mock::normalize_text;
use crate::backend::{jsonx, GenerationRequest, Role, TextBackend};
use crate::error::{Error, Result};
use crate::model::{
    DomainId, DomainSkeleton, Frequency, Persona, Project, ReferenceSeed, SkeletonEvent,
};
use crate::prompts::Prompts;

use super::FrequencyScaling;

/// Lowercase alphanumeric slug for qualifying event/project ids.
pub fn domain_slug(domain: &DomainId) -> String {
    let mut slug = String::new();
    let mut last_dash = true;
    for ch in domain.as_str().chars() {
        if ch.is_ascii_alphanumeric() {
            slug.push(ch.to_ascii_lowercase());
            last_dash = false;
        } else if !last_dash {
            slug.push('-');
            last_dash = true;
        }
    }
    while slug.ends_with('-') {
        slug.pop();
    }
    slug
}

#[derive(Deserialize)]
struct SkeletonReply {
    projects: Vec<ProjectReply>,
}

#[derive(Deserialize)]
struct ProjectReply {
    project_id: String,
    events: Vec<EventReply>,
}

#[derive(Deserialize)]
struct EventReply {
    event_id: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    gt_memory: Vec<ReferenceSeed>,
}

fn skeleton_request(
    persona_text: &str,
    domain: &DomainId,
    frequency: Frequency,
    reason: &str,
    covered_facts: &[String],
    extra_context: Option<&str>,
    prompts: &Prompts,
    model_id: &str,
) -> GenerationRequest {
    let scale = FrequencyScaling::for_frequency(frequency);
    let covered = if covered_facts.is_empty() {
        "(none)".to_string()
    } else {
        covered_facts
            .iter()
            .map(|f| format!("- {f}"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let mut body = prompts.fill(
        &prompts.skeleton_longitudinal,
        &[
            ("persona", persona_text),
            ("domain_name", domain.as_str()),
            ("frequency", &frequency.to_string()),
            ("reason", reason),
            ("n_projects", &scale.n_projects.to_string()),
            ("n_events_min", &scale.events_min.to_string()),
            ("n_events_max", &scale.events_max.to_string()),
            ("covered_facts", covered.as_str()),
        ],
    );
    if let Some(context) = extra_context {
        body.push_str("\n\n## Additional Context\n");
        body.push_str(context);
    }
    GenerationRequest::with_messages(
        prompts.skeleton_longitudinal_system.clone(),
        vec![(Role::User, body)],
    )
    .with_model(model_id.to_string())
}

/// Generate a longitudinal skeleton for one memory-required domain.
///
/// The reply is validated against the frequency scale (exact project
/// count, event counts within bounds) and against `covered_facts`
/// (normalized-text duplicates rejected). One regeneration is attempted,
/// then a hard error. On success the event/project ids are qualified with
/// the domain slug and the newly covered facts are appended.
#[allow(clippy::too_many_arguments)]
pub fn generate_skeleton(
    persona: &Persona,
    domain: &DomainId,
    frequency: Frequency,
    reason: &str,
    covered_facts: &mut Vec<String>,
    extra_context: Option<&str>,
    backend: &dyn TextBackend,
    prompts: &Prompts,
    model_id: &str,
    id_prefix: &str,
) -> Result<DomainSkeleton> {
    let persona_text = super::profile::persona_text(persona);
    let request = skeleton_request(
        &persona_text,
        domain,
        frequency,
        reason,
        covered_facts,
        extra_context,
        prompts,
        model_id,
    );
    let scale = FrequencyScaling::for_frequency(frequency);
    let covered_normalized: BTreeSet<String> =
        covered_facts.iter().map(|f| normalize_text(f)).collect();

    let mut last_problem = String::new();
    for _ in 0..2 {
        let reply = backend.generate(&request)?;
        match parse_skeleton(&reply, &scale, &covered_normalized) {
            Ok(projects) => {
                let slug = domain_slug(domain);
                let qualified = qualify_projects(projects, &slug, id_prefix);
                for project in &qualified {
                    for event in &project.events {
                        for seed in &event.gt_memory {
                            covered_facts.push(seed.fact.clone());
                        }
                    }
                }
                return Ok(DomainSkeleton::Longitudinal { projects: qualified });
            }
            Err(problem) => last_problem = problem,
        }
    }
    Err(Error::Validation(format!(
        "skeleton for domain {domain} invalid after regeneration: {last_problem}"
    )))
}

fn parse_skeleton(
    reply: &str,
    scale: &FrequencyScaling,
    covered_normalized: &BTreeSet<String>,
) -> std::result::Result<Vec<Project>, String> {
    let parsed: SkeletonReply =
        jsonx::parse_first(reply).ok_or_else(|| "reply is not valid skeleton JSON".to_string())?;
    if parsed.projects.len() != scale.n_projects {
        return Err(format!(
            "{} projects, expected {}",
            parsed.projects.len(),
            scale.n_projects
        ));
    }
    let mut projects = Vec::new();
    for project in parsed.projects {
        let n = project.events.len();
        if n < scale.events_min || n > scale.events_max {
            return Err(format!(
                "project {} has {n} events, outside [{}, {}]",
                project.project_id, scale.events_min, scale.events_max
            ));
        }
        let mut events = Vec::new();
        for event in project.events {
            for seed in &event.gt_memory {
                if seed.fact.is_empty() {
                    return Err(format!("event {} carries an empty fact", event.event_id));
                }
                if covered_normalized.contains(&normalize_text(&seed.fact)) {
                    return Err(format!("fact duplicates covered facts: {}", seed.fact));
                }
            }
            events.push(SkeletonEvent {
                event_id: event.event_id,
                title: event.title,
                description: event.description,
                gt_memory: event.gt_memory,
            });
        }
        projects.push(Project {
            project_id: project.project_id,
            events,
        });
    }
    Ok(projects)
}

fn qualify_projects(projects: Vec<Project>, slug: &str, id_prefix: &str) -> Vec<Project> {
    projects
        .into_iter()
        .map(|project| {
            let project_id = format!("{id_prefix}{slug}.{}", project.project_id);
            let events = project
                .events
                .into_iter()
                .map(|event| SkeletonEvent {
                    event_id: format!("{project_id}.{}", event.event_id),
                    ..event
                })
                .collect();
            Project { project_id, events }
        })
        .collect()
}

#[derive(Deserialize)]
struct OneOffReply {
    events: Vec<EventReply>,
}

/// Generate exactly `n_events` one-off events for a transient domain.
/// Zero requested events short-circuits without a backend call.
#[allow(clippy::too_many_arguments)]
pub fn generate_oneoff_events(
    persona: &Persona,
    domain: &DomainId,
    frequency: Frequency,
    n_events: u32,
    total_months: u32,
    extra_context: Option<&str>,
    backend: &dyn TextBackend,
    prompts: &Prompts,
    model_id: &str,
    id_prefix: &str,
) -> Result<Vec<SkeletonEvent>> {
    if n_events == 0 {
        return Ok(Vec::new());
    }
    let persona_text = super::profile::persona_text(persona);
    let mut body = prompts.fill(
        &prompts.skeleton_oneoff,
        &[
            ("persona", persona_text.as_str()),
            ("domain_name", domain.as_str()),
            ("frequency", &frequency.to_string()),
            ("n_events", &n_events.to_string()),
            ("total_months", &total_months.to_string()),
        ],
    );
    if let Some(context) = extra_context {
        body.push_str("\n\n## Additional Context\n");
        body.push_str(context);
    }
    let request = GenerationRequest::with_messages(
        prompts.skeleton_oneoff_system.clone(),
        vec![(Role::User, body)],
    )
    .with_model(model_id.to_string());

    let mut last_problem = String::new();
    for _ in 0..2 {
        let reply = backend.generate(&request)?;
        match jsonx::parse_first::<OneOffReply>(&reply) {
            Some(parsed) if parsed.events.len() == n_events as usize => {
                let slug = domain_slug(domain);
                return Ok(parsed
                    .events
                    .into_iter()
                    .map(|event| SkeletonEvent {
                        event_id: format!("{id_prefix}{slug}.{}", event.event_id),
                        title: event.title,
                        description: event.description,
                        gt_memory: Vec::new(),
                    })
                    .collect());
            }
            Some(parsed) => {
                last_problem = format!("{} events, expected {n_events}", parsed.events.len());
            }
            None => last_problem = "reply is not valid one-off JSON".to_string(),
        }
    }
    Err(Error::Validation(format!(
        "one-off events for domain {domain} invalid after regeneration: {last_problem}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::mock::{MockRule, ScriptedMock};
    use crate::fixtures;

    fn low_skeleton_reply() -> String {
        // Low frequency scale: exactly 2 projects, 2-3 events each.
        serde_json::json!({
            "projects": [
                {"project_id": "P1", "events": [
                    {"event_id": "E1", "title": "t", "description": "d",
                     "gt_memory": [{"kind": "ongoing_state", "fact": "chose option A"}]},
                    {"event_id": "E2", "title": "t", "description": "d", "gt_memory": []}
                ]},
                {"project_id": "P2", "events": [
                    {"event_id": "E1", "title": "t", "description": "d", "gt_memory": []},
                    {"event_id": "E2", "title": "t", "description": "d", "gt_memory": []}
                ]}
            ]
        })
        .to_string()
    }

    #[test]
    fn valid_low_frequency_skeleton_is_accepted_and_qualified() {
        let backend = ScriptedMock::with_rules(vec![MockRule::new(
            ["Life Skeleton"],
            [low_skeleton_reply()],
        )]);
        let mut covered = Vec::new();
        let skeleton = generate_skeleton(
            &fixtures::persona(0),
            &DomainId::new("Travel Planning"),
            Frequency::Low,
            "travels often",
            &mut covered,
            None,
            &backend,
            &Prompts::default(),
            "",
            "",
        )
        .unwrap();
        let DomainSkeleton::Longitudinal { projects } = skeleton else {
            panic!("expected longitudinal skeleton");
        };
        assert_eq!(projects.len(), 2);
        assert_eq!(projects[0].project_id, "travel-planning.P1");
        assert_eq!(projects[0].events[0].event_id, "travel-planning.P1.E1");
        assert_eq!(covered, vec!["chose option A".to_string()]);
    }

    #[test]
    fn wrong_project_count_is_rejected_after_retry() {
        let reply = serde_json::json!({
            "projects": [
                {"project_id": "P1", "events": [
                    {"event_id": "E1", "title": "t", "description": "d", "gt_memory": []},
                    {"event_id": "E2", "title": "t", "description": "d", "gt_memory": []}
                ]}
            ]
        })
        .to_string();
        let backend = ScriptedMock::with_rules(vec![MockRule::new(
            ["Life Skeleton"],
            [reply.clone(), reply],
        )]);
        let mut covered = Vec::new();
        let result = generate_skeleton(
            &fixtures::persona(0),
            &DomainId::new("Travel Planning"),
            Frequency::Low,
            "r",
            &mut covered,
            None,
            &backend,
            &Prompts::default(),
            "",
            "",
        );
        assert!(result.unwrap_err().to_string().contains("projects"));
    }

    #[test]
    fn duplicate_fact_is_rejected() {
        let backend = ScriptedMock::with_rules(vec![MockRule::new(
            ["Life Skeleton"],
            [low_skeleton_reply(), low_skeleton_reply()],
        )]);
        // Same fact, different case/spacing: normalized duplicate.
        let mut covered = vec!["Chose   option a".to_string()];
        let result = generate_skeleton(
            &fixtures::persona(0),
            &DomainId::new("Travel Planning"),
            Frequency::Low,
            "r",
            &mut covered,
            None,
            &backend,
            &Prompts::default(),
            "",
            "",
        );
        assert!(result.unwrap_err().to_string().contains("duplicates"));
    }

    #[test]
    fn oneoff_events_respect_the_requested_count() {
        let reply = serde_json::json!({
            "events": [
                {"event_id": "E1", "title": "t", "description": "d1"},
                {"event_id": "E2", "title": "t", "description": "d2"}
            ]
        })
        .to_string();
        let backend =
            ScriptedMock::with_rules(vec![MockRule::new(["one-off"], [reply])]);
        let events = generate_oneoff_events(
            &fixtures::persona(0),
            &DomainId::new("News & Current Events"),
            Frequency::Low,
            2,
            6,
            None,
            &backend,
            &Prompts::default(),
            "",
            "",
        )
        .unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].event_id, "news-current-events.E1");
        assert!(events.iter().all(|e| e.gt_memory.is_empty()));
    }

    #[test]
    fn zero_oneoff_events_need_no_backend() {
        // No rules: any generate call would error.
        let backend = ScriptedMock::with_rules(vec![]);
        let events = generate_oneoff_events(
            &fixtures::persona(0),
            &DomainId::new("News & Current Events"),
            Frequency::Low,
            0,
            1,
            None,
            &backend,
            &Prompts::default(),
            "",
            "",
        )
        .unwrap();
        assert!(events.is_empty());
    }

    #[test]
    fn slugs_are_stable() {
        assert_eq!(domain_slug(&DomainId::new("Travel Planning")), "travel-planning");
        assert_eq!(
            domain_slug(&DomainId::new("News & Current Events")),
            "news-current-events"
        );
    }
}

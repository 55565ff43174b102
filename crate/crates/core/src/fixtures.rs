//! Deterministic synthetic datasets for tests and offline demos.
//!
//! Everything here is a pure function of its arguments, so fixtures are
//! reproducible across runs and platforms.

use std::collections::BTreeMap;

use crate::model::{
    AgentUseProfile, BenchmarkDataset, DomainId, DomainSkeleton, DomainUsage, Frequency,
    LifeSkeleton, Persona, Project, RefKind, ReferenceMemory, ReferenceSeed, Session,
    SkeletonEvent, Turn, UserRecord, Variant,
};

pub const LONG_DOMAIN: &str = "Travel Planning";
pub const LONG_DOMAIN_2: &str = "Personal Finance & Investment";
pub const TRANSIENT_DOMAIN: &str = "News & Current Events";
pub const TRANSIENT_DOMAIN_2: &str = "Shopping & Product Research";

pub fn persona(index: usize) -> Persona {
    Persona {
        id: format!("00000000-0000-4000-8000-{index:012}"),
        description: format!("Synthetic test persona {index}"),
        attributes: BTreeMap::new(),
    }
}

/// Two long-horizon plus two transient domains, balanced selection.
pub fn four_domain_profile(persona_id: &str) -> AgentUseProfile {
    let mut entries = BTreeMap::new();
    entries.insert(
        DomainId::new(LONG_DOMAIN),
        DomainUsage::active(Frequency::Low, true),
    );
    entries.insert(
        DomainId::new(LONG_DOMAIN_2),
        DomainUsage::active(Frequency::Low, true),
    );
    entries.insert(
        DomainId::new(TRANSIENT_DOMAIN),
        DomainUsage::active(Frequency::High, false),
    );
    entries.insert(
        DomainId::new(TRANSIENT_DOMAIN_2),
        DomainUsage::active(Frequency::High, false),
    );
    AgentUseProfile {
        persona: persona_id.to_string(),
        entries,
        selected: vec![
            DomainId::new(LONG_DOMAIN),
            DomainId::new(LONG_DOMAIN_2),
            DomainId::new(TRANSIENT_DOMAIN),
            DomainId::new(TRANSIENT_DOMAIN_2),
        ],
    }
}

fn two_turn(user_text: String) -> Vec<Turn> {
    vec![Turn::user(user_text), Turn::agent("Happy to help with that.")]
}

/// One user, `n_sessions` sessions in a single long-horizon domain, with
/// sessions `project_from..=project_to` assigned to `project_id`.
pub fn dataset_with_project_span(
    n_sessions: u32,
    project_id: &str,
    project_from: u32,
    project_to: u32,
) -> BenchmarkDataset {
    let persona = persona(0);
    let profile = four_domain_profile(&persona.id);
    let timeline = (1..=n_sessions)
        .map(|session_id| Session {
            session_id,
            domain: DomainId::new(LONG_DOMAIN),
            month: 1,
            turns: two_turn(format!("Planning step {session_id}.")),
            gt_memory_required: true,
            project: (project_from..=project_to)
                .contains(&session_id)
                .then(|| project_id.to_string()),
            event_id: format!("travel.e{session_id}"),
        })
        .collect();
    BenchmarkDataset {
        variant: Variant::Static,
        users: vec![UserRecord {
            persona,
            profile,
            skeleton: LifeSkeleton::default(),
            timeline,
            references: Vec::new(),
            shift: None,
        }],
    }
}

/// The eviction-pressure benchmark: `n_users` users, each with two
/// long-horizon domains (2 projects x 3 events each, per the low-frequency
/// scale) and two transient domains, interleaved long/transient along the
/// timeline. Every user turn carries a `FACT:` marker line so the
/// deterministic extractor stores exactly one entry per session; transient
/// facts are decoys that only a gated policy avoids storing.
pub fn mini_benchmark(n_users: usize) -> BenchmarkDataset {
    let users = (0..n_users).map(mini_benchmark_user).collect();
    BenchmarkDataset {
        variant: Variant::Static,
        users,
    }
}

fn mini_benchmark_user(index: usize) -> UserRecord {
    let persona = persona(index);
    let profile = four_domain_profile(&persona.id);

    // Two projects of three events per long domain (low-frequency scale).
    let long_domains = [LONG_DOMAIN, LONG_DOMAIN_2];
    let mut skeleton_domains = BTreeMap::new();
    let mut long_events: Vec<(DomainId, String, String, String)> = Vec::new();
    for (d, domain) in long_domains.iter().enumerate() {
        let slug = if d == 0 { "travel" } else { "finance" };
        let mut projects = Vec::new();
        for p in 1..=2u32 {
            let project_id = format!("{slug}.p{p}");
            let mut events = Vec::new();
            for e in 1..=3u32 {
                let event_id = format!("{project_id}.e{e}");
                let fact = format!("user {index} {slug} project {p} milestone {e}");
                events.push(SkeletonEvent {
                    event_id: event_id.clone(),
                    title: format!("{slug} step {e}"),
                    description: format!("Working on {slug} project {p}, step {e}."),
                    gt_memory: vec![ReferenceSeed {
                        kind: RefKind::OngoingState,
                        fact: fact.clone(),
                        probing_question: None,
                        answer: None,
                    }],
                });
                long_events.push((DomainId::new(*domain), project_id.clone(), event_id, fact));
            }
            projects.push(Project {
                project_id,
                events,
            });
        }
        skeleton_domains.insert(DomainId::new(*domain), DomainSkeleton::Longitudinal { projects });
    }

    // Interleave: long, transient, long, transient ... so the universal
    // policy keeps spending budget on decoys between real facts.
    let transient_domains = [TRANSIENT_DOMAIN, TRANSIENT_DOMAIN_2];
    let mut timeline = Vec::new();
    let mut references = Vec::new();
    let mut session_id = 0u32;
    for (i, (domain, project_id, event_id, fact)) in long_events.iter().enumerate() {
        session_id += 1;
        let month = 1 + (session_id - 1) / 4;
        timeline.push(Session {
            session_id,
            domain: domain.clone(),
            month,
            turns: two_turn(format!("Progress update.\nFACT: {fact}")),
            gt_memory_required: true,
            project: Some(project_id.clone()),
            event_id: event_id.clone(),
        });
        references.push(ReferenceMemory {
            id: format!("{event_id}.r1"),
            kind: RefKind::OngoingState,
            fact: fact.clone(),
            probing_question: None,
            answer: None,
            t_start: session_id,
            t_target: None,
            project: Some(project_id.clone()),
            superseded_by: None,
        });

        let transient_domain = transient_domains[i % 2];
        session_id += 1;
        let month = 1 + (session_id - 1) / 4;
        timeline.push(Session {
            session_id,
            domain: DomainId::new(transient_domain),
            month,
            turns: two_turn(format!(
                "Quick question {i} for user {index}.\nFACT: one-off note {i} for user {index}\nFACT: second note {i} for user {index}"
            )),
            gt_memory_required: false,
            project: None,
            event_id: format!("oneoff.e{i}"),
        });
    }

    UserRecord {
        persona,
        profile,
        skeleton: LifeSkeleton {
            domains: skeleton_domains,
        },
        timeline,
        references,
        shift: None,
    }
}

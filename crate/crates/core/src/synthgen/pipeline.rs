//! End-to-end benchmark generation for a set of personas.
//!
//! Per user: profile assignment and balanced selection, longitudinal
//! skeletons (sequential, deduplicating reference facts), backend timeline
//! arrangement, programmatic transient scheduling, dual-simulator dialogue
//! synthesis, and (for dynamic variants) a seeded profile shift followed
//! by a second phase of the same stages. The deterministic sub-pipeline is
//! a pure function of (inputs, global seed); with a scripted backend the
//! whole output is reproducible byte for byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backend::TextBackend;
use crate::error::{Error, Result};
use crate::model::{
    compute_retention_horizons, validate_dataset, AgentUseProfile, BenchmarkDataset, DomainId,
    DomainSkeleton, Frequency, LifeSkeleton, Persona, ReferenceMemory, Session, ShiftRecord,
    SkeletonEvent, Turn, UserRecord, Variant,
};
use crate::prompts::Prompts;
use crate::seeded::SeededRng;
use crate::synthgen::dialogue::{DEFAULT_HARD_CAP, DEFAULT_MIN_TURNS};

use super::{
    arrange_timeline, generate_dialogue, generate_oneoff_events, generate_skeleton,
    generate_transition_narrative, place_transient_events, sample_shift, transient_event_count,
    DialogueContext,
};

/// Where the personas come from: inline in the config, or a JSON file
/// holding an array of persona objects.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PersonaSource {
    Inline(Vec<Persona>),
    Path(PathBuf),
}

impl PersonaSource {
    pub fn load(&self, base_dir: &Path) -> Result<Vec<Persona>> {
        match self {
            PersonaSource::Inline(personas) => Ok(personas.clone()),
            PersonaSource::Path(path) => {
                let resolved = if path.is_absolute() {
                    path.clone()
                } else {
                    base_dir.join(path)
                };
                let raw = std::fs::read_to_string(&resolved).map_err(|e| Error::io(&resolved, e))?;
                serde_json::from_str(&raw)
                    .map_err(|e| Error::Parse(format!("{}: {e}", resolved.display())))
            }
        }
    }
}

fn default_selected_per_user() -> usize {
    6
}

fn default_min_turns() -> u32 {
    DEFAULT_MIN_TURNS
}

fn default_hard_cap() -> u32 {
    DEFAULT_HARD_CAP
}

fn default_max_month() -> u32 {
    24
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub personas: PersonaSource,
    pub variant: Variant,
    /// Domains sampled per user (the balanced selection size).
    #[serde(default = "default_selected_per_user")]
    pub selected_per_user: usize,
    #[serde(default = "default_min_turns")]
    pub min_turns: u32,
    #[serde(default = "default_hard_cap")]
    pub hard_cap: u32,
    /// Month cap offered to the timeline arranger.
    #[serde(default = "default_max_month")]
    pub max_month: u32,
}

impl GenerateConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&raw)
            .map_err(|e| Error::Config(format!("generate config {}: {e}", path.display())))
    }
}

/// One trace record per pipeline stage, written to the generation trace
/// log as JSON lines.
pub type TraceRecord = serde_json::Value;

#[derive(Debug)]
pub struct GenerateOutput {
    pub dataset: BenchmarkDataset,
    pub trace: Vec<TraceRecord>,
}

/// Scheduled session scaffold prior to dialogue synthesis.
struct PendingSession {
    domain: DomainId,
    month: u32,
    event: SkeletonEvent,
    project: Option<String>,
    memory_required: bool,
}

/// Generate the whole benchmark. `make_backend` is invoked once per user
/// so scripted-mock response cursors never leak between users.
pub fn generate_benchmark(
    config: &GenerateConfig,
    personas: &[Persona],
    seed: u64,
    prompts: &Prompts,
    make_backend: &dyn Fn() -> Result<Box<dyn TextBackend>>,
    pool: &crate::model::DomainPool,
) -> Result<GenerateOutput> {
    if personas.is_empty() {
        return Err(Error::Config("no personas to generate from".to_string()));
    }
    let mut users = Vec::new();
    let mut trace = Vec::new();
    for persona in personas {
        let backend = make_backend()?;
        let user = generate_user(config, persona, seed, prompts, backend.as_ref(), pool, &mut trace)
            .map_err(|e| e.at_stage(&format!("user {}", persona.id)))?;
        users.push(user);
    }
    let mut dataset = BenchmarkDataset {
        variant: config.variant,
        users,
    };
    compute_retention_horizons(&mut dataset).map_err(|e| e.at_stage("retention horizons"))?;
    validate_dataset(&dataset, pool).map_err(|e| e.at_stage("final validation"))?;
    Ok(GenerateOutput { dataset, trace })
}

fn generate_user(
    config: &GenerateConfig,
    persona: &Persona,
    seed: u64,
    prompts: &Prompts,
    backend: &dyn TextBackend,
    pool: &crate::model::DomainPool,
    trace: &mut Vec<TraceRecord>,
) -> Result<UserRecord> {
    let mut rng = SeededRng::for_persona(seed, &persona.id);
    let (profile, reasons) = super::profile::build_profile(
        persona,
        pool,
        config.selected_per_user,
        backend,
        prompts,
        "",
        &mut rng,
    )
    .map_err(|e| e.at_stage("profile assignment"))?;
    trace.push(serde_json::json!({
        "user": persona.id,
        "stage": "profile",
        "selected": profile.selected,
    }));

    let mut covered_facts: Vec<String> = Vec::new();
    let phase1 = generate_phase(
        config,
        persona,
        &profile,
        &reasons,
        Phase::One,
        &mut covered_facts,
        None,
        backend,
        prompts,
        trace,
    )?;

    let mut timeline = Vec::new();
    let mut references = Vec::new();
    let mut next_session = 1u32;
    let mut project_context: BTreeMap<String, Vec<String>> = BTreeMap::new();
    synthesize_dialogues(
        config,
        persona,
        phase1.sessions,
        &mut next_session,
        0,
        &mut project_context,
        &mut timeline,
        &mut references,
        backend,
        prompts,
        trace,
    )?;

    let shift = if config.variant == Variant::Dynamic {
        let shift_point = next_session - 1;
        let plan = {
            let mut plan =
                sample_shift(&profile, &mut rng).map_err(|e| e.at_stage("shift sampling"))?;
            let memory_domains: Vec<DomainId> = profile
                .selected
                .iter()
                .filter(|d| profile.memory_required(d) == Some(true))
                .cloned()
                .collect();
            let oneoff_domains: Vec<DomainId> = profile
                .selected
                .iter()
                .filter(|d| profile.memory_required(d) == Some(false))
                .cloned()
                .collect();
            plan.narrative = generate_transition_narrative(
                &plan,
                &super::profile::persona_text(persona),
                phase1.total_months,
                &memory_domains,
                &oneoff_domains,
                prompts,
                backend,
            )
            .map_err(|e| e.at_stage("transition narrative"))?;
            plan
        };
        trace.push(serde_json::json!({
            "user": persona.id,
            "stage": "shift",
            "demoted": plan.demoted,
            "added_longitudinal": plan.added_longitudinal,
            "added_transient": plan.added_transient,
        }));

        let phase2 = generate_phase(
            config,
            persona,
            &profile,
            &reasons,
            Phase::Two { plan: &plan },
            &mut covered_facts,
            Some(&plan.narrative),
            backend,
            prompts,
            trace,
        )?;
        synthesize_dialogues(
            config,
            persona,
            phase2.sessions,
            &mut next_session,
            phase1.total_months,
            &mut project_context,
            &mut timeline,
            &mut references,
            backend,
            prompts,
            trace,
        )?;

        Some(ShiftRecord {
            shift_point,
            plan,
            skeleton: phase2.skeleton,
        })
    } else {
        None
    };

    Ok(UserRecord {
        persona: persona.clone(),
        profile,
        skeleton: phase1.skeleton,
        timeline,
        references,
        shift,
    })
}

enum Phase<'a> {
    One,
    Two { plan: &'a crate::model::ShiftPlan },
}

struct PhaseOutput {
    skeleton: LifeSkeleton,
    sessions: Vec<PendingSession>,
    total_months: u32,
}

/// Run one generation phase: longitudinal skeletons, timeline arrangement,
/// transient scheduling, and the merged session scaffold (months relative
/// to the phase start).
#[allow(clippy::too_many_arguments)]
fn generate_phase(
    config: &GenerateConfig,
    persona: &Persona,
    profile: &AgentUseProfile,
    reasons: &BTreeMap<DomainId, String>,
    phase: Phase<'_>,
    covered_facts: &mut Vec<String>,
    narrative: Option<&str>,
    backend: &dyn TextBackend,
    prompts: &Prompts,
    trace: &mut Vec<TraceRecord>,
) -> Result<PhaseOutput> {
    let (longitudinal, transient, id_prefix): (Vec<DomainId>, Vec<DomainId>, &str) = match &phase {
        Phase::One => (
            profile
                .selected
                .iter()
                .filter(|d| profile.memory_required(d) == Some(true))
                .cloned()
                .collect(),
            profile
                .selected
                .iter()
                .filter(|d| profile.memory_required(d) == Some(false))
                .cloned()
                .collect(),
            "",
        ),
        Phase::Two { plan } => {
            let mut longitudinal: Vec<DomainId> = profile
                .selected
                .iter()
                .filter(|d| profile.memory_required(d) == Some(true) && **d != plan.demoted)
                .cloned()
                .collect();
            longitudinal.push(plan.added_longitudinal.clone());
            longitudinal.sort();
            let mut transient: Vec<DomainId> = profile
                .selected
                .iter()
                .filter(|d| profile.memory_required(d) == Some(false))
                .cloned()
                .collect();
            transient.push(plan.demoted.clone());
            if let Some(added) = &plan.added_transient {
                transient.push(added.clone());
            }
            transient.sort();
            (longitudinal, transient, "p2.")
        }
    };

    let frequency_of = |domain: &DomainId| -> Frequency {
        profile
            .usage(domain)
            .and_then(|u| u.frequency)
            .expect("validated profiles carry frequencies for active domains")
    };

    let mut skeleton = LifeSkeleton::default();
    for domain in &longitudinal {
        let reason = reasons.get(domain).cloned().unwrap_or_default();
        let domain_skeleton = generate_skeleton(
            persona,
            domain,
            frequency_of(domain),
            &reason,
            covered_facts,
            narrative,
            backend,
            prompts,
            "",
            id_prefix,
        )
        .map_err(|e| e.at_stage(&format!("skeleton for {domain}")))?;
        skeleton.domains.insert(domain.clone(), domain_skeleton);
    }

    let arranged = arrange_timeline(persona, &skeleton, config.max_month, backend, prompts, "")
        .map_err(|e| e.at_stage("timeline arrangement"))?;
    let total_months = arranged.total_months;
    trace.push(serde_json::json!({
        "user": persona.id,
        "stage": "timeline",
        "total_months": total_months,
        "events": arranged.session_sequence.len(),
    }));

    // Event registry for resolving arranged ids to events and projects.
    let mut event_lookup: BTreeMap<String, (DomainId, String, SkeletonEvent)> = BTreeMap::new();
    for (domain, domain_skeleton) in &skeleton.domains {
        if let DomainSkeleton::Longitudinal { projects } = domain_skeleton {
            for project in projects {
                for event in &project.events {
                    event_lookup.insert(
                        event.event_id.clone(),
                        (domain.clone(), project.project_id.clone(), event.clone()),
                    );
                }
            }
        }
    }

    let mut sessions: Vec<(u32, usize, PendingSession)> = Vec::new();
    for (order, placement) in arranged.session_sequence.iter().enumerate() {
        let (domain, project_id, event) = event_lookup
            .get(&placement.event_id)
            .cloned()
            .ok_or_else(|| {
                Error::Internal(format!("arranged event {} missing from registry", placement.event_id))
            })?;
        sessions.push((
            placement.month,
            order,
            PendingSession {
                domain,
                month: placement.month,
                event,
                project: Some(project_id),
                memory_required: true,
            },
        ));
    }

    // Transient one-offs are scheduled programmatically after the
    // arrangement call and merged behind longitudinal events of the same
    // month.
    let memory_event_count = sessions.len();
    for (d_index, domain) in transient.iter().enumerate() {
        let frequency = frequency_of(domain);
        let n_events = transient_event_count(total_months, frequency);
        let events = generate_oneoff_events(
            persona,
            domain,
            frequency,
            n_events,
            total_months,
            narrative,
            backend,
            prompts,
            "",
            id_prefix,
        )
        .map_err(|e| e.at_stage(&format!("one-off events for {domain}")))?;
        let placement = place_transient_events(&events, frequency, total_months, 1);
        trace.push(serde_json::json!({
            "user": persona.id,
            "stage": "transient",
            "domain": domain,
            "requested": n_events,
            "scheduled": placement.scheduled.len(),
            "dropped": placement.dropped,
        }));
        skeleton.domains.insert(
            domain.clone(),
            DomainSkeleton::Transient {
                events: placement.scheduled.iter().map(|s| s.event.clone()).collect(),
            },
        );
        for (e_index, scheduled) in placement.scheduled.into_iter().enumerate() {
            sessions.push((
                scheduled.month,
                memory_event_count + d_index * 10_000 + e_index,
                PendingSession {
                    domain: domain.clone(),
                    month: scheduled.month,
                    event: scheduled.event,
                    project: None,
                    memory_required: false,
                },
            ));
        }
    }

    sessions.sort_by_key(|(month, order, _)| (*month, *order));
    Ok(PhaseOutput {
        skeleton,
        sessions: sessions.into_iter().map(|(_, _, s)| s).collect(),
        total_months,
    })
}

/// Turn session scaffolds into dialogues, assign ids/months, and collect
/// reference memories.
#[allow(clippy::too_many_arguments)]
fn synthesize_dialogues(
    config: &GenerateConfig,
    persona: &Persona,
    pending: Vec<PendingSession>,
    next_session: &mut u32,
    month_offset: u32,
    project_context: &mut BTreeMap<String, Vec<String>>,
    timeline: &mut Vec<Session>,
    references: &mut Vec<ReferenceMemory>,
    backend: &dyn TextBackend,
    prompts: &Prompts,
    trace: &mut Vec<TraceRecord>,
) -> Result<()> {
    for scaffold in pending {
        let session_id = *next_session;
        *next_session += 1;

        let prior: Vec<String> = scaffold
            .project
            .as_ref()
            .and_then(|p| project_context.get(p))
            .cloned()
            .unwrap_or_default();
        let ctx = DialogueContext {
            persona,
            domain: &scaffold.domain,
            event: &scaffold.event,
            prior_context: &prior,
            min_turns: config.min_turns,
            hard_cap: config.hard_cap,
        };
        let result = generate_dialogue(&ctx, backend, prompts, "", "")
            .map_err(|e| e.at_stage(&format!("dialogue for {}", scaffold.event.event_id)))?;
        if let Some(warning) = &result.coverage_warning {
            trace.push(serde_json::json!({
                "user": persona.id,
                "stage": "dialogue",
                "event": scaffold.event.event_id,
                "coverage_warning": warning,
            }));
        }

        let turns: Vec<Turn> = result.turns;
        timeline.push(Session {
            session_id,
            domain: scaffold.domain.clone(),
            month: month_offset + scaffold.month,
            turns,
            gt_memory_required: scaffold.memory_required,
            project: scaffold.project.clone(),
            event_id: scaffold.event.event_id.clone(),
        });

        for (i, seed) in scaffold.event.gt_memory.iter().enumerate() {
            references.push(ReferenceMemory {
                id: format!("{}.r{}", scaffold.event.event_id, i + 1),
                kind: seed.kind,
                fact: seed.fact.clone(),
                probing_question: seed.probing_question.clone(),
                answer: seed.answer.clone(),
                t_start: session_id,
                t_target: None,
                project: match seed.kind {
                    crate::model::RefKind::OngoingState => scaffold.project.clone(),
                    crate::model::RefKind::UserProfile => None,
                },
                superseded_by: None,
            });
        }
        if let Some(project) = &scaffold.project {
            let facts = project_context.entry(project.clone()).or_default();
            for seed in &scaffold.event.gt_memory {
                facts.push(seed.fact.clone());
            }
        }
    }
    Ok(())
}

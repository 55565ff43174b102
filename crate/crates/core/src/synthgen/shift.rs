//! Rule-based profile-shift sampling.
//!
//! A shift demotes one memory-required domain to transient, adds one new
//! longitudinal domain from the unused active pool, and optionally adds
//! one new transient domain. Domains are drawn with frequency-weighted
//! probability (high:medium:low = 3:2:1) from a per-persona seeded
//! generator, so the same (global seed, persona id) always produces the
//! same plan.

use crate::backend::{GenerationRequest, TextBackend};
use crate::error::{Error, Result};
use crate::model::{AgentUseProfile, DomainId, ShiftPlan};
use crate::prompts::Prompts;
use crate::seeded::SeededRng;

fn weighted_domain_draw(
    profile: &AgentUseProfile,
    candidates: &[&DomainId],
    rng: &mut SeededRng,
) -> DomainId {
    let weights: Vec<u64> = candidates
        .iter()
        .map(|d| {
            profile
                .usage(d)
                .and_then(|u| u.frequency)
                .map(|f| f.shift_weight())
                .unwrap_or(1)
        })
        .collect();
    candidates[rng.weighted_index(&weights)].clone()
}

/// Sample a shift plan. Draw order is fixed: demotion, new longitudinal
/// domain, then (only when transient candidates remain) a p=0.5 coin for
/// the optional transient addition followed by its draw.
pub fn sample_shift(profile: &AgentUseProfile, rng: &mut SeededRng) -> Result<ShiftPlan> {
    let demote_candidates: Vec<&DomainId> = profile
        .selected
        .iter()
        .filter(|d| profile.memory_required(d) == Some(true))
        .collect();
    if demote_candidates.is_empty() {
        return Err(Error::Validation(
            "profile shift: no memory-required domain to demote".to_string(),
        ));
    }
    let unused = profile.unused_active();
    let longitudinal_candidates: Vec<&DomainId> = unused
        .iter()
        .copied()
        .filter(|d| profile.memory_required(d) == Some(true))
        .collect();
    if longitudinal_candidates.is_empty() {
        return Err(Error::Validation(
            "profile shift: no unused memory-required domain to add".to_string(),
        ));
    }

    let demoted = weighted_domain_draw(profile, &demote_candidates, rng);
    let added_longitudinal = weighted_domain_draw(profile, &longitudinal_candidates, rng);

    let transient_candidates: Vec<&DomainId> = unused
        .iter()
        .copied()
        .filter(|d| **d != added_longitudinal && profile.memory_required(d) == Some(false))
        .collect();
    let added_transient = if !transient_candidates.is_empty() && rng.coin(0.5) {
        Some(weighted_domain_draw(profile, &transient_candidates, rng))
    } else {
        None
    };

    Ok(ShiftPlan {
        demoted,
        added_longitudinal,
        added_transient,
        narrative: String::new(),
    })
}

/// Ask the backend for a life-transition event justifying an
/// already-sampled plan. Returns the narrative description text.
pub fn generate_transition_narrative(
    plan: &ShiftPlan,
    persona_text: &str,
    phase1_months: u32,
    memory_domains: &[DomainId],
    oneoff_domains: &[DomainId],
    prompts: &Prompts,
    backend: &dyn TextBackend,
) -> Result<String> {
    let join = |domains: &[DomainId]| {
        if domains.is_empty() {
            "(none)".to_string()
        } else {
            domains
                .iter()
                .map(DomainId::as_str)
                .collect::<Vec<_>>()
                .join(", ")
        }
    };
    let body = prompts.fill(
        &prompts.transition,
        &[
            ("persona", persona_text),
            ("total_months", &phase1_months.to_string()),
            ("mem_domains", &join(memory_domains)),
            ("oneoff_domains", &join(oneoff_domains)),
            ("demoted", plan.demoted.as_str()),
            ("added_longitudinal", plan.added_longitudinal.as_str()),
            (
                "added_transient",
                plan.added_transient
                    .as_ref()
                    .map(DomainId::as_str)
                    .unwrap_or("(none)"),
            ),
        ],
    );
    let request = GenerationRequest::with_messages(
        prompts.transition_system.clone(),
        vec![(crate::backend::Role::User, body)],
    );
    let reply = backend.generate(&request)?;

    #[derive(serde::Deserialize)]
    struct Narrative {
        name: String,
        description: String,
    }
    let narrative: Narrative = crate::backend::jsonx::parse_first(&reply).ok_or_else(|| {
        Error::Validation(format!("transition narrative reply is not valid JSON: {reply}"))
    })?;
    Ok(format!("{}: {}", narrative.name, narrative.description))
}

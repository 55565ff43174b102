//! Dataset invariant checking.
//!
//! `validate_dataset` walks every invariant and reports the first
//! violation, naming the offending id. Loading goes through here, so a
//! `BenchmarkDataset` in hand is always fully validated.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::synthgen::FrequencyScaling;

use super::{
    AgentUseProfile, BenchmarkDataset, DomainId, DomainPool, DomainSkeleton, LifeSkeleton,
    RefKind, Speaker, UserRecord, Variant,
};

pub fn validate_dataset(dataset: &BenchmarkDataset, pool: &DomainPool) -> Result<()> {
    let mut persona_ids = BTreeSet::new();
    for user in &dataset.users {
        let id = &user.persona.id;
        if id.is_empty() {
            return fail("empty persona id");
        }
        if !persona_ids.insert(id.clone()) {
            return fail(&format!("duplicate persona id {id}"));
        }
        if user.persona.description.is_empty() {
            return fail(&format!("persona {id}: empty description"));
        }
        match dataset.variant {
            Variant::Static if user.shift.is_some() => {
                return fail(&format!("persona {id}: static dataset carries a shift record"));
            }
            Variant::Dynamic if user.shift.is_none() => {
                return fail(&format!("persona {id}: dynamic dataset user has no shift record"));
            }
            _ => {}
        }
        validate_user(user, pool)?;
    }
    Ok(())
}

fn fail(message: &str) -> Result<()> {
    Err(Error::Validation(message.to_string()))
}

fn validate_user(user: &UserRecord, pool: &DomainPool) -> Result<()> {
    let id = &user.persona.id;
    validate_profile(user, pool)?;
    validate_timeline_sessions(user, pool)?;
    validate_references(user)?;
    validate_skeletons(user)?;
    if let Some(shift) = &user.shift {
        let last = user.last_session_id();
        if shift.shift_point == 0 || shift.shift_point >= last {
            return fail(&format!(
                "persona {id}: shift_point {} outside [1, {})",
                shift.shift_point, last
            ));
        }
        validate_shift_plan(user)?;
    }
    Ok(())
}

fn validate_profile(user: &UserRecord, pool: &DomainPool) -> Result<()> {
    let id = &user.persona.id;
    let profile = &user.profile;
    if profile.persona != *id {
        return fail(&format!(
            "persona {id}: profile belongs to {}",
            profile.persona
        ));
    }
    for (domain, usage) in &profile.entries {
        if !pool.contains(domain) {
            return fail(&format!("persona {id}: domain {domain} not in the domain pool"));
        }
        if usage.active {
            if usage.frequency.is_none() || usage.memory_required.is_none() {
                return fail(&format!(
                    "persona {id}: active domain {domain} missing frequency or memory_required"
                ));
            }
        } else if usage.frequency.is_some() || usage.memory_required.is_some() {
            return fail(&format!(
                "persona {id}: inactive domain {domain} carries frequency or memory_required"
            ));
        }
    }
    let mut seen = BTreeSet::new();
    let mut required = 0i64;
    let mut transient = 0i64;
    for domain in &profile.selected {
        if !seen.insert(domain.clone()) {
            return fail(&format!("persona {id}: domain {domain} selected twice"));
        }
        match profile.entries.get(domain) {
            Some(usage) if usage.active => match usage.memory_required {
                Some(true) => required += 1,
                Some(false) => transient += 1,
                None => unreachable!("active domains carry memory_required"),
            },
            _ => {
                return fail(&format!(
                    "persona {id}: selected domain {domain} is not an active profile domain"
                ));
            }
        }
    }
    if (required - transient).abs() > 1 {
        return fail(&format!(
            "persona {id}: unbalanced selection ({required} memory-required vs {transient} transient)"
        ));
    }
    Ok(())
}

fn validate_timeline_sessions(user: &UserRecord, pool: &DomainPool) -> Result<()> {
    let id = &user.persona.id;
    let mut last_month = 0u32;
    for (i, session) in user.timeline.iter().enumerate() {
        let expected = (i + 1) as u32;
        if session.session_id != expected {
            return fail(&format!(
                "persona {id}: non-sequential session_id (expected {expected}, found {})",
                session.session_id
            ));
        }
        if session.month == 0 {
            return fail(&format!(
                "persona {id}: session {} has month 0",
                session.session_id
            ));
        }
        if session.month < last_month {
            return fail(&format!(
                "persona {id}: session {} month decreases ({} after {last_month})",
                session.session_id, session.month
            ));
        }
        last_month = session.month;
        if !pool.contains(&session.domain) {
            return fail(&format!(
                "persona {id}: session {} domain {} not in the domain pool",
                session.session_id, session.domain
            ));
        }
        for (j, turn) in session.turns.iter().enumerate() {
            let expected_speaker = if j % 2 == 0 { Speaker::User } else { Speaker::Agent };
            if turn.speaker != expected_speaker {
                return fail(&format!(
                    "persona {id}: session {} turns do not alternate starting with user",
                    session.session_id
                ));
            }
        }
        match user.effective_memory_required(&session.domain, session.session_id) {
            None => {
                return fail(&format!(
                    "persona {id}: session {} domain {} is not part of the profile at that point",
                    session.session_id, session.domain
                ));
            }
            Some(expected_label) if expected_label != session.gt_memory_required => {
                return fail(&format!(
                    "persona {id}: session {} gt_memory_required={} disagrees with the profile ({})",
                    session.session_id, session.gt_memory_required, expected_label
                ));
            }
            _ => {}
        }
    }
    Ok(())
}

fn validate_references(user: &UserRecord) -> Result<()> {
    let id = &user.persona.id;
    let last = user.last_session_id();
    let mut ids = BTreeSet::new();
    let projects: BTreeSet<&str> = user
        .timeline
        .iter()
        .filter_map(|s| s.project.as_deref())
        .collect();
    for reference in &user.references {
        let rid = &reference.id;
        if rid.is_empty() {
            return fail(&format!("persona {id}: reference with empty id"));
        }
        if !ids.insert(rid.clone()) {
            return fail(&format!("persona {id}: duplicate reference id {rid}"));
        }
        if reference.fact.is_empty() {
            return fail(&format!("persona {id}: reference {rid} has an empty fact"));
        }
        if reference.kind == RefKind::OngoingState && reference.project.is_none() {
            return fail(&format!(
                "persona {id}: ongoing_state reference {rid} lacks a project"
            ));
        }
        if reference.t_start == 0 || reference.t_start > last {
            return fail(&format!(
                "persona {id}: reference {rid} t_start {} does not index an existing session",
                reference.t_start
            ));
        }
        if let Some(t_target) = reference.t_target {
            if t_target < reference.t_start || t_target > last {
                return fail(&format!(
                    "persona {id}: reference {rid} t_target {t_target} outside [{}, {last}]",
                    reference.t_start
                ));
            }
        }
        if let Some(project) = &reference.project {
            if !projects.contains(project.as_str()) {
                return fail(&format!(
                    "persona {id}: reference {rid} names unknown project {project}"
                ));
            }
        }
    }
    for reference in &user.references {
        if let Some(superseder) = &reference.superseded_by {
            if !ids.contains(superseder) {
                return fail(&format!(
                    "persona {id}: reference {} superseded by unknown reference {superseder}",
                    reference.id
                ));
            }
        }
    }
    Ok(())
}

fn validate_skeletons(user: &UserRecord) -> Result<()> {
    let pre_shift = |domain: &DomainId| -> Option<bool> {
        if user.profile.selected.contains(domain) {
            user.profile.memory_required(domain)
        } else {
            None
        }
    };
    validate_skeleton_phase(user, &user.skeleton, "skeleton", &pre_shift)?;
    if let Some(shift) = &user.shift {
        let post_shift = |domain: &DomainId| user.effective_memory_required(domain, u32::MAX);
        validate_skeleton_phase(user, &shift.skeleton, "post-shift skeleton", &post_shift)?;
    }
    Ok(())
}

fn validate_skeleton_phase(
    user: &UserRecord,
    skeleton: &LifeSkeleton,
    label: &str,
    memory_required: &dyn Fn(&DomainId) -> Option<bool>,
) -> Result<()> {
    let id = &user.persona.id;
    for (domain, domain_skeleton) in &skeleton.domains {
        let required = match memory_required(domain) {
            Some(m) => m,
            None => {
                return fail(&format!(
                    "persona {id}: {label} domain {domain} is not part of the profile"
                ));
            }
        };
        match domain_skeleton {
            DomainSkeleton::Longitudinal { projects } => {
                if !required {
                    return fail(&format!(
                        "persona {id}: {label} domain {domain} has projects but is transient"
                    ));
                }
                let frequency = user
                    .profile
                    .usage(domain)
                    .and_then(|u| u.frequency)
                    .expect("active domains carry a frequency");
                let scale = FrequencyScaling::for_frequency(frequency);
                if projects.is_empty() {
                    return fail(&format!(
                        "persona {id}: {label} memory-required domain {domain} has no projects"
                    ));
                }
                if projects.len() != scale.n_projects {
                    return fail(&format!(
                        "persona {id}: {label} domain {domain} has {} projects, expected {} for {frequency} frequency",
                        projects.len(),
                        scale.n_projects
                    ));
                }
                for project in projects {
                    let n = project.events.len();
                    if n < scale.events_min || n > scale.events_max {
                        return fail(&format!(
                            "persona {id}: {label} project {} has {n} events, outside [{}, {}]",
                            project.project_id, scale.events_min, scale.events_max
                        ));
                    }
                }
            }
            DomainSkeleton::Transient { events } => {
                if required {
                    return fail(&format!(
                        "persona {id}: {label} domain {domain} is memory-required but holds one-off events"
                    ));
                }
                for event in events {
                    if !event.gt_memory.is_empty() {
                        return fail(&format!(
                            "persona {id}: {label} transient event {} carries reference memories",
                            event.event_id
                        ));
                    }
                }
            }
        }
    }
    Ok(())
}

fn validate_shift_plan(user: &UserRecord) -> Result<()> {
    let id = &user.persona.id;
    let profile: &AgentUseProfile = &user.profile;
    let shift = user.shift.as_ref().expect("caller checked");
    let plan = &shift.plan;

    if !profile.selected.contains(&plan.demoted)
        || profile.memory_required(&plan.demoted) != Some(true)
    {
        return fail(&format!(
            "persona {id}: demoted domain {} is not a selected memory-required domain",
            plan.demoted
        ));
    }
    let unused: BTreeSet<&DomainId> = profile.unused_active().into_iter().collect();
    if !unused.contains(&plan.added_longitudinal)
        || profile.memory_required(&plan.added_longitudinal) != Some(true)
    {
        return fail(&format!(
            "persona {id}: added longitudinal domain {} is not an unused memory-required domain",
            plan.added_longitudinal
        ));
    }
    if let Some(added_transient) = &plan.added_transient {
        if added_transient == &plan.added_longitudinal {
            return fail(&format!(
                "persona {id}: added transient domain equals added longitudinal domain"
            ));
        }
        if !unused.contains(added_transient)
            || profile.memory_required(added_transient) != Some(false)
        {
            return fail(&format!(
                "persona {id}: added transient domain {added_transient} is not an unused transient domain"
            ));
        }
    }
    Ok(())
}

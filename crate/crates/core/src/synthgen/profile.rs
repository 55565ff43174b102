//! Agent-use profile assignment and balanced domain selection.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::backend::{jsonx, GenerationRequest, TextBackend};
use crate::error::{Error, Result};
use crate::model::{AgentUseProfile, DomainId, DomainPool, DomainUsage, Frequency, Persona};
use crate::prompts::Prompts;
use crate::seeded::SeededRng;

#[derive(Deserialize)]
struct DomainReply {
    domain_name: String,
    #[serde(rename = "use")]
    used: bool,
    #[serde(default)]
    memory_required: Option<bool>,
    #[serde(default)]
    frequency: Option<Frequency>,
    #[serde(default)]
    reason: Option<String>,
}

/// Usage triplets plus the model's per-domain reasons (fed back into
/// skeleton prompts).
#[derive(Debug, Clone, Default)]
pub struct ProfileAssignment {
    pub entries: BTreeMap<DomainId, DomainUsage>,
    pub reasons: BTreeMap<DomainId, String>,
}

/// Infer the per-domain usage triplets for one persona through the
/// backend. Pool domains the reply omits are treated as inactive; metadata
/// on `use=false` rows is discarded.
pub fn assign_profile(
    persona: &Persona,
    pool: &DomainPool,
    backend: &dyn TextBackend,
    prompts: &Prompts,
    model_id: &str,
) -> Result<ProfileAssignment> {
    let domain_list = pool
        .iter()
        .enumerate()
        .map(|(i, d)| format!("{}. {d}", i + 1))
        .collect::<Vec<_>>()
        .join("\n");
    let body = prompts.fill(
        &prompts.profile_assign,
        &[
            ("persona", &persona_text(persona)),
            ("domain_list", domain_list.as_str()),
            ("n_domains", &pool.len().to_string()),
        ],
    );
    let request = GenerationRequest::new("", body).with_model(model_id.to_string());

    let mut parsed: Option<Vec<DomainReply>> = None;
    for _ in 0..2 {
        let reply = backend.generate(&request)?;
        if let Some(rows) = jsonx::parse_first::<Vec<DomainReply>>(&reply) {
            parsed = Some(rows);
            break;
        }
    }
    let rows = parsed.ok_or_else(|| {
        Error::Validation(format!(
            "profile assignment for persona {} was unparseable after retry",
            persona.id
        ))
    })?;

    let mut assignment = ProfileAssignment {
        entries: pool.iter().map(|d| (d.clone(), DomainUsage::inactive())).collect(),
        reasons: BTreeMap::new(),
    };
    for row in rows {
        let domain = DomainId::new(row.domain_name.clone());
        if !pool.contains(&domain) {
            // Hallucinated domain name; leave the pool untouched.
            continue;
        }
        let usage = if row.used {
            match (row.frequency, row.memory_required) {
                (Some(f), Some(m)) => DomainUsage::active(f, m),
                // Incomplete metadata on an active row: unusable, keep inactive.
                _ => DomainUsage::inactive(),
            }
        } else {
            DomainUsage::inactive()
        };
        if let Some(reason) = row.reason {
            assignment.reasons.insert(domain.clone(), reason);
        }
        assignment.entries.insert(domain, usage);
    }
    Ok(assignment)
}

pub fn persona_text(persona: &Persona) -> String {
    let mut out = persona.description.clone();
    for (key, value) in &persona.attributes {
        out.push_str(&format!("\n{key}: {value}"));
    }
    out
}

/// Sample `s` domains from the active pool so that memory-required and
/// transient counts differ by at most one. Odd sizes give the extra slot
/// to the memory-required side. Errors when the pools cannot support a
/// balanced selection of size `s`.
pub fn select_balanced(
    entries: &BTreeMap<DomainId, DomainUsage>,
    s: usize,
    rng: &mut SeededRng,
) -> Result<Vec<DomainId>> {
    let mut required: Vec<&DomainId> = Vec::new();
    let mut transient: Vec<&DomainId> = Vec::new();
    for (domain, usage) in entries {
        if usage.active {
            match usage.memory_required {
                Some(true) => required.push(domain),
                Some(false) => transient.push(domain),
                None => {}
            }
        }
    }
    let want_required = s.div_ceil(2);
    let want_transient = s / 2;
    if required.len() < want_required || transient.len() < want_transient {
        return Err(Error::Validation(format!(
            "cannot form a balanced selection of {s} domains: {} memory-required and {} transient available",
            required.len(),
            transient.len()
        )));
    }
    let mut selected: Vec<DomainId> = rng
        .sample_indices(required.len(), want_required)
        .into_iter()
        .map(|i| required[i].clone())
        .collect();
    selected.extend(
        rng.sample_indices(transient.len(), want_transient)
            .into_iter()
            .map(|i| transient[i].clone()),
    );
    selected.sort();
    Ok(selected)
}

/// Assemble a full profile for one persona: backend triplets plus a seeded
/// balanced selection of `s` domains. Also returns the per-domain reasons
/// for downstream skeleton prompts.
pub fn build_profile(
    persona: &Persona,
    pool: &DomainPool,
    s: usize,
    backend: &dyn TextBackend,
    prompts: &Prompts,
    model_id: &str,
    rng: &mut SeededRng,
) -> Result<(AgentUseProfile, BTreeMap<DomainId, String>)> {
    let assignment = assign_profile(persona, pool, backend, prompts, model_id)?;
    let selected = select_balanced(&assignment.entries, s, rng)?;
    Ok((
        AgentUseProfile {
            persona: persona.id.clone(),
            entries: assignment.entries,
            selected,
        },
        assignment.reasons,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::mock::{MockRule, ScriptedMock};
    use crate::fixtures;

    #[test]
    fn assign_profile_parses_the_reply() {
        let reply = r#"[
            {"domain_name": "Travel Planning", "use": true, "memory_required": true, "frequency": "high", "reason": "r"},
            {"domain_name": "News & Current Events", "use": true, "memory_required": false, "frequency": "low", "reason": "r"},
            {"domain_name": "Writing Assistant", "use": false, "memory_required": null, "frequency": null, "reason": "r"},
            {"domain_name": "Made Up Domain", "use": true, "memory_required": true, "frequency": "low", "reason": "r"}
        ]"#;
        let backend = ScriptedMock::with_rules(vec![MockRule::new(["user profile"], [reply])]);
        let assignment = assign_profile(
            &fixtures::persona(0),
            &DomainPool::default(),
            &backend,
            &Prompts::default(),
            "",
        )
        .unwrap();
        let entries = assignment.entries;
        assert_eq!(entries.len(), 20);
        let travel = &entries[&DomainId::new("Travel Planning")];
        assert!(travel.active);
        assert_eq!(travel.frequency, Some(Frequency::High));
        assert!(!entries[&DomainId::new("Writing Assistant")].active);
        assert!(!entries.contains_key(&DomainId::new("Made Up Domain")));
        // Domains the reply skipped default to inactive.
        assert!(!entries[&DomainId::new("Event Planning")].active);
        assert_eq!(
            assignment.reasons[&DomainId::new("Travel Planning")],
            "r".to_string()
        );
    }

    #[test]
    fn unparseable_profile_reply_errors_after_retry() {
        let backend =
            ScriptedMock::with_rules(vec![MockRule::new(["user profile"], ["prose", "prose"])]);
        let result = assign_profile(
            &fixtures::persona(0),
            &DomainPool::default(),
            &backend,
            &Prompts::default(),
            "",
        );
        assert!(result.is_err());
    }

    fn active_entries(required: usize, transient: usize) -> BTreeMap<DomainId, DomainUsage> {
        let pool = DomainPool::default();
        let mut entries: BTreeMap<DomainId, DomainUsage> = BTreeMap::new();
        for (i, domain) in pool.iter().enumerate() {
            let usage = if i < required {
                DomainUsage::active(Frequency::Medium, true)
            } else if i < required + transient {
                DomainUsage::active(Frequency::Low, false)
            } else {
                DomainUsage::inactive()
            };
            entries.insert(domain.clone(), usage);
        }
        entries
    }

    #[test]
    fn selection_is_balanced() {
        let entries = active_entries(6, 6);
        let mut rng = SeededRng::new(5);
        let selected = select_balanced(&entries, 6, &mut rng).unwrap();
        assert_eq!(selected.len(), 6);
        let required = selected
            .iter()
            .filter(|d| entries[*d].memory_required == Some(true))
            .count();
        assert_eq!(required, 3);

        // Odd size: the memory-required side gets the extra slot.
        let selected = select_balanced(&entries, 5, &mut SeededRng::new(6)).unwrap();
        let required = selected
            .iter()
            .filter(|d| entries[*d].memory_required == Some(true))
            .count();
        assert_eq!(required, 3);
    }

    #[test]
    fn selection_is_deterministic_per_seed() {
        let entries = active_entries(6, 6);
        let a = select_balanced(&entries, 6, &mut SeededRng::new(9)).unwrap();
        let b = select_balanced(&entries, 6, &mut SeededRng::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn insufficient_pools_error() {
        let entries = active_entries(1, 6);
        assert!(select_balanced(&entries, 6, &mut SeededRng::new(1)).is_err());
    }
}

//! Retention-horizon computation.
//!
//! Fills `t_target` for every reference memory: project-scoped facts are
//! retained until their project's last session, user-level facts until the
//! end of the timeline or until a superseding fact appears. Idempotent.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

use super::{BenchmarkDataset, RefKind, UserRecord};

pub fn compute_retention_horizons(dataset: &mut BenchmarkDataset) -> Result<()> {
    for user in &mut dataset.users {
        compute_user_horizons(user)?;
    }
    Ok(())
}

fn compute_user_horizons(user: &mut UserRecord) -> Result<()> {
    let persona = user.persona.id.clone();
    let last = user.last_session_id();

    // Last session of every project in the timeline.
    let mut project_end: BTreeMap<&str, u32> = BTreeMap::new();
    for session in &user.timeline {
        if let Some(project) = session.project.as_deref() {
            let end = project_end.entry(project).or_insert(0);
            *end = (*end).max(session.session_id);
        }
    }

    // t_start of every reference, for superseded_by resolution.
    let starts: BTreeMap<String, u32> = user
        .references
        .iter()
        .map(|r| (r.id.clone(), r.t_start))
        .collect();

    detect_supersession_cycles(user, &persona)?;

    for reference in &mut user.references {
        let t_target = match reference.kind {
            RefKind::OngoingState => {
                let project = reference.project.as_deref().ok_or_else(|| {
                    Error::Validation(format!(
                        "persona {persona}: ongoing_state reference {} lacks a project",
                        reference.id
                    ))
                })?;
                *project_end.get(project).ok_or_else(|| {
                    Error::Validation(format!(
                        "persona {persona}: reference {} names unknown project {project}",
                        reference.id
                    ))
                })?
            }
            RefKind::UserProfile => match &reference.superseded_by {
                Some(superseder) => {
                    let superseder_start = *starts.get(superseder).ok_or_else(|| {
                        Error::Validation(format!(
                            "persona {persona}: reference {} superseded by unknown reference {superseder}",
                            reference.id
                        ))
                    })?;
                    if superseder_start <= reference.t_start {
                        return Err(Error::Validation(format!(
                            "persona {persona}: reference {} superseded at {} which is not after its start {}",
                            reference.id, superseder_start, reference.t_start
                        )));
                    }
                    superseder_start - 1
                }
                None => last,
            },
        };
        if t_target < reference.t_start {
            return Err(Error::Validation(format!(
                "persona {persona}: reference {} horizon {t_target} precedes t_start {}",
                reference.id, reference.t_start
            )));
        }
        reference.t_target = Some(t_target);
    }
    Ok(())
}

fn detect_supersession_cycles(user: &UserRecord, persona: &str) -> Result<()> {
    let links: BTreeMap<&str, &str> = user
        .references
        .iter()
        .filter_map(|r| r.superseded_by.as_deref().map(|s| (r.id.as_str(), s)))
        .collect();
    for start in links.keys() {
        let mut seen = BTreeSet::new();
        let mut current = *start;
        while let Some(next) = links.get(current) {
            if !seen.insert(current) {
                return Err(Error::Validation(format!(
                    "persona {persona}: superseded_by cycle involving reference {current}"
                )));
            }
            current = next;
        }
        if seen.contains(current) {
            return Err(Error::Validation(format!(
                "persona {persona}: superseded_by cycle involving reference {current}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::dataset_with_project_span;
    use crate::model::{RefKind, ReferenceMemory};

    fn reference(id: &str, kind: RefKind, t_start: u32, project: Option<&str>) -> ReferenceMemory {
        ReferenceMemory {
            id: id.to_string(),
            kind,
            fact: format!("fact {id}"),
            probing_question: None,
            answer: None,
            t_start,
            t_target: None,
            project: project.map(str::to_string),
            superseded_by: None,
        }
    }

    #[test]
    fn ongoing_state_ends_with_its_project() {
        // Project spans sessions 4..9; a fact starting at 5 is retained to 9.
        let mut dataset = dataset_with_project_span(9, "p1", 4, 9);
        dataset.users[0].references =
            vec![reference("r1", RefKind::OngoingState, 5, Some("p1"))];
        compute_retention_horizons(&mut dataset).unwrap();
        assert_eq!(dataset.users[0].references[0].t_target, Some(9));
    }

    #[test]
    fn user_profile_defaults_to_timeline_end() {
        let mut dataset = dataset_with_project_span(30, "p1", 1, 2);
        dataset.users[0].references = vec![reference("r1", RefKind::UserProfile, 1, None)];
        compute_retention_horizons(&mut dataset).unwrap();
        assert_eq!(dataset.users[0].references[0].t_target, Some(30));
    }

    #[test]
    fn superseded_fact_ends_before_its_successor() {
        // Hand application of the rule: superseder starts at 12, so the
        // superseded fact's horizon is 11.
        let mut dataset = dataset_with_project_span(30, "p1", 1, 2);
        let mut old = reference("r-old", RefKind::UserProfile, 3, None);
        old.superseded_by = Some("r-new".to_string());
        let new = reference("r-new", RefKind::UserProfile, 12, None);
        dataset.users[0].references = vec![old, new];
        compute_retention_horizons(&mut dataset).unwrap();
        assert_eq!(dataset.users[0].references[0].t_target, Some(11));
        assert_eq!(dataset.users[0].references[1].t_target, Some(30));
    }

    #[test]
    fn unknown_project_is_an_error() {
        let mut dataset = dataset_with_project_span(5, "p1", 1, 5);
        dataset.users[0].references =
            vec![reference("r1", RefKind::OngoingState, 1, Some("missing"))];
        let err = compute_retention_horizons(&mut dataset).unwrap_err();
        assert!(err.to_string().contains("unknown project"));
    }

    #[test]
    fn supersession_cycle_is_an_error() {
        let mut dataset = dataset_with_project_span(5, "p1", 1, 5);
        let mut a = reference("r-a", RefKind::UserProfile, 1, None);
        a.superseded_by = Some("r-b".to_string());
        let mut b = reference("r-b", RefKind::UserProfile, 2, None);
        b.superseded_by = Some("r-a".to_string());
        dataset.users[0].references = vec![a, b];
        let err = compute_retention_horizons(&mut dataset).unwrap_err();
        assert!(err.to_string().contains("cycle"));
    }

    #[test]
    fn idempotent() {
        let mut dataset = dataset_with_project_span(9, "p1", 4, 9);
        dataset.users[0].references = vec![
            reference("r1", RefKind::OngoingState, 5, Some("p1")),
            reference("r2", RefKind::UserProfile, 2, None),
        ];
        compute_retention_horizons(&mut dataset).unwrap();
        let once = dataset.clone();
        compute_retention_horizons(&mut dataset).unwrap();
        assert_eq!(dataset, once);
    }
}

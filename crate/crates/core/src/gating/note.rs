//! The structural note: a persistent partition of sessions into inferred
//! projects and isolated one-offs.
//!
//! The note is updated every U sessions and carried forward across windows
//! (never reset), so later evidence can retroactively reassign previously
//! isolated sessions into projects. After every update the partition
//! invariant holds: each covered session id appears in exactly one place.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::backend::{jsonx, GenerationRequest, TextBackend};
use crate::error::{Error, Result};
use crate::model::Session;
use crate::prompts::Prompts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoteStatus {
    Ongoing,
    Completed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteProject {
    pub project_id: String,
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub core_topic: String,
    pub session_ids: BTreeSet<u32>,
    pub status: NoteStatus,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StructuralNote {
    pub projects: Vec<NoteProject>,
    pub isolated_sessions: BTreeSet<u32>,
    /// Highest session id covered by a completed update window.
    #[serde(default)]
    pub covered_through: u32,
}

impl StructuralNote {
    /// All session ids assigned anywhere in the note.
    pub fn assigned_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self
            .projects
            .iter()
            .flat_map(|p| p.session_ids.iter().copied())
            .chain(self.isolated_sessions.iter().copied())
            .collect();
        ids.sort_unstable();
        ids
    }

    /// The partition invariant: assigned ids are exactly 1..=covered_through,
    /// each appearing once (projects pairwise disjoint and disjoint from
    /// the isolated set).
    pub fn partition_holds(&self) -> bool {
        let assigned = self.assigned_ids();
        let expected: Vec<u32> = (1..=self.covered_through).collect();
        assigned == expected
    }

    fn project_of(&self, session_id: u32) -> Option<&NoteProject> {
        self.projects.iter().find(|p| p.session_ids.contains(&session_id))
    }
}

/// Classify one session against the note: sessions in any project are
/// worth storing, isolated sessions are transient, and sessions not yet
/// covered by a completed window default to storing. Pure function of
/// (session id, note).
pub fn gate_structure(session_id: u32, note: &StructuralNote) -> super::GateDecision {
    let (memory_required, rationale) = if let Some(project) = note.project_of(session_id) {
        (true, Some(format!("in project {}", project.project_id)))
    } else if note.isolated_sessions.contains(&session_id) {
        (false, Some("isolated session".to_string()))
    } else {
        (true, Some("not yet covered by a completed window".to_string()))
    };
    super::GateDecision {
        session_id,
        memory_required,
        policy: "structure".to_string(),
        rationale,
    }
}

/// Lightweight per-session record feeding the note updater.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: u32,
    pub purpose: String,
    pub summary: String,
    pub topic: String,
}

#[derive(Deserialize)]
struct RecordReply {
    purpose: String,
    summary: String,
    topic: String,
}

/// Extract a `{purpose, summary, topic}` record for one session, with one
/// retry. A malformed reply degrades to a record built from the opening
/// user turn so the window can still be folded into the note.
pub fn extract_session_record(
    session: &Session,
    backend: &dyn TextBackend,
    prompts: &Prompts,
    model_id: &str,
    max_chars: usize,
) -> Result<SessionRecord> {
    let dialogue: String = session.render_dialogue().chars().take(max_chars).collect();
    let body = prompts.fill(&prompts.session_record, &[("dialogue", dialogue.as_str())]);
    let request = GenerationRequest::new("", body).with_model(model_id.to_string());
    for _ in 0..2 {
        let reply = backend.generate(&request)?;
        if let Some(parsed) = jsonx::parse_first::<RecordReply>(&reply) {
            if !parsed.purpose.is_empty() && !parsed.summary.is_empty() && !parsed.topic.is_empty()
            {
                return Ok(SessionRecord {
                    session_id: session.session_id,
                    purpose: parsed.purpose,
                    summary: parsed.summary,
                    topic: parsed.topic,
                });
            }
        }
    }
    let head: String = session
        .turns
        .first()
        .map(|t| t.text.chars().take(120).collect())
        .unwrap_or_else(|| "(empty session)".to_string());
    Ok(SessionRecord {
        session_id: session.session_id,
        purpose: head.clone(),
        summary: head,
        topic: session.domain.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteUpdateOutcome {
    /// The note came from the fallback path (reply invalid after retry):
    /// the window's sessions were appended to the isolated set and the
    /// rest of the note was left unchanged.
    pub fell_back: bool,
}

#[derive(Deserialize)]
struct NoteReply {
    projects: Vec<NoteProjectReply>,
    isolated_sessions: Vec<u32>,
}

#[derive(Deserialize)]
struct NoteProjectReply {
    project_id: String,
    #[serde(default)]
    label: String,
    #[serde(default)]
    core_topic: String,
    session_ids: Vec<u32>,
    status: NoteStatus,
}

/// Fold a completed window of session records into the note.
///
/// The records must cover the contiguous window that starts right after
/// the last covered session. The backend's proposed note is validated
/// against the partition invariant over the enlarged covered range;
/// reassignment of previously isolated sessions is allowed. Invalid
/// replies get one retry and then the fallback: isolate the window's
/// sessions, leaving everything else unchanged.
pub fn update_structural_note(
    note: &mut StructuralNote,
    records: &[SessionRecord],
    backend: &dyn TextBackend,
    prompts: &Prompts,
    model_id: &str,
) -> Result<NoteUpdateOutcome> {
    if records.is_empty() {
        return Err(Error::Validation("note update with no records".to_string()));
    }
    let start = records[0].session_id;
    let end = records[records.len() - 1].session_id;
    if start != note.covered_through + 1 {
        return Err(Error::Validation(format!(
            "note update window starts at {start}, expected {}",
            note.covered_through + 1
        )));
    }
    for (i, record) in records.iter().enumerate() {
        if record.session_id != start + i as u32 {
            return Err(Error::Validation(
                "note update records are not a contiguous window".to_string(),
            ));
        }
    }

    let current_note = serde_json::json!({
        "projects": note.projects,
        "isolated_sessions": note.isolated_sessions,
    });
    let rendered_records = records
        .iter()
        .map(|r| {
            format!(
                "[session {}] purpose: {} | summary: {} | topic: {}",
                r.session_id, r.purpose, r.summary, r.topic
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    let body = prompts.fill(
        &prompts.note_update,
        &[
            ("current_note", &current_note.to_string()),
            ("start", &start.to_string()),
            ("end", &end.to_string()),
            ("session_records", rendered_records.as_str()),
        ],
    );
    let request = GenerationRequest::new("", body).with_model(model_id.to_string());

    let new_covered = end;
    for _ in 0..2 {
        let reply = backend.generate(&request)?;
        if let Some(candidate) = parse_note_reply(&reply, new_covered) {
            *note = candidate;
            return Ok(NoteUpdateOutcome { fell_back: false });
        }
    }

    // Fallback: the window's sessions become isolated; the partition over
    // the enlarged range still holds because previous coverage was valid.
    for record in records {
        note.isolated_sessions.insert(record.session_id);
    }
    note.covered_through = new_covered;
    Ok(NoteUpdateOutcome { fell_back: true })
}

/// Parse and validate a proposed note. Returns `None` unless the proposal
/// partitions exactly the ids 1..=covered_through.
fn parse_note_reply(reply: &str, covered_through: u32) -> Option<StructuralNote> {
    let parsed: NoteReply = jsonx::parse_first(reply)?;
    let mut seen = BTreeSet::new();
    let mut push = |id: u32| -> bool { id >= 1 && id <= covered_through && seen.insert(id) };
    let mut projects = Vec::new();
    for project in parsed.projects {
        let mut session_ids = BTreeSet::new();
        for id in project.session_ids {
            if !push(id) {
                return None;
            }
            session_ids.insert(id);
        }
        projects.push(NoteProject {
            project_id: project.project_id,
            label: project.label,
            core_topic: project.core_topic,
            session_ids,
            status: project.status,
        });
    }
    let mut isolated_sessions = BTreeSet::new();
    for id in parsed.isolated_sessions {
        if !push(id) {
            return None;
        }
        isolated_sessions.insert(id);
    }
    if seen.len() as u32 != covered_through {
        return None;
    }
    Some(StructuralNote {
        projects,
        isolated_sessions,
        covered_through,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::mock::{MockRule, ScriptedMock};

    fn record(session_id: u32) -> SessionRecord {
        SessionRecord {
            session_id,
            purpose: format!("purpose {session_id}"),
            summary: format!("summary {session_id}"),
            topic: "topic".to_string(),
        }
    }

    fn note_backend(replies: Vec<&str>) -> ScriptedMock {
        ScriptedMock::with_rules(vec![MockRule::new(["structural note"], replies)])
    }

    #[test]
    fn valid_reply_replaces_the_note() {
        let mut note = StructuralNote::default();
        let backend = note_backend(vec![
            r#"{"projects":[{"project_id":"P1","label":"l","core_topic":"t","session_ids":[1,2],"status":"ongoing"}],"isolated_sessions":[3]}"#,
        ]);
        let records: Vec<SessionRecord> = (1..=3).map(record).collect();
        let outcome =
            update_structural_note(&mut note, &records, &backend, &Prompts::default(), "").unwrap();
        assert!(!outcome.fell_back);
        assert_eq!(note.projects.len(), 1);
        assert_eq!(note.isolated_sessions, BTreeSet::from([3]));
        assert!(note.partition_holds());
    }

    #[test]
    fn duplicate_session_reply_falls_back_to_isolation() {
        let mut note = StructuralNote::default();
        // Session 2 appears twice; both attempts invalid.
        let reply = r#"{"projects":[{"project_id":"P1","session_ids":[1,2],"status":"ongoing"}],"isolated_sessions":[2,3]}"#;
        let backend = note_backend(vec![reply, reply]);
        let records: Vec<SessionRecord> = (1..=3).map(record).collect();
        let outcome =
            update_structural_note(&mut note, &records, &backend, &Prompts::default(), "").unwrap();
        assert!(outcome.fell_back);
        assert_eq!(note.isolated_sessions, BTreeSet::from([1, 2, 3]));
        assert!(note.projects.is_empty());
        assert!(note.partition_holds());
    }

    #[test]
    fn second_window_can_reassign_isolated_sessions() {
        let mut note = StructuralNote::default();
        let backend = note_backend(vec![
            r#"{"projects":[{"project_id":"P1","session_ids":[1,2],"status":"ongoing"}],"isolated_sessions":[3]}"#,
            r#"{"projects":[{"project_id":"P1","session_ids":[1,2,3,4],"status":"ongoing"}],"isolated_sessions":[5,6]}"#,
        ]);
        let first: Vec<SessionRecord> = (1..=3).map(record).collect();
        update_structural_note(&mut note, &first, &backend, &Prompts::default(), "").unwrap();
        assert!(note.isolated_sessions.contains(&3));

        let second: Vec<SessionRecord> = (4..=6).map(record).collect();
        update_structural_note(&mut note, &second, &backend, &Prompts::default(), "").unwrap();
        assert!(!note.isolated_sessions.contains(&3));
        assert!(note.projects[0].session_ids.contains(&3));
        assert!(note.partition_holds());
    }

    #[test]
    fn retry_is_attempted_before_fallback() {
        let mut note = StructuralNote::default();
        let backend = note_backend(vec![
            "not json at all",
            r#"{"projects":[],"isolated_sessions":[1,2]}"#,
        ]);
        let records: Vec<SessionRecord> = (1..=2).map(record).collect();
        let outcome =
            update_structural_note(&mut note, &records, &backend, &Prompts::default(), "").unwrap();
        assert!(!outcome.fell_back);
        assert_eq!(note.isolated_sessions, BTreeSet::from([1, 2]));
    }

    #[test]
    fn non_contiguous_window_is_rejected() {
        let mut note = StructuralNote::default();
        let backend = note_backend(vec!["{}"]);
        let records = vec![record(1), record(3)];
        assert!(
            update_structural_note(&mut note, &records, &backend, &Prompts::default(), "").is_err()
        );
        // Window must start right after covered_through.
        let records = vec![record(2), record(3)];
        assert!(
            update_structural_note(&mut note, &records, &backend, &Prompts::default(), "").is_err()
        );
    }

    #[test]
    fn gate_structure_classification() {
        let note = StructuralNote {
            projects: vec![NoteProject {
                project_id: "P1".to_string(),
                label: String::new(),
                core_topic: String::new(),
                session_ids: BTreeSet::from([1, 2]),
                status: NoteStatus::Ongoing,
            }],
            isolated_sessions: BTreeSet::from([3, 4, 5]),
            covered_through: 5,
        };
        assert!(gate_structure(1, &note).memory_required);
        assert!(!gate_structure(4, &note).memory_required);
        // Session 7 past the last completed window: conservative default.
        assert!(gate_structure(7, &note).memory_required);
    }

    #[test]
    fn alien_session_ids_invalidate_the_reply() {
        let mut note = StructuralNote::default();
        let reply = r#"{"projects":[{"project_id":"P1","session_ids":[1,99],"status":"ongoing"}],"isolated_sessions":[2,3]}"#;
        let backend = note_backend(vec![reply, reply]);
        let records: Vec<SessionRecord> = (1..=3).map(record).collect();
        let outcome =
            update_structural_note(&mut note, &records, &backend, &Prompts::default(), "").unwrap();
        assert!(outcome.fell_back);
    }
}

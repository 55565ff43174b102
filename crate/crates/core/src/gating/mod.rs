//! Session-level storage gating.
//!
//! A gate inspects each session (and, depending on the policy, prior
//! context) and predicts whether it is worth storing; sessions predicted
//! transient skip memory operations entirely. Five policies: Universal
//! (always store), Oracle (ground-truth profile), Greedy (current dialogue
//! only), Context-aware (sliding window of session summaries), and
//! Structure-aware (persistent project/isolated partition).

mod note;

pub use note::{
    gate_structure, update_structural_note, NoteProject, NoteStatus, NoteUpdateOutcome,
    SessionRecord, StructuralNote,
};

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backend::{jsonx, GenerationRequest, TextBackend};
use crate::error::{Error, Result};
use crate::model::{effective_memory_required, AgentUseProfile, Session, ShiftPlan};
use crate::prompts::Prompts;

/// Sliding-window size for the Context-aware policy (summaries kept).
pub const DEFAULT_CONTEXT_WINDOW: usize = 5;
/// Structural-note update interval (sessions per window).
pub const DEFAULT_NOTE_INTERVAL: usize = 5;
/// Dialogue truncation for gate prompts, in characters.
pub const DEFAULT_MAX_CHARS: usize = 8000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateDecision {
    pub session_id: u32,
    pub memory_required: bool,
    pub policy: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

/// Always store: the default policy of deployed memory systems.
pub fn gate_universal(session: &Session) -> GateDecision {
    GateDecision {
        session_id: session.session_id,
        memory_required: true,
        policy: "universal".to_string(),
        rationale: None,
    }
}

/// Ground-truth gating from the agent-use profile, honoring the shift for
/// dynamic timelines. Errors when the session's domain is not part of the
/// profile at that point.
pub fn gate_oracle(
    session: &Session,
    profile: &AgentUseProfile,
    shift: Option<(u32, &ShiftPlan)>,
) -> Result<GateDecision> {
    let memory_required =
        effective_memory_required(profile, shift, &session.domain, session.session_id)
            .ok_or_else(|| {
                Error::Validation(format!(
                    "oracle gate: domain {} absent from the profile at session {}",
                    session.domain, session.session_id
                ))
            })?;
    Ok(GateDecision {
        session_id: session.session_id,
        memory_required,
        policy: "oracle".to_string(),
        rationale: None,
    })
}

fn truncate_chars(text: &str, max_chars: usize) -> String {
    if text.chars().count() <= max_chars {
        text.to_string()
    } else {
        text.chars().take(max_chars).collect()
    }
}

#[derive(Deserialize)]
struct GateReply {
    memory_required: bool,
}

/// Issue a gate prompt and parse `{"memory_required": <bool>}`, with one
/// retry. Malformed output after the retry falls back to storing: a false
/// positive wastes budget, a false negative destroys facts irrecoverably.
fn backend_gate_decision(
    backend: &dyn TextBackend,
    body: String,
    model_id: &str,
    policy: &str,
    session_id: u32,
) -> Result<GateDecision> {
    let request = GenerationRequest::new("", body).with_model(model_id.to_string());
    let mut rationale = None;
    let mut memory_required = true;
    for attempt in 0..2 {
        let reply = backend.generate(&request)?;
        if let Some(parsed) = jsonx::parse_first::<GateReply>(&reply) {
            memory_required = parsed.memory_required;
            break;
        }
        if attempt == 1 {
            rationale = Some("malformed gate reply after retry; defaulted to store".to_string());
        }
    }
    Ok(GateDecision {
        session_id,
        memory_required,
        policy: policy.to_string(),
        rationale,
    })
}

/// Predict from the current session's dialogue alone.
pub fn gate_greedy(
    session: &Session,
    backend: &dyn TextBackend,
    prompts: &Prompts,
    model_id: &str,
    max_chars: usize,
) -> Result<GateDecision> {
    if session.turns.is_empty() {
        return Err(Error::Validation(format!(
            "greedy gate: session {} has an empty dialogue",
            session.session_id
        )));
    }
    let dialogue = truncate_chars(&session.render_dialogue(), max_chars);
    let body = prompts.fill(&prompts.gate_greedy, &[("current_dialogue", dialogue.as_str())]);
    backend_gate_decision(backend, body, model_id, "greedy", session.session_id)
}

/// Sliding window of recent session summaries, ordered by session id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryBuffer {
    pub window: usize,
    items: VecDeque<(u32, String)>,
}

impl SummaryBuffer {
    pub fn new(window: usize) -> Self {
        Self {
            window,
            items: VecDeque::new(),
        }
    }

    pub fn push(&mut self, session_id: u32, summary: String) {
        self.items.push_back((session_id, summary));
        while self.items.len() > self.window {
            self.items.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(u32, String)> {
        self.items.iter()
    }

    fn rendered(&self) -> String {
        if self.items.is_empty() {
            "(none)".to_string()
        } else {
            self.items
                .iter()
                .map(|(id, summary)| format!("[session {id}] {summary}"))
                .collect::<Vec<_>>()
                .join("\n")
        }
    }
}

/// Predict using the current dialogue plus buffered summaries, then
/// summarize the session and append it to the buffer (evicting the oldest
/// summary beyond the window).
pub fn gate_context(
    session: &Session,
    buffer: &mut SummaryBuffer,
    backend: &dyn TextBackend,
    prompts: &Prompts,
    model_id: &str,
    max_chars: usize,
) -> Result<GateDecision> {
    let dialogue = truncate_chars(&session.render_dialogue(), max_chars);
    let body = prompts.fill(
        &prompts.gate_context,
        &[
            ("window", &buffer.window.to_string()),
            ("history_summaries", buffer.rendered().as_str()),
            ("current_dialogue", dialogue.as_str()),
        ],
    );
    let decision =
        backend_gate_decision(backend, body, model_id, "context", session.session_id)?;

    let summary_body = prompts.fill(
        &prompts.summarize_session,
        &[("current_dialogue", dialogue.as_str())],
    );
    let summary_request = GenerationRequest::new("", summary_body).with_model(model_id.to_string());
    let summary = backend.generate(&summary_request)?;
    buffer.push(session.session_id, summary.trim().to_string());
    Ok(decision)
}

/// Which gating policy a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatePolicy {
    Universal,
    Oracle,
    Greedy,
    Context,
    Structure,
}

impl GatePolicy {
    pub const ALL: [GatePolicy; 5] = [
        GatePolicy::Universal,
        GatePolicy::Oracle,
        GatePolicy::Greedy,
        GatePolicy::Context,
        GatePolicy::Structure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GatePolicy::Universal => "universal",
            GatePolicy::Oracle => "oracle",
            GatePolicy::Greedy => "greedy",
            GatePolicy::Context => "context",
            GatePolicy::Structure => "structure",
        }
    }
}

impl std::str::FromStr for GatePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "universal" => Ok(GatePolicy::Universal),
            "oracle" => Ok(GatePolicy::Oracle),
            "greedy" => Ok(GatePolicy::Greedy),
            "context" => Ok(GatePolicy::Context),
            "structure" => Ok(GatePolicy::Structure),
            other => Err(Error::Config(format!("unknown gating policy {other}"))),
        }
    }
}

/// Per-user gate state. Policies are stateful (summary buffer, structural
/// note); one `Gate` serves one user, sequentially.
pub enum Gate {
    Universal,
    Oracle {
        profile: AgentUseProfile,
        shift: Option<(u32, ShiftPlan)>,
    },
    Greedy {
        prompts: Arc<Prompts>,
        model_id: String,
        max_chars: usize,
    },
    Context {
        prompts: Arc<Prompts>,
        model_id: String,
        max_chars: usize,
        buffer: SummaryBuffer,
    },
    Structure {
        prompts: Arc<Prompts>,
        model_id: String,
        max_chars: usize,
        interval: usize,
        note: StructuralNote,
        pending: Vec<SessionRecord>,
    },
}

impl Gate {
    pub fn new(
        policy: GatePolicy,
        profile: &AgentUseProfile,
        shift: Option<(u32, &ShiftPlan)>,
        prompts: Arc<Prompts>,
        model_id: &str,
    ) -> Self {
        match policy {
            GatePolicy::Universal => Gate::Universal,
            GatePolicy::Oracle => Gate::Oracle {
                profile: profile.clone(),
                shift: shift.map(|(point, plan)| (point, plan.clone())),
            },
            GatePolicy::Greedy => Gate::Greedy {
                prompts,
                model_id: model_id.to_string(),
                max_chars: DEFAULT_MAX_CHARS,
            },
            GatePolicy::Context => Gate::Context {
                prompts,
                model_id: model_id.to_string(),
                max_chars: DEFAULT_MAX_CHARS,
                buffer: SummaryBuffer::new(DEFAULT_CONTEXT_WINDOW),
            },
            GatePolicy::Structure => Gate::Structure {
                prompts,
                model_id: model_id.to_string(),
                max_chars: DEFAULT_MAX_CHARS,
                interval: DEFAULT_NOTE_INTERVAL,
                note: StructuralNote::default(),
                pending: Vec::new(),
            },
        }
    }

    /// Decide for one session. Sessions must be fed in timeline order.
    pub fn decide(&mut self, session: &Session, backend: &dyn TextBackend) -> Result<GateDecision> {
        match self {
            Gate::Universal => Ok(gate_universal(session)),
            Gate::Oracle { profile, shift } => gate_oracle(
                session,
                profile,
                shift.as_ref().map(|(point, plan)| (*point, plan)),
            ),
            Gate::Greedy {
                prompts,
                model_id,
                max_chars,
            } => gate_greedy(session, backend, prompts, model_id, *max_chars),
            Gate::Context {
                prompts,
                model_id,
                max_chars,
                buffer,
            } => gate_context(session, buffer, backend, prompts, model_id, *max_chars),
            Gate::Structure {
                prompts,
                model_id,
                max_chars,
                interval,
                note,
                pending,
            } => {
                // Decide from the note as it stands, then fold this
                // session's record into the pending window. Each session is
                // gated once, at its own time; retroactive reassignment
                // only affects the note, not past decisions.
                let decision = gate_structure(session.session_id, note);
                let record = note::extract_session_record(
                    session,
                    backend,
                    prompts,
                    model_id,
                    *max_chars,
                )?;
                pending.push(record);
                if pending.len() >= *interval {
                    let records: Vec<SessionRecord> = std::mem::take(pending);
                    update_structural_note(note, &records, backend, prompts, model_id)?;
                }
                Ok(decision)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::mock::{MockRule, ScriptedMock};
    use crate::fixtures;
    use crate::model::{DomainId, Turn};

    fn session(id: u32, domain: &str) -> Session {
        Session {
            session_id: id,
            domain: DomainId::new(domain),
            month: 1,
            turns: vec![Turn::user("hello there"), Turn::agent("hi")],
            gt_memory_required: true,
            project: None,
            event_id: format!("e{id}"),
        }
    }

    #[test]
    fn universal_always_stores() {
        let s = session(3, fixtures::TRANSIENT_DOMAIN);
        let decision = gate_universal(&s);
        assert!(decision.memory_required);
        assert_eq!(decision.policy, "universal");
    }

    #[test]
    fn oracle_reads_the_profile() {
        let profile = fixtures::four_domain_profile("p");
        let long = session(1, fixtures::LONG_DOMAIN);
        let transient = session(2, fixtures::TRANSIENT_DOMAIN);
        assert!(gate_oracle(&long, &profile, None).unwrap().memory_required);
        assert!(!gate_oracle(&transient, &profile, None).unwrap().memory_required);

        let unknown = session(3, "Event Planning");
        assert!(gate_oracle(&unknown, &profile, None).is_err());
    }

    #[test]
    fn oracle_honors_the_shift() {
        let profile = fixtures::four_domain_profile("p");
        let plan = ShiftPlan {
            demoted: DomainId::new(fixtures::LONG_DOMAIN),
            added_longitudinal: DomainId::new("Language Learning"),
            added_transient: None,
            narrative: String::new(),
        };
        let before = session(5, fixtures::LONG_DOMAIN);
        let after = session(11, fixtures::LONG_DOMAIN);
        assert!(gate_oracle(&before, &profile, Some((10, &plan)))
            .unwrap()
            .memory_required);
        assert!(!gate_oracle(&after, &profile, Some((10, &plan)))
            .unwrap()
            .memory_required);

        let added = session(12, "Language Learning");
        assert!(gate_oracle(&added, &profile, Some((10, &plan)))
            .unwrap()
            .memory_required);
    }

    #[test]
    fn greedy_parses_the_scripted_reply() {
        let prompts = Prompts::default();
        let s = session(1, fixtures::LONG_DOMAIN);
        for (reply, expected) in [
            (r#"{"memory_required": false}"#, false),
            (r#"{"memory_required": true}"#, true),
        ] {
            let backend =
                ScriptedMock::with_rules(vec![MockRule::new(["memory policy agent"], [reply])]);
            let decision = gate_greedy(&s, &backend, &prompts, "", 8000).unwrap();
            assert_eq!(decision.memory_required, expected);
        }
    }

    #[test]
    fn greedy_prose_reply_retries_then_defaults_to_store() {
        let prompts = Prompts::default();
        let s = session(1, fixtures::LONG_DOMAIN);
        let backend = ScriptedMock::with_rules(vec![MockRule::new(
            ["memory policy agent"],
            ["I think yes?", "definitely prose"],
        )]);
        let decision = gate_greedy(&s, &backend, &prompts, "", 8000).unwrap();
        assert!(decision.memory_required);
        assert!(decision.rationale.is_some());
    }

    #[test]
    fn greedy_empty_dialogue_is_an_error() {
        let prompts = Prompts::default();
        let mut s = session(1, fixtures::LONG_DOMAIN);
        s.turns.clear();
        let backend = ScriptedMock::single("x");
        assert!(gate_greedy(&s, &backend, &prompts, "", 8000).is_err());
    }

    #[test]
    fn context_window_slides() {
        let prompts = Prompts::default();
        let backend = ScriptedMock::with_rules(vec![
            MockRule::new(["memory policy agent"], [r#"{"memory_required": true}"#]),
            MockRule::new(["Summarize this conversation"], ["a summary"]),
        ]);
        let mut buffer = SummaryBuffer::new(3);
        for id in 1..=4 {
            let s = session(id, fixtures::LONG_DOMAIN);
            gate_context(&s, &mut buffer, &backend, &prompts, "", 8000).unwrap();
        }
        // W=3 after 4 sessions: summaries of sessions 2, 3, 4.
        let ids: Vec<u32> = buffer.iter().map(|(id, _)| *id).collect();
        assert_eq!(ids, vec![2, 3, 4]);
        let texts: Vec<&str> = buffer.iter().map(|(_, s)| s.as_str()).collect();
        assert_eq!(texts, vec!["a summary"; 3]);
    }

    #[test]
    fn truncation_caps_dialogue_length() {
        assert_eq!(truncate_chars("abcdef", 3), "abc");
        assert_eq!(truncate_chars("ab", 3), "ab");
    }
}

//! The memory-operation pipeline: turning a session (or each of its turns)
//! into bank mutations.
//!
//! Extraction is pluggable: the backend-driven extractor asks the model
//! for a strict-JSON operation plan; the marker extractor deterministically
//! inserts one entry per `FACT:` line in user turns and exists for tests
//! and offline runs. A gated-off session performs no operations at all and
//! only advances the bank's session cursor.

use serde::{Deserialize, Serialize};

use crate::backend::{jsonx, GenerationRequest, TextBackend};
use crate::bank::{MemoryBank, MemoryEntry};
use crate::error::{Error, Result};
use crate::model::{render_turns, Session, Speaker, Turn};
use crate::prompts::Prompts;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryOp {
    Insert { text: String },
    Update { entry_id: u64, text: String },
    Delete { entry_id: u64 },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MemoryOpPlan {
    pub ops: Vec<MemoryOp>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    SessionLevel,
    TurnLevel,
}

impl std::str::FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "session" | "session_level" => Ok(Granularity::SessionLevel),
            "turn" | "turn_level" => Ok(Granularity::TurnLevel),
            other => Err(Error::Config(format!("unknown granularity {other}"))),
        }
    }
}

/// Extraction failure that is survivable: the session proceeds with an
/// empty plan and the failure is recorded in the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionFailure {
    pub message: String,
}

pub trait OpExtractor: Send + Sync {
    /// Produce an operation plan for one dialogue slice. `bank_view` holds
    /// the candidate entries eligible for update/delete.
    fn extract(
        &self,
        backend: &dyn TextBackend,
        dialogue: &[Turn],
        bank_view: &[MemoryEntry],
    ) -> Result<std::result::Result<MemoryOpPlan, ExtractionFailure>>;
}

/// Deterministic rule extractor: one insert per user-turn line beginning
/// with `FACT:`, with the marker stripped.
pub struct MarkerExtractor;

pub const FACT_MARKER: &str = "FACT:";

impl OpExtractor for MarkerExtractor {
    fn extract(
        &self,
        _backend: &dyn TextBackend,
        dialogue: &[Turn],
        _bank_view: &[MemoryEntry],
    ) -> Result<std::result::Result<MemoryOpPlan, ExtractionFailure>> {
        let mut ops = Vec::new();
        for turn in dialogue.iter().filter(|t| t.speaker == Speaker::User) {
            for line in turn.text.lines() {
                let trimmed = line.trim_start();
                if let Some(fact) = trimmed.strip_prefix(FACT_MARKER) {
                    let fact = fact.trim();
                    if !fact.is_empty() {
                        ops.push(MemoryOp::Insert {
                            text: fact.to_string(),
                        });
                    }
                }
            }
        }
        Ok(Ok(MemoryOpPlan { ops }))
    }
}

/// Backend-driven extractor: strict-JSON plan, one retry on malformed
/// output, then a recorded failure with an empty plan.
pub struct BackendExtractor {
    pub prompts: std::sync::Arc<Prompts>,
    pub model_id: String,
}

impl BackendExtractor {
    pub fn new(prompts: std::sync::Arc<Prompts>) -> Self {
        Self {
            prompts,
            model_id: String::new(),
        }
    }

    fn request(&self, dialogue: &[Turn], bank_view: &[MemoryEntry]) -> GenerationRequest {
        let view = if bank_view.is_empty() {
            "(none)".to_string()
        } else {
            bank_view
                .iter()
                .map(|e| format!("[{}] {}", e.entry_id, e.text))
                .collect::<Vec<_>>()
                .join("\n")
        };
        let body = self.prompts.fill(
            &self.prompts.extract_ops,
            &[
                ("bank_view", view.as_str()),
                ("dialogue", &render_turns(dialogue)),
            ],
        );
        GenerationRequest::new("", body).with_model(self.model_id.clone())
    }

    fn parse_plan(reply: &str) -> Option<MemoryOpPlan> {
        #[derive(Deserialize)]
        struct RawPlan {
            ops: Vec<serde_json::Value>,
        }
        let raw: RawPlan = jsonx::parse_first(reply)?;
        let mut ops = Vec::new();
        for value in raw.ops {
            let op = value.as_object()?;
            if let Some(text) = op.get("insert") {
                ops.push(MemoryOp::Insert {
                    text: text.as_str()?.to_string(),
                });
            } else if let Some(update) = op.get("update") {
                let update = update.as_object()?;
                ops.push(MemoryOp::Update {
                    entry_id: update.get("entry_id")?.as_u64()?,
                    text: update.get("text")?.as_str()?.to_string(),
                });
            } else if let Some(id) = op.get("delete") {
                ops.push(MemoryOp::Delete {
                    entry_id: id.as_u64()?,
                });
            } else {
                return None;
            }
        }
        Some(MemoryOpPlan { ops })
    }
}

impl OpExtractor for BackendExtractor {
    fn extract(
        &self,
        backend: &dyn TextBackend,
        dialogue: &[Turn],
        bank_view: &[MemoryEntry],
    ) -> Result<std::result::Result<MemoryOpPlan, ExtractionFailure>> {
        let request = self.request(dialogue, bank_view);
        for attempt in 0..2 {
            let reply = backend.generate(&request)?;
            if let Some(plan) = Self::parse_plan(&reply) {
                return Ok(Ok(plan));
            }
            if attempt == 1 {
                return Ok(Err(ExtractionFailure {
                    message: format!("unparseable extractor output after retry: {reply}"),
                }));
            }
        }
        unreachable!("loop returns on second attempt")
    }
}

/// One applied (or dropped) operation in a session trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedOp {
    pub op: MemoryOp,
    pub reason: String,
}

/// Record of everything one session did to the bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTrace {
    pub session_id: u32,
    pub gate_memory_required: bool,
    pub ops_applied: Vec<MemoryOp>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ops_dropped: Vec<DroppedOp>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extraction_failures: Vec<ExtractionFailure>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub evicted: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inserted: Vec<u64>,
}

/// How many bank entries the extractor sees as update/delete candidates.
pub const DEFAULT_CANDIDATE_VIEW: usize = 10;

/// Run one session against the bank.
///
/// With `gate_memory_required = false` the session is skipped entirely:
/// no extraction, no operations, no evictions attributable to it; only the
/// bank's session cursor advances. Otherwise the extractor runs (once for
/// the whole session, or once per user turn at turn-level granularity),
/// the plan is applied in order, and the session is closed out with
/// eviction back down to budget.
pub fn apply_session(
    bank: &mut MemoryBank,
    backend: &dyn TextBackend,
    extractor: &dyn OpExtractor,
    session: &Session,
    gate_memory_required: bool,
    granularity: Granularity,
) -> Result<SessionTrace> {
    let mut trace = SessionTrace {
        session_id: session.session_id,
        gate_memory_required,
        ops_applied: Vec::new(),
        ops_dropped: Vec::new(),
        extraction_failures: Vec::new(),
        evicted: Vec::new(),
        inserted: Vec::new(),
    };
    if !gate_memory_required {
        trace.evicted = bank.end_session(session.session_id)?;
        return Ok(trace);
    }

    let mut plans: Vec<MemoryOpPlan> = Vec::new();
    match granularity {
        Granularity::SessionLevel => {
            let view = candidate_view(bank, backend, &session.user_text())?;
            match extractor.extract(backend, &session.turns, &view)? {
                Ok(plan) => plans.push(plan),
                Err(failure) => trace.extraction_failures.push(failure),
            }
        }
        Granularity::TurnLevel => {
            // One extractor call per user turn; the slice is that turn plus
            // the agent reply that follows it.
            let mut i = 0;
            while i < session.turns.len() {
                if session.turns[i].speaker == Speaker::User {
                    let end = (i + 2).min(session.turns.len());
                    let slice = &session.turns[i..end];
                    let view = candidate_view(bank, backend, &session.turns[i].text)?;
                    match extractor.extract(backend, slice, &view)? {
                        Ok(plan) => plans.push(plan),
                        Err(failure) => trace.extraction_failures.push(failure),
                    }
                }
                i += 1;
            }
        }
    }

    for plan in plans {
        for op in plan.ops {
            match &op {
                MemoryOp::Insert { text } => match bank.insert(
                    backend,
                    text,
                    session.session_id,
                    Some(session.domain.clone()),
                ) {
                    Ok(id) => {
                        trace.inserted.push(id);
                        trace.ops_applied.push(op);
                    }
                    Err(e) => trace.ops_dropped.push(DroppedOp {
                        op: op.clone(),
                        reason: e.to_string(),
                    }),
                },
                MemoryOp::Update { entry_id, text } => {
                    if bank.contains(*entry_id) {
                        bank.update(backend, *entry_id, text)?;
                        trace.ops_applied.push(op);
                    } else {
                        trace.ops_dropped.push(DroppedOp {
                            op: op.clone(),
                            reason: format!("unknown entry_id {entry_id}"),
                        });
                    }
                }
                MemoryOp::Delete { entry_id } => {
                    if bank.contains(*entry_id) {
                        bank.delete(*entry_id)?;
                        trace.ops_applied.push(op);
                    } else {
                        trace.ops_dropped.push(DroppedOp {
                            op: op.clone(),
                            reason: format!("unknown entry_id {entry_id}"),
                        });
                    }
                }
            }
        }
    }

    trace.evicted = bank.end_session(session.session_id)?;
    Ok(trace)
}

fn candidate_view(
    bank: &MemoryBank,
    backend: &dyn TextBackend,
    query: &str,
) -> Result<Vec<MemoryEntry>> {
    if bank.is_empty() || query.is_empty() {
        return Ok(Vec::new());
    }
    bank.retrieve_top_k(backend, query, DEFAULT_CANDIDATE_VIEW)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::mock::{MockRule, ScriptedMock};
    use crate::model::DomainId;

    fn mock() -> ScriptedMock {
        ScriptedMock::with_rules(vec![])
    }

    fn session(turns: Vec<Turn>) -> Session {
        Session {
            session_id: 1,
            domain: DomainId::new("Travel Planning"),
            month: 1,
            turns,
            gt_memory_required: true,
            project: None,
            event_id: "e1".to_string(),
        }
    }

    #[test]
    fn marker_extractor_inserts_per_fact_line() {
        let backend = mock();
        let dialogue = vec![
            Turn::user("Hello.\nFACT: likes window seats\nmore text"),
            Turn::agent("Noted."),
            Turn::user("FACT: budget is $2000"),
        ];
        let plan = MarkerExtractor
            .extract(&backend, &dialogue, &[])
            .unwrap()
            .unwrap();
        assert_eq!(
            plan.ops,
            vec![
                MemoryOp::Insert {
                    text: "likes window seats".to_string()
                },
                MemoryOp::Insert {
                    text: "budget is $2000".to_string()
                },
            ]
        );
    }

    #[test]
    fn marker_extractor_without_markers_is_empty() {
        let backend = mock();
        let dialogue = vec![Turn::user("no markers here"), Turn::agent("ok")];
        let plan = MarkerExtractor
            .extract(&backend, &dialogue, &[])
            .unwrap()
            .unwrap();
        assert!(plan.ops.is_empty());
    }

    #[test]
    fn backend_extractor_parses_scripted_plan() {
        let backend = ScriptedMock::with_rules(vec![MockRule::new(
            ["memory manager"],
            [r#"{"ops":[{"insert":"x"}]}"#],
        )]);
        let extractor = BackendExtractor::new(std::sync::Arc::new(Prompts::default()));
        let plan = extractor
            .extract(&backend, &[Turn::user("hi")], &[])
            .unwrap()
            .unwrap();
        assert_eq!(
            plan.ops,
            vec![MemoryOp::Insert {
                text: "x".to_string()
            }]
        );
    }

    #[test]
    fn backend_extractor_retries_then_fails_softly() {
        let backend = ScriptedMock::with_rules(vec![MockRule::new(
            ["memory manager"],
            ["not json", "still not json"],
        )]);
        let extractor = BackendExtractor::new(std::sync::Arc::new(Prompts::default()));
        let outcome = extractor.extract(&backend, &[Turn::user("hi")], &[]).unwrap();
        assert!(outcome.is_err());

        // Retry succeeding on the second reply yields the plan.
        let backend = ScriptedMock::with_rules(vec![MockRule::new(
            ["memory manager"],
            ["prose", r#"{"ops":[{"delete": 7}]}"#],
        )]);
        let plan = extractor
            .extract(&backend, &[Turn::user("hi")], &[])
            .unwrap()
            .unwrap();
        assert_eq!(plan.ops, vec![MemoryOp::Delete { entry_id: 7 }]);
    }

    #[test]
    fn gate_false_skips_the_session_entirely() {
        let backend = mock();
        let mut bank = MemoryBank::new(10).unwrap();
        bank.insert(&backend, "existing", 0, None).unwrap();
        let before: Vec<MemoryEntry> = bank.entries().cloned().collect();

        let s = session(vec![Turn::user("FACT: should not be stored")]);
        let trace =
            apply_session(&mut bank, &backend, &MarkerExtractor, &s, false, Granularity::SessionLevel)
                .unwrap();
        let after: Vec<MemoryEntry> = bank.entries().cloned().collect();
        assert_eq!(before, after);
        assert!(trace.ops_applied.is_empty());
        assert_eq!(bank.current_session(), 1);
    }

    #[test]
    fn gate_true_applies_the_plan() {
        let backend = mock();
        let mut bank = MemoryBank::new(10).unwrap();
        let s = session(vec![Turn::user("FACT: store this")]);
        let trace =
            apply_session(&mut bank, &backend, &MarkerExtractor, &s, true, Granularity::SessionLevel)
                .unwrap();
        assert_eq!(bank.len(), 1);
        assert_eq!(trace.ops_applied.len(), 1);
        assert_eq!(trace.inserted.len(), 1);
    }

    #[test]
    fn turn_level_totals_equal_per_turn_sums() {
        let backend = mock();
        let turns = vec![
            Turn::user("FACT: one"),
            Turn::agent("ok"),
            Turn::user("FACT: two\nFACT: three"),
            Turn::agent("ok"),
        ];
        let mut session_bank = MemoryBank::new(10).unwrap();
        let s = session(turns.clone());
        apply_session(
            &mut session_bank,
            &backend,
            &MarkerExtractor,
            &s,
            true,
            Granularity::SessionLevel,
        )
        .unwrap();

        let mut turn_bank = MemoryBank::new(10).unwrap();
        apply_session(
            &mut turn_bank,
            &backend,
            &MarkerExtractor,
            &s,
            true,
            Granularity::TurnLevel,
        )
        .unwrap();

        let texts = |bank: &MemoryBank| {
            let mut v: Vec<String> = bank.entries().map(|e| e.text.clone()).collect();
            v.sort();
            v
        };
        assert_eq!(texts(&session_bank), texts(&turn_bank));
        assert_eq!(turn_bank.len(), 3);
    }

    #[test]
    fn unknown_entry_ops_are_dropped_with_a_record() {
        let backend = ScriptedMock::with_rules(vec![MockRule::new(
            ["memory manager"],
            [r#"{"ops":[{"update":{"entry_id": 99, "text": "x"}},{"insert":"kept"}]}"#],
        )]);
        let extractor = BackendExtractor::new(std::sync::Arc::new(Prompts::default()));
        let mut bank = MemoryBank::new(10).unwrap();
        let s = session(vec![Turn::user("hi")]);
        let trace =
            apply_session(&mut bank, &backend, &extractor, &s, true, Granularity::SessionLevel)
                .unwrap();
        assert_eq!(trace.ops_dropped.len(), 1);
        assert_eq!(trace.ops_applied.len(), 1);
        assert_eq!(bank.len(), 1);
    }
}

//! Dual-simulator dialogue generation.
//!
//! Two isolated backend conversations: the user simulator sees the event
//! context and reference facts; the agent simulator sees only the user's
//! utterances. After each user turn a judge call classifies each reference
//! fact as revealed or not, and unrevealed facts are fed back as nudges in
//! the continuation prompt. The loop ends when every fact is revealed and
//! the minimum turn count is reached, when the user emits the `[END]`
//! marker, or at the hard cap.

use serde::{Deserialize, Serialize};

use crate::backend::{jsonx, GenerationRequest, Role, TextBackend};
use crate::error::Result;
use crate::model::{DomainId, Persona, RefKind, SkeletonEvent, Turn};
use crate::prompts::Prompts;

pub const DEFAULT_MIN_TURNS: u32 = 6;
pub const DEFAULT_HARD_CAP: u32 = 20;
pub const END_MARKER: &str = "[END]";

#[derive(Debug, Clone)]
pub struct DialogueContext<'a> {
    pub persona: &'a Persona,
    pub domain: &'a DomainId,
    pub event: &'a SkeletonEvent,
    /// Facts already established in prior sessions of the same project.
    pub prior_context: &'a [String],
    /// User turns required before fact-coverage termination applies.
    pub min_turns: u32,
    /// Maximum user turns.
    pub hard_cap: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueResult {
    pub turns: Vec<Turn>,
    /// Indices into the event's fact list that the judge saw revealed.
    pub revealed: Vec<usize>,
    /// Set when the hard cap fired with facts still unrevealed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage_warning: Option<String>,
}

#[derive(Deserialize)]
struct JudgeReply {
    revealed: Vec<usize>,
}

pub fn generate_dialogue(
    ctx: &DialogueContext<'_>,
    backend: &dyn TextBackend,
    prompts: &Prompts,
    model_id: &str,
    judge_model_id: &str,
) -> Result<DialogueResult> {
    let facts: Vec<&str> = ctx.event.gt_memory.iter().map(|s| s.fact.as_str()).collect();
    let mut revealed: Vec<bool> = vec![false; facts.len()];

    let persona_text = super::profile::persona_text(ctx.persona);
    let user_system = prompts.fill(&prompts.user_sim_system, &[("persona", persona_text.as_str())]);
    let mut user_messages: Vec<(Role, String)> = vec![(Role::User, opening_body(ctx, prompts))];
    let mut agent_messages: Vec<(Role, String)> = Vec::new();

    let mut turns: Vec<Turn> = Vec::new();
    let mut coverage_warning = None;

    for turn_index in 1..=ctx.hard_cap {
        let user_request =
            GenerationRequest::with_messages(user_system.clone(), user_messages.clone())
                .with_model(model_id.to_string());
        let user_reply = backend.generate(&user_request)?;

        if let Some(marker_pos) = user_reply.find(END_MARKER) {
            let remaining = user_reply[..marker_pos].trim().to_string();
            if !remaining.is_empty() {
                turns.push(Turn::user(remaining.clone()));
                agent_messages.push((Role::User, remaining));
                let agent_reply = agent_turn(&agent_messages, backend, prompts, model_id)?;
                turns.push(Turn::agent(agent_reply.clone()));
                agent_messages.push((Role::Assistant, agent_reply));
            }
            break;
        }

        let user_text = user_reply.trim().to_string();
        turns.push(Turn::user(user_text.clone()));
        agent_messages.push((Role::User, user_text.clone()));
        let agent_reply = agent_turn(&agent_messages, backend, prompts, model_id)?;
        turns.push(Turn::agent(agent_reply.clone()));
        agent_messages.push((Role::Assistant, agent_reply.clone()));

        if !facts.is_empty() {
            judge_revealed(&turns, &facts, &mut revealed, backend, prompts, judge_model_id)?;
        }

        let all_revealed = revealed.iter().all(|&r| r);
        if all_revealed && turn_index >= ctx.min_turns {
            break;
        }
        if turn_index == ctx.hard_cap {
            if !all_revealed {
                let missing: Vec<&str> = facts
                    .iter()
                    .zip(&revealed)
                    .filter(|(_, &r)| !r)
                    .map(|(f, _)| *f)
                    .collect();
                coverage_warning = Some(format!(
                    "hard cap of {} turns reached with unrevealed facts: {}",
                    ctx.hard_cap,
                    missing.join(" | ")
                ));
            }
            break;
        }

        // Feed the agent's reply and the coverage state back to the user
        // simulator.
        user_messages.push((Role::Assistant, user_text));
        user_messages.push((
            Role::User,
            continuation_body(&agent_reply, &facts, &revealed, prompts),
        ));
    }

    Ok(DialogueResult {
        turns,
        revealed: revealed
            .iter()
            .enumerate()
            .filter(|(_, &r)| r)
            .map(|(i, _)| i)
            .collect(),
        coverage_warning,
    })
}

fn agent_turn(
    agent_messages: &[(Role, String)],
    backend: &dyn TextBackend,
    prompts: &Prompts,
    model_id: &str,
) -> Result<String> {
    let request =
        GenerationRequest::with_messages(prompts.agent_sim_system.clone(), agent_messages.to_vec())
            .with_model(model_id.to_string());
    Ok(backend.generate(&request)?.trim().to_string())
}

fn opening_body(ctx: &DialogueContext<'_>, prompts: &Prompts) -> String {
    let prior = if ctx.prior_context.is_empty() {
        "(none)".to_string()
    } else {
        ctx.prior_context
            .iter()
            .map(|f| format!("- {f}"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let traits: Vec<String> = ctx
        .event
        .gt_memory
        .iter()
        .filter(|s| s.kind == RefKind::UserProfile)
        .map(|s| format!("- {}", s.fact))
        .collect();
    let uncertainties: Vec<String> = ctx
        .event
        .gt_memory
        .iter()
        .filter(|s| s.kind == RefKind::OngoingState)
        .map(|s| format!("- to be decided: {}", s.fact))
        .collect();
    let render = |items: &[String]| {
        if items.is_empty() {
            "(none)".to_string()
        } else {
            items.join("\n")
        }
    };
    prompts.fill(
        &prompts.user_sim_opening,
        &[
            ("domain_name", ctx.domain.as_str()),
            ("event_description", &ctx.event.description),
            ("prior_context", prior.as_str()),
            ("profile_traits", &render(&traits)),
            ("open_uncertainties", &render(&uncertainties)),
        ],
    )
}

fn continuation_body(
    agent_reply: &str,
    facts: &[&str],
    revealed: &[bool],
    prompts: &Prompts,
) -> String {
    let split = |want: bool| {
        let items: Vec<String> = facts
            .iter()
            .zip(revealed)
            .filter(|(_, &r)| r == want)
            .map(|(f, _)| format!("- {f}"))
            .collect();
        if items.is_empty() {
            "(none)".to_string()
        } else {
            items.join("\n")
        }
    };
    prompts.fill(
        &prompts.user_sim_continuation,
        &[
            ("agent_reply", agent_reply),
            ("unrevealed_facts", &split(false)),
            ("revealed_facts", &split(true)),
        ],
    )
}

/// One judge call over the user-side transcript; newly revealed fact
/// indices are merged in. An unparseable judge reply (after one retry)
/// leaves the revealed set unchanged.
fn judge_revealed(
    turns: &[Turn],
    facts: &[&str],
    revealed: &mut [bool],
    backend: &dyn TextBackend,
    prompts: &Prompts,
    judge_model_id: &str,
) -> Result<()> {
    let fact_list = facts
        .iter()
        .enumerate()
        .map(|(i, f)| format!("{i}. {f}"))
        .collect::<Vec<_>>()
        .join("\n");
    let transcript = turns
        .iter()
        .filter(|t| t.speaker == crate::model::Speaker::User)
        .map(|t| t.text.as_str())
        .collect::<Vec<_>>()
        .join("\n");
    let body = prompts.fill(
        &prompts.fact_judge,
        &[("facts", fact_list.as_str()), ("transcript", transcript.as_str())],
    );
    let request = GenerationRequest::new("", body).with_model(judge_model_id.to_string());
    for _ in 0..2 {
        let reply = backend.generate(&request)?;
        if let Some(parsed) = jsonx::parse_first::<JudgeReply>(&reply) {
            for index in parsed.revealed {
                if index < revealed.len() {
                    revealed[index] = true;
                }
            }
            return Ok(());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::mock::{MockRule, ScriptedMock};
    use crate::fixtures;
    use crate::model::ReferenceSeed;

    fn event_with_facts(facts: &[&str]) -> SkeletonEvent {
        SkeletonEvent {
            event_id: "e1".to_string(),
            title: "t".to_string(),
            description: "planning the itinerary".to_string(),
            gt_memory: facts
                .iter()
                .map(|f| ReferenceSeed {
                    kind: RefKind::OngoingState,
                    fact: f.to_string(),
                    probing_question: None,
                    answer: None,
                })
                .collect(),
        }
    }

    #[test]
    fn loop_ends_when_facts_are_revealed_and_min_turns_reached() {
        // The judge reveals fact 0 on turn 1 and fact 1 on turn 3 (the
        // sequence repeats its last reply), min_turns = 2: ends after
        // turn 3.
        let backend = ScriptedMock::with_rules(vec![
            MockRule::new(
                ["tracking which facts"],
                [
                    r#"{"revealed": [0]}"#,
                    r#"{"revealed": [0]}"#,
                    r#"{"revealed": [0, 1]}"#,
                ],
            ),
            MockRule::new(["Not yet surfaced"], ["More details about my trip."]),
            MockRule::new(["new conversation"], ["I need help planning."]),
            MockRule::new(["helpful AI assistant"], ["Happy to help."]),
        ]);
        let persona = fixtures::persona(0);
        let domain = DomainId::new(fixtures::LONG_DOMAIN);
        let event = event_with_facts(&["fact a", "fact b"]);
        let ctx = DialogueContext {
            persona: &persona,
            domain: &domain,
            event: &event,
            prior_context: &[],
            min_turns: 2,
            hard_cap: 10,
        };
        let result =
            generate_dialogue(&ctx, &backend, &Prompts::default(), "", "").unwrap();
        // Three user turns, each answered: six turns in total.
        assert_eq!(result.turns.len(), 6);
        assert_eq!(result.revealed, vec![0, 1]);
        assert!(result.coverage_warning.is_none());
    }

    #[test]
    fn end_marker_terminates_a_transient_session() {
        // The continuation rule precedes the opening rule: the user-sim
        // conversation keeps its opening message in history, so later
        // requests match both patterns.
        let backend = ScriptedMock::with_rules(vec![
            MockRule::new(["Not yet surfaced"], ["[END]"]),
            MockRule::new(["new conversation"], ["Quick question about the news."]),
            MockRule::new(["helpful AI assistant"], ["Here you go."]),
        ]);
        let persona = fixtures::persona(0);
        let domain = DomainId::new(fixtures::TRANSIENT_DOMAIN);
        let event = event_with_facts(&[]);
        let ctx = DialogueContext {
            persona: &persona,
            domain: &domain,
            event: &event,
            prior_context: &[],
            min_turns: 6,
            hard_cap: 10,
        };
        let result =
            generate_dialogue(&ctx, &backend, &Prompts::default(), "", "").unwrap();
        assert_eq!(result.turns.len(), 2);
        assert_eq!(result.turns[0].text, "Quick question about the news.");
    }

    #[test]
    fn hard_cap_with_unrevealed_facts_warns() {
        let backend = ScriptedMock::with_rules(vec![
            MockRule::new(["tracking which facts"], [r#"{"revealed": []}"#]),
            MockRule::new(["Not yet surfaced"], ["Still thinking."]),
            MockRule::new(["new conversation"], ["Let me think."]),
            MockRule::new(["helpful AI assistant"], ["Take your time."]),
        ]);
        let persona = fixtures::persona(0);
        let domain = DomainId::new(fixtures::LONG_DOMAIN);
        let event = event_with_facts(&["never said"]);
        let ctx = DialogueContext {
            persona: &persona,
            domain: &domain,
            event: &event,
            prior_context: &[],
            min_turns: 1,
            hard_cap: 3,
        };
        let result =
            generate_dialogue(&ctx, &backend, &Prompts::default(), "", "").unwrap();
        assert_eq!(result.turns.len(), 6);
        assert!(result
            .coverage_warning
            .as_deref()
            .unwrap()
            .contains("never said"));
    }

    #[test]
    fn agent_side_never_sees_skeleton_text() {
        let backend = ScriptedMock::with_rules(vec![
            MockRule::new(["tracking which facts"], [r#"{"revealed": [0]}"#]),
            MockRule::new(["Not yet surfaced"], ["Second line."]),
            MockRule::new(["new conversation"], ["Opening line."]),
            MockRule::new(["helpful AI assistant"], ["Reply."]),
        ]);
        backend.enable_request_log();
        let persona = fixtures::persona(0);
        let domain = DomainId::new(fixtures::LONG_DOMAIN);
        let event = event_with_facts(&["the secret fact"]);
        let ctx = DialogueContext {
            persona: &persona,
            domain: &domain,
            event: &event,
            prior_context: &[],
            min_turns: 1,
            hard_cap: 5,
        };
        generate_dialogue(&ctx, &backend, &Prompts::default(), "", "").unwrap();

        let prompts = Prompts::default();
        for request in backend.logged_requests() {
            if request.system_prompt == prompts.agent_sim_system {
                let flattened = request.flattened();
                assert!(
                    !flattened.contains("the secret fact"),
                    "agent-side transcript leaked skeleton text"
                );
                assert!(!flattened.contains("planning the itinerary"));
            }
        }
    }
}

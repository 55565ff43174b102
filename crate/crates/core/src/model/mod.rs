//! Domain types shared by every module: personas, agent-use profiles, life
//! skeletons, sessions, reference memories, and the benchmark dataset
//! container. All types are immutable after load and safe to share
//! read-only across concurrent evaluators.

mod horizons;
mod io;
mod pool;
mod stats;
mod validate;

pub use horizons::compute_retention_horizons;
pub use io::{load_dataset, load_dataset_with_pool, save_dataset, to_canonical_json};
pub use pool::{DomainPool, DEFAULT_DOMAINS};
pub use stats::{dataset_stats, MetricSummary, StatsReport};
pub use validate::validate_dataset;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// A simulated user. `id` is an opaque UUID-form string, unique within a
/// dataset; `attributes` carries free-form background/preference text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub id: String,
    pub description: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

/// A domain name drawn from the configured domain pool.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DomainId(pub String);

impl DomainId {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for DomainId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// How often a user interacts with an agent within one domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    High,
    Medium,
    Low,
}

impl Frequency {
    pub const ALL: [Frequency; 3] = [Frequency::High, Frequency::Medium, Frequency::Low];

    /// Sampling weight used by the profile-shift sampler (high:medium:low = 3:2:1).
    pub fn shift_weight(self) -> u64 {
        match self {
            Frequency::High => 3,
            Frequency::Medium => 2,
            Frequency::Low => 1,
        }
    }
}

impl std::fmt::Display for Frequency {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Frequency::High => "high",
            Frequency::Medium => "medium",
            Frequency::Low => "low",
        })
    }
}

/// Per-domain usage triplet: participation, frequency, memory necessity.
/// Inactive domains carry no frequency and no memory flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainUsage {
    pub active: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<Frequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_required: Option<bool>,
}

impl DomainUsage {
    pub fn inactive() -> Self {
        Self {
            active: false,
            frequency: None,
            memory_required: None,
        }
    }

    pub fn active(frequency: Frequency, memory_required: bool) -> Self {
        Self {
            active: true,
            frequency: Some(frequency),
            memory_required: Some(memory_required),
        }
    }
}

/// A user's agent-use profile: the usage triplet for every pool domain,
/// plus the sampled subset of domains the benchmark simulates. The sampled
/// set is balanced: its memory-required and transient counts differ by at
/// most one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentUseProfile {
    /// Persona id this profile belongs to.
    pub persona: String,
    pub entries: BTreeMap<DomainId, DomainUsage>,
    pub selected: Vec<DomainId>,
}

impl AgentUseProfile {
    pub fn usage(&self, domain: &DomainId) -> Option<&DomainUsage> {
        self.entries.get(domain)
    }

    /// Active domains, sorted by name.
    pub fn active_domains(&self) -> Vec<&DomainId> {
        self.entries
            .iter()
            .filter(|(_, u)| u.active)
            .map(|(d, _)| d)
            .collect()
    }

    /// Active domains not in the sampled set, sorted by name.
    pub fn unused_active(&self) -> Vec<&DomainId> {
        self.entries
            .iter()
            .filter(|(d, u)| u.active && !self.selected.contains(d))
            .map(|(d, _)| d)
            .collect()
    }

    /// Memory-required flag for a selected/active domain.
    pub fn memory_required(&self, domain: &DomainId) -> Option<bool> {
        self.entries.get(domain).and_then(|u| u.memory_required)
    }
}

/// The kind of a reference memory: a stable user-level fact, or
/// project-scoped state that only matters while the project is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefKind {
    UserProfile,
    OngoingState,
}

/// A gold "worth-storing" fact the memory system is expected to capture at
/// `t_start` and retain through `t_target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMemory {
    pub id: String,
    pub kind: RefKind,
    pub fact: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probing_question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    /// Session at which the fact first appears in dialogue.
    pub t_start: u32,
    /// Retention horizon; filled by `compute_retention_horizons` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_target: Option<u32>,
    /// Owning project (required for ongoing_state facts).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub project: Option<String>,
    /// Id of a later fact that supersedes this one; caps the horizon of
    /// user_profile facts at the superseding fact's start minus one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superseded_by: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    Agent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
}

impl Turn {
    pub fn user(text: impl Into<String>) -> Self {
        Self {
            speaker: Speaker::User,
            text: text.into(),
        }
    }

    pub fn agent(text: impl Into<String>) -> Self {
        Self {
            speaker: Speaker::Agent,
            text: text.into(),
        }
    }
}

/// One dialogue session. `session_id` values are consecutive from 1 within
/// a user's timeline, months are non-decreasing, and turns alternate
/// starting with the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: u32,
    pub domain: DomainId,
    pub month: u32,
    pub turns: Vec<Turn>,
    pub gt_memory_required: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub project: Option<String>,
    pub event_id: String,
}

impl Session {
    /// Concatenated user-turn text, used as the retrieval query for the
    /// extractor's candidate shortlist.
    pub fn user_text(&self) -> String {
        self.turns
            .iter()
            .filter(|t| t.speaker == Speaker::User)
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Render the dialogue as "user: ..." / "agent: ..." lines.
    pub fn render_dialogue(&self) -> String {
        render_turns(&self.turns)
    }
}

pub fn render_turns(turns: &[Turn]) -> String {
    turns
        .iter()
        .map(|t| {
            let speaker = match t.speaker {
                Speaker::User => "user",
                Speaker::Agent => "agent",
            };
            format!("{speaker}: {}", t.text)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// A reference-memory seed attached to a skeleton event; it becomes a full
/// `ReferenceMemory` once the event is placed on the timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSeed {
    pub kind: RefKind,
    pub fact: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probing_question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonEvent {
    pub event_id: String,
    pub title: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gt_memory: Vec<ReferenceSeed>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Project {
    pub project_id: String,
    pub events: Vec<SkeletonEvent>,
}

/// Per-domain blueprint: interconnected projects for memory-required
/// domains, flat one-off events for transient domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSkeleton {
    Longitudinal { projects: Vec<Project> },
    Transient { events: Vec<SkeletonEvent> },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LifeSkeleton {
    #[serde(default)]
    pub domains: BTreeMap<DomainId, DomainSkeleton>,
}

impl LifeSkeleton {
    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }
}

/// A rule-sampled profile shift: one memory-required domain demoted to
/// transient, one new longitudinal domain, and optionally one new
/// transient domain, justified by a generated narrative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftPlan {
    pub demoted: DomainId,
    pub added_longitudinal: DomainId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub added_transient: Option<DomainId>,
    #[serde(default)]
    pub narrative: String,
}

/// Shift metadata attached to a user in a dynamic dataset. Sessions with
/// `session_id > shift_point` follow the shifted profile. The phase-two
/// skeleton holds the projects and events generated after the shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRecord {
    pub shift_point: u32,
    pub plan: ShiftPlan,
    #[serde(default)]
    pub skeleton: LifeSkeleton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub persona: Persona,
    pub profile: AgentUseProfile,
    #[serde(default)]
    pub skeleton: LifeSkeleton,
    pub timeline: Vec<Session>,
    pub references: Vec<ReferenceMemory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<ShiftRecord>,
}

impl UserRecord {
    pub fn last_session_id(&self) -> u32 {
        self.timeline.last().map(|s| s.session_id).unwrap_or(0)
    }

    /// Ground-truth memory necessity for `domain` at timeline position
    /// `session_id`, accounting for the profile shift when present.
    /// `None` when the domain is not part of the profile at that point.
    pub fn effective_memory_required(&self, domain: &DomainId, session_id: u32) -> Option<bool> {
        effective_memory_required(
            &self.profile,
            self.shift.as_ref().map(|s| (s.shift_point, &s.plan)),
            domain,
            session_id,
        )
    }
}

/// Ground-truth memory necessity for `domain` at timeline position
/// `session_id` under `profile`, with sessions past the shift point
/// following the shifted profile.
pub fn effective_memory_required(
    profile: &AgentUseProfile,
    shift: Option<(u32, &ShiftPlan)>,
    domain: &DomainId,
    session_id: u32,
) -> Option<bool> {
    if let Some((shift_point, plan)) = shift {
        if session_id > shift_point {
            if *domain == plan.demoted {
                return Some(false);
            }
            if *domain == plan.added_longitudinal {
                return Some(true);
            }
            if plan.added_transient.as_ref() == Some(domain) {
                return Some(false);
            }
            if profile.selected.contains(domain) {
                return profile.memory_required(domain);
            }
            return None;
        }
    }
    if profile.selected.contains(domain) {
        profile.memory_required(domain)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Static,
    Dynamic,
}

/// The benchmark container: one record per user, each holding the persona,
/// profile, skeleton, chronological timeline, and reference memories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkDataset {
    pub variant: Variant,
    pub users: Vec<UserRecord>,
}

impl BenchmarkDataset {
    pub fn user(&self, persona_id: &str) -> Option<&UserRecord> {
        self.users.iter().find(|u| u.persona.id == persona_id)
    }
}

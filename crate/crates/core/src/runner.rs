//! Gated memory-simulation runs over a dataset.
//!
//! For each user, sessions are processed in order: gate decision, memory
//! operations, session-boundary eviction. Banks are snapshotted at exactly
//! the checkpoints the retention evaluation will sample (computed up front
//! from the reference windows), so storage stays bounded. Users are
//! independent; each gets a fresh backend instance so scripted-mock state
//! never interleaves across parallel jobs.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backend::TextBackend;
use crate::bank::MemoryBank;
use crate::error::{Error, Result};
use crate::eval::{
    gating_metrics, profile_jaccard, retention_rate, sample_checkpoints, EvalReport,
    GatingSection, PolicyReport, ReportConfigEcho, RetentionConfig, RetentionSection,
    SnapshotStore, UserRetention,
};
use crate::gating::{Gate, GateDecision, GatePolicy};
use crate::model::{AgentUseProfile, BenchmarkDataset, UserRecord};
use crate::ops::{apply_session, BackendExtractor, Granularity, MarkerExtractor, OpExtractor, SessionTrace};
use crate::prompts::Prompts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorKind {
    /// Language-model extraction through the backend.
    Backend,
    /// Deterministic `FACT:` marker extraction (offline runs and tests).
    Marker,
}

impl std::str::FromStr for ExtractorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "backend" => Ok(ExtractorKind::Backend),
            "marker" => Ok(ExtractorKind::Marker),
            other => Err(Error::Config(format!("unknown extractor {other}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub policy: GatePolicy,
    pub budget: usize,
    pub granularity: Granularity,
    pub extractor: ExtractorKind,
    pub retention: RetentionConfig,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            policy: GatePolicy::Universal,
            budget: MemoryBank::DEFAULT_BUDGET,
            granularity: Granularity::SessionLevel,
            extractor: ExtractorKind::Backend,
            retention: RetentionConfig::default(),
        }
    }
}

/// One line of the per-user run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLogRecord {
    pub session_id: u32,
    pub decision: GateDecision,
    pub trace: SessionTrace,
}

#[derive(Debug)]
pub struct UserRunResult {
    pub persona: String,
    pub log: Vec<SessionLogRecord>,
    pub snapshots: SnapshotStore,
}

/// The sessions the retention evaluation will sample for this user.
pub fn evaluation_checkpoints(user: &UserRecord, k: usize) -> Result<BTreeSet<u32>> {
    let mut checkpoints = BTreeSet::new();
    for reference in &user.references {
        let t_target = reference.t_target.ok_or_else(|| {
            Error::Validation(format!(
                "reference {} has no retention horizon; compute horizons before running",
                reference.id
            ))
        })?;
        checkpoints.extend(sample_checkpoints(reference.t_start, t_target, k)?);
    }
    Ok(checkpoints)
}

/// Simulate one user end to end.
pub fn run_user(
    user: &UserRecord,
    backend: &dyn TextBackend,
    prompts: Arc<Prompts>,
    options: &RunOptions,
) -> Result<UserRunResult> {
    let checkpoints = evaluation_checkpoints(user, options.retention.checkpoints)?;
    let mut gate = Gate::new(
        options.policy,
        &user.profile,
        user.shift.as_ref().map(|s| (s.shift_point, &s.plan)),
        prompts.clone(),
        "",
    );
    let extractor: Box<dyn OpExtractor> = match options.extractor {
        ExtractorKind::Marker => Box::new(MarkerExtractor),
        ExtractorKind::Backend => Box::new(BackendExtractor::new(prompts.clone())),
    };

    let mut bank = MemoryBank::new(options.budget)?;
    let mut log = Vec::with_capacity(user.timeline.len());
    let mut snapshots = SnapshotStore::new();
    for session in &user.timeline {
        let decision = gate.decide(session, backend)?;
        let trace = apply_session(
            &mut bank,
            backend,
            extractor.as_ref(),
            session,
            decision.memory_required,
            options.granularity,
        )?;
        if checkpoints.contains(&session.session_id) {
            snapshots.insert(session.session_id, bank.clone());
        }
        log.push(SessionLogRecord {
            session_id: session.session_id,
            decision,
            trace,
        });
    }
    Ok(UserRunResult {
        persona: user.persona.id.clone(),
        log,
        snapshots,
    })
}

/// Simulate every user, in parallel up to `jobs` threads (0 = rayon
/// default). Results come back in dataset order regardless of scheduling.
pub fn run_all(
    dataset: &BenchmarkDataset,
    prompts: Arc<Prompts>,
    make_backend: &(dyn Fn() -> Result<Box<dyn TextBackend>> + Sync),
    options: &RunOptions,
    jobs: usize,
) -> Result<Vec<UserRunResult>> {
    use rayon::prelude::*;

    let work = |user: &UserRecord| -> Result<UserRunResult> {
        let backend = make_backend()?;
        run_user(user, backend.as_ref(), prompts.clone(), options)
            .map_err(|e| e.at_stage(&format!("user {}", user.persona.id)))
    };
    if jobs == 1 {
        dataset.users.iter().map(work).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
        pool.install(|| dataset.users.par_iter().map(work).collect())
    }
}

/// Per-policy run results keyed by policy name.
pub type PolicyRuns = BTreeMap<String, Vec<UserRunResult>>;

/// Assemble the evaluation report for one or more completed runs.
pub fn build_report(
    dataset: &BenchmarkDataset,
    runs: &PolicyRuns,
    options: &RunOptions,
    backend: &dyn TextBackend,
    prompts: &Prompts,
) -> Result<EvalReport> {
    let mut policies = BTreeMap::new();
    for (policy, results) in runs {
        let mut retention_users = BTreeMap::new();
        let mut gating_users = BTreeMap::new();
        for result in results {
            let user = dataset.user(&result.persona).ok_or_else(|| {
                Error::Validation(format!(
                    "run log user {} is not in the dataset",
                    result.persona
                ))
            })?;
            let outcome = retention_rate(
                &user.references,
                &result.snapshots,
                &options.retention,
                backend,
                prompts,
            )?;
            retention_users.insert(result.persona.clone(), UserRetention::from(&outcome));

            let decisions: Vec<GateDecision> =
                result.log.iter().map(|r| r.decision.clone()).collect();
            let labels: Vec<(u32, bool)> = user
                .timeline
                .iter()
                .map(|s| (s.session_id, s.gt_memory_required))
                .collect();
            gating_users.insert(result.persona.clone(), gating_metrics(&decisions, &labels)?);
        }
        policies.insert(
            policy.clone(),
            PolicyReport {
                retention: RetentionSection::from_users(retention_users),
                gating: GatingSection::from_users(gating_users),
            },
        );
    }

    let jaccard = if dataset.users.len() >= 2 {
        let profiles: Vec<&AgentUseProfile> = dataset.users.iter().map(|u| &u.profile).collect();
        Some(profile_jaccard(&profiles)?)
    } else {
        None
    };

    Ok(EvalReport {
        config: ReportConfigEcho {
            checkpoints: options.retention.checkpoints,
            k_retrieve: options.retention.k_retrieve,
            judge: options.retention.judge,
            budget: options.budget,
        },
        policies,
        jaccard,
    })
}

//! Memory retention rate.
//!
//! For each reference memory r with window S(r) = [t_start, t_target], the
//! retention rate over a set of references is
//!
//!   RR = sum_r (|S(r)|/K_r) * sum_{t in sampled(r)} 1[r in M_t]
//!        -----------------------------------------------------
//!                      sum_r |S(r)|
//!
//! where sampled(r) holds K evenly spaced checkpoints (all of S(r) when it
//! fits inside K) and K_r counts the checkpoints actually evaluated; judge
//! failures drop a checkpoint and shrink K_r (the denominator correction).
//! With full enumeration the rescaling factor is exactly one and RR equals
//! the plain double sum.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::backend::mock::normalize_text;
use crate::backend::{GenerationRequest, TextBackend};
use crate::bank::MemoryBank;
use crate::error::{Error, Result};
use crate::model::ReferenceMemory;
use crate::prompts::Prompts;

use super::{JudgeKind, RetentionConfig};

/// Bank snapshots keyed by session index.
pub type SnapshotStore = BTreeMap<u32, MemoryBank>;

/// Evenly spaced checkpoint sessions over [t_start, t_target], first and
/// last always included; the whole window when it has at most K sessions.
pub fn sample_checkpoints(t_start: u32, t_target: u32, k: usize) -> Result<Vec<u32>> {
    if t_target < t_start {
        return Err(Error::Validation(format!(
            "invalid retention window [{t_start}, {t_target}]"
        )));
    }
    if k < 2 {
        return Err(Error::Validation("checkpoint count must be at least 2".to_string()));
    }
    let len = (t_target - t_start + 1) as usize;
    if len <= k {
        return Ok((t_start..=t_target).collect());
    }
    let mut out: Vec<u32> = (0..k)
        .map(|i| {
            let pos = (i as f64 * (len - 1) as f64 / (k - 1) as f64).round() as u32;
            t_start + pos
        })
        .collect();
    out.dedup();
    Ok(out)
}

/// Decide whether a reference fact is present in a bank snapshot:
/// retrieve the top-k entries with the fact as the query, then judge.
pub fn indicator(
    reference: &ReferenceMemory,
    bank: &MemoryBank,
    config: &RetentionConfig,
    backend: &dyn TextBackend,
    prompts: &Prompts,
) -> Result<bool> {
    if bank.is_empty() {
        return Ok(false);
    }
    let retrieved = bank.retrieve_top_k(backend, &reference.fact, config.k_retrieve)?;
    if retrieved.is_empty() {
        return Ok(false);
    }
    match config.judge {
        JudgeKind::SubstringOracle => {
            let needle = normalize_text(&reference.fact);
            Ok(retrieved
                .iter()
                .any(|entry| normalize_text(&entry.text).contains(&needle)))
        }
        JudgeKind::Backend => {
            let entries = retrieved
                .iter()
                .map(|e| format!("- {}", e.text))
                .collect::<Vec<_>>()
                .join("\n");
            let body = prompts.fill(
                &prompts.retention_judge,
                &[
                    ("fact", reference.fact.as_str()),
                    ("retrieved_entries", entries.as_str()),
                ],
            );
            let request =
                GenerationRequest::new("", body).with_model(config.judge_model.clone());
            for attempt in 0..2 {
                let reply = backend.generate(&request)?;
                let verdict = reply.trim().to_ascii_uppercase();
                if verdict.starts_with("YES") {
                    return Ok(true);
                }
                if verdict.starts_with("NO") {
                    return Ok(false);
                }
                if attempt == 1 {
                    return Err(crate::error::BackendError::Protocol(format!(
                        "judge reply is not YES/NO: {reply}"
                    ))
                    .into());
                }
            }
            unreachable!("loop returns on second attempt")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRetention {
    pub reference_id: String,
    pub t_start: u32,
    pub t_target: u32,
    pub sampled: Vec<u32>,
    pub present_at: Vec<u32>,
    /// Checkpoints excluded after judge failures (denominator-corrected).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unevaluated: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionOutcome {
    /// None when there are no reference windows to score.
    pub rr: Option<f64>,
    pub numerator: f64,
    pub denominator: u64,
    pub per_reference: Vec<ReferenceRetention>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Score a reference set against per-session bank snapshots.
///
/// Every sampled checkpoint must have a snapshot; a missing snapshot is a
/// hard error. Judge/backend failures at a checkpoint are recorded, the
/// checkpoint is excluded, and the rescaling factor uses the shrunk count.
pub fn retention_rate(
    references: &[ReferenceMemory],
    snapshots: &SnapshotStore,
    config: &RetentionConfig,
    backend: &dyn TextBackend,
    prompts: &Prompts,
) -> Result<RetentionOutcome> {
    config.validate()?;
    let mut numerator = 0.0f64;
    let mut denominator = 0u64;
    let mut per_reference = Vec::new();
    let mut warnings = Vec::new();

    for reference in references {
        let t_start = reference.t_start;
        let t_target = reference.t_target.ok_or_else(|| {
            Error::Validation(format!(
                "reference {} has no retention horizon; compute horizons first",
                reference.id
            ))
        })?;
        let sampled = sample_checkpoints(t_start, t_target, config.checkpoints)?;
        let window = u64::from(t_target - t_start + 1);

        let mut present_at = Vec::new();
        let mut unevaluated = Vec::new();
        for &t in &sampled {
            let bank = snapshots.get(&t).ok_or_else(|| {
                Error::Validation(format!(
                    "missing snapshot at sampled checkpoint {t} for reference {}",
                    reference.id
                ))
            })?;
            match indicator(reference, bank, config, backend, prompts) {
                Ok(true) => present_at.push(t),
                Ok(false) => {}
                Err(Error::Backend(e)) => {
                    warnings.push(format!(
                        "reference {} checkpoint {t} unevaluated: {e}",
                        reference.id
                    ));
                    unevaluated.push(t);
                }
                Err(e) => return Err(e),
            }
        }

        let evaluated = sampled.len() - unevaluated.len();
        if evaluated > 0 {
            numerator += window as f64 / evaluated as f64 * present_at.len() as f64;
        } else {
            warnings.push(format!(
                "reference {} had no evaluable checkpoints; scored as absent",
                reference.id
            ));
        }
        denominator += window;
        per_reference.push(ReferenceRetention {
            reference_id: reference.id.clone(),
            t_start,
            t_target,
            sampled,
            present_at,
            unevaluated,
        });
    }

    let rr = if denominator == 0 {
        None
    } else {
        Some((numerator / denominator as f64).clamp(0.0, 1.0))
    };
    Ok(RetentionOutcome {
        rr,
        numerator,
        denominator,
        per_reference,
        warnings,
    })
}

//! Budget-constrained per-user memory store.
//!
//! Entries are text plus an embedding computed at insert/update time.
//! Eviction is enforced at session boundaries only, so within-session
//! update/delete churn never causes spurious evictions: `end_session`
//! evicts oldest-first (smallest `created_session`, then smallest
//! `entry_id`) until the bank fits its budget. One bank belongs to one
//! user; distinct users' banks are fully independent.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backend::{EmbeddingVector, TextBackend};
use crate::error::{Error, Result};
use crate::model::DomainId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub entry_id: u64,
    pub text: String,
    pub embedding: EmbeddingVector,
    pub created_session: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_domain: Option<DomainId>,
}

/// Snapshot form of a bank: plain JSON with embeddings inline, ordered by
/// entry id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankSnapshot {
    pub budget: usize,
    pub current_session: u32,
    pub next_entry_id: u64,
    pub entries: Vec<MemoryEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBank {
    entries: BTreeMap<u64, MemoryEntry>,
    budget: usize,
    current_session: u32,
    next_entry_id: u64,
}

impl MemoryBank {
    /// The default entry budget.
    pub const DEFAULT_BUDGET: usize = 200;

    pub fn new(budget: usize) -> Result<Self> {
        if budget == 0 {
            return Err(Error::Config("memory budget must be at least 1".to_string()));
        }
        Ok(Self {
            entries: BTreeMap::new(),
            budget,
            current_session: 0,
            next_entry_id: 1,
        })
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn current_session(&self) -> u32 {
        self.current_session
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, entry_id: u64) -> Option<&MemoryEntry> {
        self.entries.get(&entry_id)
    }

    /// Entries in insertion (entry id) order.
    pub fn entries(&self) -> impl Iterator<Item = &MemoryEntry> {
        self.entries.values()
    }

    pub fn contains(&self, entry_id: u64) -> bool {
        self.entries.contains_key(&entry_id)
    }

    /// Store a new fact. The embedding is computed through the backend;
    /// eviction is deferred to `end_session`.
    pub fn insert(
        &mut self,
        backend: &dyn TextBackend,
        text: &str,
        session: u32,
        source_domain: Option<DomainId>,
    ) -> Result<u64> {
        if text.is_empty() {
            return Err(Error::Validation("cannot insert empty memory text".to_string()));
        }
        let embedding = backend.embed(text)?;
        let entry_id = self.next_entry_id;
        self.next_entry_id += 1;
        self.entries.insert(
            entry_id,
            MemoryEntry {
                entry_id,
                text: text.to_string(),
                embedding,
                created_session: session,
                source_domain,
            },
        );
        Ok(entry_id)
    }

    /// Replace an entry's text and re-embed it, preserving its id and
    /// creation session.
    pub fn update(&mut self, backend: &dyn TextBackend, entry_id: u64, new_text: &str) -> Result<()> {
        if new_text.is_empty() {
            return Err(Error::Validation("cannot update to empty memory text".to_string()));
        }
        let embedding = backend.embed(new_text)?;
        match self.entries.get_mut(&entry_id) {
            Some(entry) => {
                entry.text = new_text.to_string();
                entry.embedding = embedding;
                Ok(())
            }
            None => Err(Error::Validation(format!("unknown entry_id {entry_id}"))),
        }
    }

    pub fn delete(&mut self, entry_id: u64) -> Result<()> {
        match self.entries.remove(&entry_id) {
            Some(_) => Ok(()),
            None => Err(Error::Validation(format!("unknown entry_id {entry_id}"))),
        }
    }

    /// Top-k entries by descending cosine similarity to the query, ties
    /// broken by ascending entry id. Zero-norm or dimension-mismatched
    /// embeddings are excluded from candidacy. An empty bank yields an
    /// empty list.
    pub fn retrieve_top_k(
        &self,
        backend: &dyn TextBackend,
        query: &str,
        k: usize,
    ) -> Result<Vec<MemoryEntry>> {
        if k == 0 || self.entries.is_empty() {
            return Ok(Vec::new());
        }
        let query_embedding = backend.embed(query)?;
        Ok(self.retrieve_top_k_by_vector(&query_embedding, k))
    }

    /// Retrieval against a precomputed query embedding.
    pub fn retrieve_top_k_by_vector(&self, query: &EmbeddingVector, k: usize) -> Vec<MemoryEntry> {
        let mut scored: Vec<(f64, &MemoryEntry)> = self
            .entries
            .values()
            .filter_map(|entry| query.cosine(&entry.embedding).map(|s| (s, entry)))
            .collect();
        scored.sort_by(|(sa, ea), (sb, eb)| {
            sb.total_cmp(sa).then_with(|| ea.entry_id.cmp(&eb.entry_id))
        });
        scored.truncate(k);
        scored.into_iter().map(|(_, e)| e.clone()).collect()
    }

    /// Close out a session: evict oldest-first until the bank fits its
    /// budget and advance the session cursor. Returns the evicted ids in
    /// eviction order.
    pub fn end_session(&mut self, session: u32) -> Result<Vec<u64>> {
        if session < self.current_session {
            return Err(Error::Validation(format!(
                "session index regression: {} after {}",
                session, self.current_session
            )));
        }
        let mut evicted = Vec::new();
        while self.entries.len() > self.budget {
            let victim = self
                .entries
                .values()
                .min_by_key(|e| (e.created_session, e.entry_id))
                .map(|e| e.entry_id)
                .expect("bank is non-empty while over budget");
            self.entries.remove(&victim);
            evicted.push(victim);
        }
        self.current_session = session;
        Ok(evicted)
    }

    pub fn snapshot(&self) -> BankSnapshot {
        BankSnapshot {
            budget: self.budget,
            current_session: self.current_session,
            next_entry_id: self.next_entry_id,
            entries: self.entries.values().cloned().collect(),
        }
    }

    pub fn from_snapshot(snapshot: BankSnapshot) -> Result<Self> {
        if snapshot.budget == 0 {
            return Err(Error::Validation("snapshot budget must be at least 1".to_string()));
        }
        let mut entries = BTreeMap::new();
        for entry in snapshot.entries {
            if entries.insert(entry.entry_id, entry).is_some() {
                return Err(Error::Validation("snapshot has duplicate entry ids".to_string()));
            }
        }
        Ok(Self {
            entries,
            budget: snapshot.budget,
            current_session: snapshot.current_session,
            next_entry_id: snapshot.next_entry_id,
        })
    }

    pub fn save_snapshot(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.snapshot())
            .map_err(|e| Error::Internal(format!("snapshot serialization: {e}")))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_snapshot(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let snapshot: BankSnapshot = serde_json::from_str(&raw)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_snapshot(snapshot)
    }
}

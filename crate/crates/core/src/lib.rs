//! Personalized agent-memory engine and evaluation harness.
//!
//! The engine simulates memory systems over long-horizon, multi-domain
//! interaction benchmarks where what is worth storing differs per user:
//!
//! - [`model`] — personas, agent-use profiles, life skeletons, sessions,
//!   reference memories, and the dataset container with its validation.
//! - [`backend`] — pluggable text-generation/embedding abstraction with a
//!   deterministic scripted mock for offline runs.
//! - [`bank`] — budget-constrained per-user memory store with embedding
//!   retrieval and oldest-first eviction at session boundaries.
//! - [`ops`] — extraction of memory operations from dialogue and their
//!   application to the bank.
//! - [`gating`] — session-level storage gating policies (universal,
//!   oracle, greedy, context-aware, structure-aware).
//! - [`eval`] — memory retention rate with checkpoint sampling, gating
//!   classification metrics, and profile-diversity analysis.
//! - [`synthgen`] — the benchmark generation pipeline (profiles,
//!   skeletons, timelines, profile shifts, dual-simulator dialogues).
//! - [`runner`] — gated simulation runs and report assembly.

pub mod backend;
pub mod bank;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod gating;
pub mod model;
pub mod ops;
pub mod prompts;
pub mod runner;
pub mod seeded;
pub mod synthgen;

pub use error::{Error, ErrorClass, Result};

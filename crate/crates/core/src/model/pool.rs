//! The configured domain pool.
//!
//! The default pool is the 20-domain taxonomy shipped as static config;
//! deployments with different taxonomies can load their own pool.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::DomainId;

/// The default 20-domain taxonomy.
pub const DEFAULT_DOMAINS: [&str; 20] = [
    "Academic Study & Learning",
    "Business & Entrepreneurship",
    "Career Development & Job Search",
    "Data Analysis & Visualization",
    "Event Planning",
    "Health & Wellness",
    "Home & Real Estate",
    "Language Learning",
    "Legal & Administrative Affairs",
    "Math & Quantitative Problem Solving",
    "Mental Health & Emotional Support",
    "News & Current Events",
    "Personal Finance & Investment",
    "Recipe Advice & Meal Planning",
    "Relationship & Social Advice",
    "Shopping & Product Research",
    "Software Development & Coding",
    "Sport & Physical Activity",
    "Travel Planning",
    "Writing Assistant",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainPool {
    domains: BTreeSet<DomainId>,
}

impl Default for DomainPool {
    fn default() -> Self {
        Self {
            domains: DEFAULT_DOMAINS.iter().map(|d| DomainId::new(*d)).collect(),
        }
    }
}

impl DomainPool {
    pub fn new<I>(domains: I) -> Self
    where
        I: IntoIterator,
        I::Item: Into<String>,
    {
        Self {
            domains: domains.into_iter().map(|d| DomainId::new(d)).collect(),
        }
    }

    /// Load a pool from a JSON array of domain names.
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let names: Vec<String> = serde_json::from_str(&raw)
            .map_err(|e| Error::Parse(format!("domain pool {}: {e}", path.display())))?;
        if names.is_empty() {
            return Err(Error::Validation("domain pool is empty".to_string()));
        }
        Ok(Self::new(names))
    }

    pub fn contains(&self, domain: &DomainId) -> bool {
        self.domains.contains(domain)
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    /// Domains in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = &DomainId> {
        self.domains.iter()
    }
}

//! Profile-diversity analysis: pairwise Jaccard similarity over
//! (domain, memory-necessity) feature sets of the sampled domains.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::AgentUseProfile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JaccardAnalysis {
    pub personas: Vec<String>,
    /// Symmetric matrix with unit diagonal, indexed like `personas`.
    pub matrix: Vec<Vec<f64>>,
    /// Personas whose selected set is empty; their similarities are 0
    /// against non-empty sets and 1 against other empty sets.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub empty_profiles: Vec<String>,
    pub mean_offdiag: f64,
    pub min_offdiag: f64,
    pub max_offdiag: f64,
}

fn features(profile: &AgentUseProfile) -> BTreeSet<(String, bool)> {
    profile
        .selected
        .iter()
        .filter_map(|d| {
            profile
                .memory_required(d)
                .map(|m| (d.as_str().to_string(), m))
        })
        .collect()
}

fn jaccard(a: &BTreeSet<(String, bool)>, b: &BTreeSet<(String, bool)>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let intersection = a.intersection(b).count();
    let union = a.union(b).count();
    if union == 0 {
        0.0
    } else {
        intersection as f64 / union as f64
    }
}

pub fn profile_jaccard(profiles: &[&AgentUseProfile]) -> Result<JaccardAnalysis> {
    if profiles.len() < 2 {
        return Err(Error::Validation(
            "jaccard analysis needs at least two profiles".to_string(),
        ));
    }
    let feature_sets: Vec<BTreeSet<(String, bool)>> =
        profiles.iter().map(|p| features(p)).collect();
    let n = profiles.len();
    let mut matrix = vec![vec![0.0f64; n]; n];
    let mut offdiag = Vec::new();
    for i in 0..n {
        matrix[i][i] = 1.0;
        for j in (i + 1)..n {
            let value = jaccard(&feature_sets[i], &feature_sets[j]);
            matrix[i][j] = value;
            matrix[j][i] = value;
            offdiag.push(value);
        }
    }
    let empty_profiles = profiles
        .iter()
        .zip(&feature_sets)
        .filter(|(_, f)| f.is_empty())
        .map(|(p, _)| p.persona.clone())
        .collect();
    Ok(JaccardAnalysis {
        personas: profiles.iter().map(|p| p.persona.clone()).collect(),
        matrix,
        empty_profiles,
        mean_offdiag: offdiag.iter().sum::<f64>() / offdiag.len() as f64,
        min_offdiag: offdiag.iter().cloned().fold(f64::INFINITY, f64::min),
        max_offdiag: offdiag.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    })
}

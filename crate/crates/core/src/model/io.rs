//! Dataset JSON load/save.
//!
//! The on-disk format is a single JSON document:
//!
//! ```json
//! {
//!   "variant": "static",
//!   "users": [
//!     {"persona": {...}, "profile": {...}, "skeleton": {...},
//!      "timeline": [...], "references": [...]}
//!   ]
//! }
//! ```
//!
//! A minimal example ships in `fixtures/minimal-dataset.json`. Loading
//! always validates; a loaded dataset satisfies every model invariant.

use std::path::Path;

use crate::error::{Error, Result};

use super::{validate_dataset, BenchmarkDataset, DomainPool};

pub fn load_dataset(path: &Path) -> Result<BenchmarkDataset> {
    load_dataset_with_pool(path, &DomainPool::default())
}

pub fn load_dataset_with_pool(path: &Path, pool: &DomainPool) -> Result<BenchmarkDataset> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let dataset: BenchmarkDataset = serde_json::from_str(&raw)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    validate_dataset(&dataset, pool)?;
    Ok(dataset)
}

/// Canonical pretty-printed JSON. Struct fields serialize in declaration
/// order and maps are BTree-backed, so equal datasets produce identical
/// bytes.
pub fn to_canonical_json(dataset: &BenchmarkDataset) -> Result<String> {
    let mut text = serde_json::to_string_pretty(dataset)
        .map_err(|e| Error::Internal(format!("dataset serialization: {e}")))?;
    text.push('\n');
    Ok(text)
}

pub fn save_dataset(dataset: &BenchmarkDataset, path: &Path) -> Result<()> {
    std::fs::write(path, to_canonical_json(dataset)?).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn round_trip_preserves_the_dataset() {
        let dataset = fixtures::mini_benchmark(2);
        validate_dataset(&dataset, &DomainPool::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dataset.json");
        save_dataset(&dataset, &path).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(loaded, dataset);

        // Canonical bytes are stable across a save/load/save cycle.
        let again = to_canonical_json(&loaded).unwrap();
        assert_eq!(again, to_canonical_json(&dataset).unwrap());
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.json");
        std::fs::write(&path, "{not json").unwrap();
        let err = load_dataset(&path).unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }
}

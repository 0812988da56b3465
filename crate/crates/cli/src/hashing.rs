//! Content hashing for provenance and determinism checks. Input files are
//! hashed the way git hashes blobs (header + bytes), so the recorded value
//! depends only on content, never on paths or modification times.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use qaug::error::Result;

/// Hex digest of `"blob {len}\0"` followed by the file bytes.
pub fn blob_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", bytes.len()).as_bytes());
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

/// One digest over the blob hashes of every input file, in the given order.
pub fn combined_input_hash(files: &[PathBuf]) -> Result<String> {
    let mut hasher = Sha256::new();
    for file in files {
        hasher.update(blob_hash(file)?.as_bytes());
        hasher.update(b"\n");
    }
    Ok(format!("sha256:{:x}", hasher.finalize()))
}

/// Remove every `"timestamp"` field, at any nesting depth.
pub fn strip_timestamps(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Object(map) => {
            map.remove("timestamp");
            for v in map.values_mut() {
                strip_timestamps(v);
            }
        }
        serde_json::Value::Array(items) => {
            for v in items {
                strip_timestamps(v);
            }
        }
        _ => {}
    }
}

/// Digest of a JSON document with timestamps excluded, over the canonical
/// (sorted-key, compact) serialization.
pub fn determinism_hash(value: &serde_json::Value) -> String {
    let mut stripped = value.clone();
    strip_timestamps(&mut stripped);
    let mut hasher = Sha256::new();
    hasher.update(stripped.to_string().as_bytes());
    format!("sha256:{:x}", hasher.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_hash_matches_git_for_known_content() {
        // sha256 of "blob 5\0hello", checked against an external digest tool.
        let dir = std::env::temp_dir().join("qaug-hash-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("blob.txt");
        std::fs::write(&path, b"hello").unwrap();
        assert_eq!(
            blob_hash(&path).unwrap(),
            "8aec4e4876f854f688d0ebfc8f37598f38e5fd6903cccc850ca36591175aeb60"
        );
    }

    #[test]
    fn determinism_hash_ignores_timestamps_only() {
        let a = serde_json::json!({"timestamp": 1, "x": [{"timestamp": 2, "y": 3}]});
        let b = serde_json::json!({"timestamp": 9, "x": [{"timestamp": 8, "y": 3}]});
        let c = serde_json::json!({"timestamp": 9, "x": [{"timestamp": 8, "y": 4}]});
        assert_eq!(determinism_hash(&a), determinism_hash(&b));
        assert_ne!(determinism_hash(&a), determinism_hash(&c));
    }
}

//! Content-addressed result cache: one JSON file per job, named by the
//! SHA-256 of the job's canonical JSON form.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::jobs::JobOutput;

/// Bumped whenever a change would alter cached numbers.
pub const CACHE_FORMAT: u32 = 1;

/// Canonical JSON of `spec`: object keys sorted, no whitespace.
pub fn canonical_json<T: Serialize>(spec: &T) -> Result<String> {
    // serde_json's Map is a BTreeMap without the preserve_order feature.
    let v = serde_json::to_value(spec)?;
    Ok(serde_json::to_string(&v)?)
}

pub fn cache_key<T: Serialize>(spec: &T) -> Result<String> {
    let text = canonical_json(&serde_json::json!({
        "format": CACHE_FORMAT,
        "version": env!("CARGO_PKG_VERSION"),
        "job": spec,
    }))?;
    let digest = Sha256::digest(text.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    job: Value,
    output: JobOutput,
}

pub struct Cache {
    root: PathBuf,
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Cache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, key: &str) -> PathBuf {
        self.root.join(format!("{key}.json"))
    }

    /// Cached output for `job`, or `None` on a miss. Unreadable or
    /// mismatched entries are logged and treated as misses.
    pub fn load<T: Serialize>(&self, key: &str, job: &T) -> Option<JobOutput> {
        let path = self.path(key);
        let text = fs::read_to_string(&path).ok()?;
        let entry: Entry = match serde_json::from_str(&text) {
            Ok(e) => e,
            Err(e) => {
                log::warn!("ignoring corrupt cache entry {}: {e}", path.display());
                return None;
            }
        };
        let expected = serde_json::to_value(job).ok()?;
        if entry.key != key || entry.job != expected {
            log::warn!("ignoring mismatched cache entry {}", path.display());
            return None;
        }
        Some(entry.output)
    }

    /// Writes through a temporary file in the cache directory, then renames.
    pub fn store<T: Serialize>(&self, key: &str, job: &T, output: &JobOutput) -> Result<()> {
        fs::create_dir_all(&self.root)
            .with_context(|| format!("cannot create cache dir {}", self.root.display()))?;
        let entry = Entry {
            key: key.to_string(),
            job: serde_json::to_value(job)?,
            output: output.clone(),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.root)?;
        tmp.write_all(serde_json::to_string(&entry)?.as_bytes())?;
        tmp.flush()?;
        tmp.persist(self.path(key)).map_err(|e| e.error)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn key_ignores_field_order() {
        let a = serde_json::json!({"a": 1, "b": [1.5, 2.0]});
        let b: Value = serde_json::from_str(r#"{"b": [1.5, 2.0], "a": 1}"#).unwrap();
        assert_eq!(cache_key(&a).unwrap(), cache_key(&b).unwrap());
        assert_eq!(cache_key(&a).unwrap().len(), 64);
        assert_ne!(cache_key(&a).unwrap(), cache_key(&serde_json::json!({"a": 2})).unwrap());
    }

    #[test]
    fn round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::new(dir.path());
        let job = serde_json::json!({"kind": "x"});
        let key = cache_key(&job).unwrap();
        assert!(cache.load(&key, &job).is_none());
        let out = JobOutput {
            files: BTreeMap::from([("a.csv".to_string(), "t\n1\n".to_string())]),
            rows: None,
            summary: Value::Null,
        };
        cache.store(&key, &job, &out).unwrap();
        assert_eq!(cache.load(&key, &job), Some(out));
        fs::write(cache.path(&key), "{not json").unwrap();
        assert!(cache.load(&key, &job).is_none());
    }
}

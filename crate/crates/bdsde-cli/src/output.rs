//! Report writers: JSON documents and CSV tables, both stamped with the
//! artifact version, the resolved-config hash and the master seed.
//!
//! Numbers are formatted with the shortest round-trip representation, so
//! outputs are byte-stable across runs and thread counts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct Provenance {
    pub version: String,
    pub config_hash: String,
    pub master_seed: u64,
}

impl Provenance {
    /// Hashes the experiment identity: the resolved config minus the output
    /// location, so the same experiment lands the same hash wherever its
    /// files go.
    pub fn new(resolved_config_json: &str, master_seed: u64) -> Self {
        let canonical = match serde_json::from_str::<Value>(resolved_config_json) {
            Ok(mut value) => {
                if let Some(map) = value.as_object_mut() {
                    map.remove("output_dir");
                }
                // serde_json object maps are key-sorted, so this is canonical
                value.to_string()
            }
            Err(_) => resolved_config_json.to_string(),
        };
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: hex[..16].to_string(),
            master_seed,
        }
    }

    pub fn as_json(&self) -> Value {
        json!({
            "artifact_version": self.version,
            "config_hash": self.config_hash,
            "master_seed": self.master_seed,
        })
    }
}

pub struct OutputDir {
    dir: PathBuf,
    provenance: Provenance,
}

impl OutputDir {
    pub fn create(dir: &Path, provenance: Provenance) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            provenance,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes `{ "provenance": …, …payload }` pretty-printed.
    pub fn write_json(&self, name: &str, payload: Value) -> Result<PathBuf, CliError> {
        let mut document = json!({ "provenance": self.provenance.as_json() });
        if let (Some(doc), Some(extra)) = (document.as_object_mut(), payload.as_object()) {
            for (k, v) in extra {
                doc.insert(k.clone(), v.clone());
            }
        }
        let path = self.path(name);
        let text = serde_json::to_string_pretty(&document)
            .map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(&path, text + "\n")?;
        Ok(path)
    }

    /// Writes a CSV table with `# key=value` provenance comment lines
    /// before the header row.
    pub fn write_csv(
        &self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let file = fs::File::create(&path)?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(w, "# artifact_version={}", self.provenance.version)?;
        writeln!(w, "# config_hash={}", self.provenance.config_hash)?;
        writeln!(w, "# master_seed={}", self.provenance.master_seed)?;
        writeln!(w, "{}", header.join(","))?;
        for row in rows {
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        Ok(path)
    }

    /// The resolved-config echo written next to every run's outputs.
    pub fn write_resolved_config(&self, resolved_json: &str) -> Result<PathBuf, CliError> {
        let path = self.path("resolved_config.json");
        fs::write(&path, format!("{resolved_json}\n"))?;
        Ok(path)
    }
}

/// Shortest round-trip formatting for table cells.
pub fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

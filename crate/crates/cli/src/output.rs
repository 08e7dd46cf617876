//! Output files: JSON, CSV and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(OutDir {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.text(name, &text)
    }

    pub fn text(&self, name: &str, text: &str) -> anyhow::Result<()> {
        let p = self.path(name);
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    }

    pub fn csv<I, R>(&self, name: &str, header: &[&str], rows: I) -> anyhow::Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
    {
        let p = self.path(name);
        let mut w = csv::Writer::from_path(&p).with_context(|| format!("writing {}", p.display()))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: &Path) -> anyhow::Result<String> {
    if path.is_dir() {
        // stores: hash the three files in a fixed order
        let mut h = Sha256::new();
        for name in ["meta.json", "index.jsonl", "vectors.f32"] {
            let p = path.join(name);
            h.update(fs::read(&p).with_context(|| format!("reading {}", p.display()))?);
        }
        return Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect());
    }
    Ok(sha256_hex(&fs::read(path).with_context(|| format!("reading {}", path.display()))?))
}

#[derive(Debug, Serialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

/// Reproducibility record. The timestamp lives only here, so every other
/// output file is byte-identical across repeated runs.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: &'static str,
    pub config_sha256: String,
    pub method: String,
    pub store_model: Option<String>,
    pub seed: u64,
    pub workers: usize,
    pub inputs: BTreeMap<String, InputFile>,
    pub preprocessing: BTreeMap<String, serde_json::Value>,
    pub created_unix_secs: u64,
}

impl Manifest {
    pub fn new(command: &str, config_json: &str, method: &str, seed: u64, workers: usize) -> Self {
        Manifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION"),
            config_sha256: sha256_hex(config_json.as_bytes()),
            method: method.to_string(),
            store_model: None,
            seed,
            workers,
            inputs: BTreeMap::new(),
            preprocessing: BTreeMap::new(),
            created_unix_secs: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn input(&mut self, name: &str, path: &Path) -> anyhow::Result<()> {
        self.inputs.insert(
            name.to_string(),
            InputFile {
                path: path.display().to_string(),
                sha256: file_sha256(path)?,
            },
        );
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.preprocessing
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or_default());
    }
}

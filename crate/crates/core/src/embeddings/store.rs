//! On-disk embedding store.
//!
//! A store is a directory holding three files:
//!
//! * `meta.json`: `{"magic": "SKEMB", "version": 1, "dim", "kind", "count", "pooling", "model"}`
//! * `index.jsonl`: row `i` on line `i`, either `{"phrase": ...}` or `{"sid": ..., "tid": ...}`
//! * `vectors.f32`: `count * dim` little-endian `f32` values, row-major

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use crate::error::{Error, Result};

pub const MAGIC: &str = "SKEMB";
pub const FORMAT_VERSION: u32 = 1;

const META_FILE: &str = "meta.json";
const INDEX_FILE: &str = "index.jsonl";
const VECTORS_FILE: &str = "vectors.f32";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StoreKind {
    #[serde(rename = "phrase")]
    Phrase,
    #[serde(rename = "contextual-tokens")]
    ContextualTokens,
}

/// How the exporter turned subword vectors into word vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Pooling {
    #[default]
    #[serde(rename = "first-subword")]
    FirstSubword,
    #[serde(rename = "mean-subword")]
    MeanSubword,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StoreKey {
    Phrase(String),
    Token { sid: String, tid: usize },
}

impl fmt::Display for StoreKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StoreKey::Phrase(p) => write!(f, "phrase {p:?}"),
            StoreKey::Token { sid, tid } => write!(f, "token {tid} of sentence {sid:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub magic: String,
    pub version: u32,
    pub dim: usize,
    pub kind: StoreKind,
    pub count: usize,
    pub pooling: Pooling,
    pub model: String,
}

#[derive(Serialize, Deserialize)]
struct PhraseLine {
    phrase: String,
}

#[derive(Serialize, Deserialize)]
struct TokenLine {
    sid: String,
    tid: usize,
}

/// Rows of `f32` vectors addressed by phrase or by (sentence id, token index).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    kind: StoreKind,
    pooling: Pooling,
    model: String,
    keys: Vec<StoreKey>,
    phrases: HashMap<String, usize>,
    // sid -> row of each token index
    tokens: HashMap<String, Vec<Option<usize>>>,
    data: Vec<f32>,
}

impl EmbeddingStore {
    pub fn new(dim: usize, kind: StoreKind, pooling: Pooling, model: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Store("dimension must be positive".into()));
        }
        Ok(EmbeddingStore {
            dim,
            kind,
            pooling,
            model: model.into(),
            keys: Vec::new(),
            phrases: HashMap::new(),
            tokens: HashMap::new(),
            data: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> StoreKind {
        self.kind
    }

    pub fn pooling(&self) -> Pooling {
        self.pooling
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[StoreKey] {
        &self.keys
    }

    pub fn matrix(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn push(&mut self, key: StoreKey, vector: &[f32]) -> Result<usize> {
        if vector.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if let Some(bad) = vector.iter().find(|v| !v.is_finite()) {
            return Err(Error::Store(format!("non-finite value {bad} for {key}")));
        }
        let row = self.keys.len();
        match (&key, self.kind) {
            (StoreKey::Phrase(p), StoreKind::Phrase) => {
                if self.phrases.contains_key(p) {
                    return Err(Error::Store(format!("duplicate key {key}")));
                }
                self.phrases.insert(p.clone(), row);
            }
            (StoreKey::Token { sid, tid }, StoreKind::ContextualTokens) => {
                if self.token(sid, *tid).is_some() {
                    return Err(Error::Store(format!("duplicate key {key}")));
                }
                let slots = self.tokens.entry(sid.clone()).or_default();
                if slots.len() <= *tid {
                    slots.resize(tid + 1, None);
                }
                slots[*tid] = Some(row);
            }
            _ => {
                return Err(Error::Store(format!(
                    "key {key} does not fit a {:?} store",
                    self.kind
                )))
            }
        }
        self.keys.push(key);
        self.data.extend_from_slice(vector);
        Ok(row)
    }

    pub fn phrase(&self, phrase: &str) -> Option<&[f32]> {
        self.phrases.get(phrase).map(|&r| self.row(r))
    }

    pub fn token(&self, sid: &str, tid: usize) -> Option<&[f32]> {
        self.tokens
            .get(sid)
            .and_then(|slots| slots.get(tid).copied().flatten())
            .map(|r| self.row(r))
    }

    /// Whether every token of `sentence` has a vector and no extra ones exist.
    pub fn covers(&self, sentence: &Sentence) -> bool {
        self.tokens
            .get(&sentence.id)
            .is_some_and(|slots| slots.len() == sentence.len() && slots.iter().all(Option::is_some))
    }

    /// Word vectors of a sentence in token order.
    pub fn sentence_vectors(&self, sentence: &Sentence) -> Result<Vec<&[f32]>> {
        (0..sentence.len())
            .map(|tid| {
                self.token(&sentence.id, tid).ok_or_else(|| {
                    Error::MissingVector(
                        StoreKey::Token {
                            sid: sentence.id.clone(),
                            tid,
                        }
                        .to_string(),
                    )
                })
            })
            .collect()
    }

    /// Copy with every component multiplied by `alpha`.
    pub fn scaled(&self, alpha: f32) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    pub fn meta(&self) -> StoreMeta {
        StoreMeta {
            magic: MAGIC.to_string(),
            version: FORMAT_VERSION,
            dim: self.dim,
            kind: self.kind,
            count: self.len(),
            pooling: self.pooling,
            model: self.model.clone(),
        }
    }

    /// Checks the contextual coverage invariant: token indices of every
    /// sentence are contiguous from 0.
    pub fn validate(&self) -> Result<()> {
        for (sid, slots) in &self.tokens {
            if let Some(tid) = slots.iter().position(Option::is_none) {
                return Err(Error::Store(format!(
                    "sentence {sid:?} is missing token {tid} ({} slots)",
                    slots.len()
                )));
            }
        }
        Ok(())
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

        let meta = serde_json::to_string_pretty(&self.meta())? + "\n";
        let meta_path = dir.join(META_FILE);
        std::fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))?;

        let mut index = Vec::new();
        for key in &self.keys {
            match key {
                StoreKey::Phrase(p) => serde_json::to_writer(&mut index, &PhraseLine { phrase: p.clone() })?,
                StoreKey::Token { sid, tid } => serde_json::to_writer(
                    &mut index,
                    &TokenLine {
                        sid: sid.clone(),
                        tid: *tid,
                    },
                )?,
            }
            index.push(b'\n');
        }
        let index_path = dir.join(INDEX_FILE);
        std::fs::write(&index_path, index).map_err(|e| Error::io(&index_path, e))?;

        let vec_path = dir.join(VECTORS_FILE);
        let mut file = std::io::BufWriter::new(
            std::fs::File::create(&vec_path).map_err(|e| Error::io(&vec_path, e))?,
        );
        for v in &self.data {
            file.write_all(&v.to_le_bytes()).map_err(|e| Error::io(&vec_path, e))?;
        }
        file.flush().map_err(|e| Error::io(&vec_path, e))?;
        Ok(())
    }

    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            let p = dir.join(name);
            std::fs::read(&p).map_err(|e| Error::io(&p, e))
        };

        let meta: StoreMeta = serde_json::from_slice(&read(META_FILE)?)
            .map_err(|e| Error::Store(format!("bad {META_FILE}: {e}")))?;
        if meta.magic != MAGIC {
            return Err(Error::Store(format!(
                "bad magic {:?} (expected {MAGIC:?}, format version {FORMAT_VERSION})",
                meta.magic
            )));
        }
        if meta.version != FORMAT_VERSION {
            return Err(Error::Store(format!(
                "unsupported format version {} (expected {FORMAT_VERSION})",
                meta.version
            )));
        }

        let payload = read(VECTORS_FILE)?;
        let expected = meta.count * meta.dim * 4;
        if payload.len() != expected {
            if meta.count > 0 && payload.len() % (meta.count * 4) == 0 {
                return Err(Error::DimMismatch {
                    expected: meta.dim,
                    actual: payload.len() / (meta.count * 4),
                });
            }
            return Err(Error::Store(format!(
                "truncated payload: {} bytes, expected {expected} ({} rows x {} dims x 4)",
                payload.len(),
                meta.count,
                meta.dim
            )));
        }
        let values: Vec<f32> = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();

        let index = String::from_utf8(read(INDEX_FILE)?)
            .map_err(|e| Error::Store(format!("{INDEX_FILE} is not UTF-8: {e}")))?;
        let lines: Vec<&str> = index.lines().filter(|l| !l.trim().is_empty()).collect();
        if lines.len() != meta.count {
            return Err(Error::Store(format!(
                "{INDEX_FILE} has {} rows but meta.count is {}",
                lines.len(),
                meta.count
            )));
        }

        let mut store = EmbeddingStore::new(meta.dim, meta.kind, meta.pooling, meta.model)?;
        store.keys.reserve(meta.count);
        store.data.reserve(values.len());
        for (i, line) in lines.iter().enumerate() {
            let bad = |e: serde_json::Error| Error::Parse {
                file: dir.join(INDEX_FILE).display().to_string(),
                line: i + 1,
                message: e.to_string(),
            };
            let key = match meta.kind {
                StoreKind::Phrase => StoreKey::Phrase(serde_json::from_str::<PhraseLine>(line).map_err(bad)?.phrase),
                StoreKind::ContextualTokens => {
                    let t: TokenLine = serde_json::from_str(line).map_err(bad)?;
                    StoreKey::Token { sid: t.sid, tid: t.tid }
                }
            };
            store.push(key, &values[i * meta.dim..(i + 1) * meta.dim])?;
        }
        store.validate()?;
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EmbeddingStore {
        let mut s = EmbeddingStore::new(3, StoreKind::ContextualTokens, Pooling::FirstSubword, "m").unwrap();
        s.push(StoreKey::Token { sid: "a".into(), tid: 0 }, &[1.0, -2.5, 0.0]).unwrap();
        s.push(StoreKey::Token { sid: "a".into(), tid: 1 }, &[f32::MIN_POSITIVE, 3.0, -0.0]).unwrap();
        s
    }

    #[test]
    fn round_trip_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let s = sample();
        s.write(dir.path()).unwrap();
        let back = EmbeddingStore::read(dir.path()).unwrap();
        assert_eq!(back.keys(), s.keys());
        let bits = |m: &[f32]| m.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(back.matrix()), bits(s.matrix()));
        assert!(back.covers(&Sentence::from_text("a", "x y")));
        assert!(!back.covers(&Sentence::from_text("a", "x y z")));
    }

    #[test]
    fn index_format() {
        let dir = tempfile::tempdir().unwrap();
        sample().write(dir.path()).unwrap();
        let index = std::fs::read_to_string(dir.path().join(INDEX_FILE)).unwrap();
        assert_eq!(index, "{\"sid\":\"a\",\"tid\":0}\n{\"sid\":\"a\",\"tid\":1}\n");
        let meta: serde_json::Value =
            serde_json::from_slice(&std::fs::read(dir.path().join(META_FILE)).unwrap()).unwrap();
        assert_eq!(meta["kind"], "contextual-tokens");
        assert_eq!(meta["pooling"], "first-subword");
        assert_eq!(meta["count"], 2);
        assert_eq!(std::fs::metadata(dir.path().join(VECTORS_FILE)).unwrap().len(), 24);
    }

    #[test]
    fn corrupt_magic() {
        let dir = tempfile::tempdir().unwrap();
        sample().write(dir.path()).unwrap();
        let p = dir.path().join(META_FILE);
        let text = std::fs::read_to_string(&p).unwrap().replace("SKEMB", "NOPE!");
        std::fs::write(&p, text).unwrap();
        let err = EmbeddingStore::read(dir.path()).unwrap_err().to_string();
        assert!(err.contains("bad magic") && err.contains("version 1"), "{err}");
    }

    #[test]
    fn truncated_payload() {
        let dir = tempfile::tempdir().unwrap();
        sample().write(dir.path()).unwrap();
        let p = dir.path().join(VECTORS_FILE);
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 4]).unwrap();
        let err = EmbeddingStore::read(dir.path()).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
    }

    #[test]
    fn dim_mismatch_payload() {
        let dir = tempfile::tempdir().unwrap();
        sample().write(dir.path()).unwrap();
        let p = dir.path().join(VECTORS_FILE);
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.extend_from_slice(&[0u8; 8]);
        std::fs::write(&p, bytes).unwrap();
        assert!(matches!(
            EmbeddingStore::read(dir.path()),
            Err(Error::DimMismatch { expected: 3, actual: 4 })
        ));
    }

    #[test]
    fn gap_in_token_indices_rejected() {
        let mut s = EmbeddingStore::new(1, StoreKind::ContextualTokens, Pooling::FirstSubword, "m").unwrap();
        s.push(StoreKey::Token { sid: "a".into(), tid: 1 }, &[1.0]).unwrap();
        assert!(s.validate().is_err());
    }

    #[test]
    fn push_rejects_bad_rows() {
        let mut s = EmbeddingStore::new(2, StoreKind::Phrase, Pooling::FirstSubword, "m").unwrap();
        s.push(StoreKey::Phrase("x".into()), &[1.0, 2.0]).unwrap();
        assert!(s.push(StoreKey::Phrase("x".into()), &[1.0, 2.0]).is_err());
        assert!(s.push(StoreKey::Phrase("y".into()), &[1.0]).is_err());
        assert!(s.push(StoreKey::Phrase("z".into()), &[f32::NAN, 1.0]).is_err());
        assert!(s.push(StoreKey::Token { sid: "a".into(), tid: 0 }, &[1.0, 2.0]).is_err());
        assert_eq!(s.phrase("x"), Some(&[1.0, 2.0][..]));
    }
}

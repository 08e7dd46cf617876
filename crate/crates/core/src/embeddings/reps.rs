//! Skill representation tables.
//!
//! * ISO: the phrase vector of the skill encoded on its own.
//! * AOC: for every corpus occurrence of the skill's token sequence, the mean
//!   of its word vectors; the row is the mean over occurrences.
//! * WSE: per occurrence, the idf-weighted sum of its word vectors; the row is
//!   the mean over occurrences.
//!
//! Sums are accumulated in `f64` and rounded to `f32` once per row. Skills
//! that never occur in the corpus fall back to their ISO vector when a phrase
//! store is supplied (`fallback = true`), otherwise they are unrepresentable.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::idf::IdfTable;
use super::store::{EmbeddingStore, Pooling, StoreKey, StoreKind};
use crate::candidates::CandidateSpan;
use crate::corpus::{Dataset, Sentence};
use crate::error::{Error, Result};
use crate::taxonomy::SkillInventory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepMethod {
    Iso,
    Aoc,
    Wse,
}

impl fmt::Display for RepMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RepMethod::Iso => "iso",
            RepMethod::Aoc => "aoc",
            RepMethod::Wse => "wse",
        })
    }
}

impl FromStr for RepMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "iso" => Ok(RepMethod::Iso),
            "aoc" => Ok(RepMethod::Aoc),
            "wse" => Ok(RepMethod::Wse),
            _ => Err(format!("unknown representation {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkillRow {
    pub skill_id: String,
    pub phrase: String,
    pub vector: Vec<f32>,
    /// Sentences the skill occurs in (0 for ISO and fallbacks).
    pub contexts: usize,
    pub occurrences: usize,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkillRepTable {
    pub method: RepMethod,
    pub dim: usize,
    pub rows: Vec<SkillRow>,
    pub unrepresentable: Vec<String>,
}

impl SkillRepTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, skill_id: &str) -> Option<&SkillRow> {
        self.rows.iter().find(|r| r.skill_id == skill_id)
    }

    pub fn fallbacks(&self) -> usize {
        self.rows.iter().filter(|r| r.fallback).count()
    }

    pub fn scaled(&self, alpha: f32) -> Self {
        let mut out = self.clone();
        for r in &mut out.rows {
            r.vector.iter_mut().for_each(|v| *v *= alpha);
        }
        out
    }

    /// The table as a phrase store keyed by preprocessed skill phrase.
    pub fn to_store(&self, model: &str) -> Result<EmbeddingStore> {
        let mut store = EmbeddingStore::new(
            self.dim,
            StoreKind::Phrase,
            Pooling::FirstSubword,
            format!("{model}+{}", self.method),
        )?;
        for r in &self.rows {
            store.push(StoreKey::Phrase(r.phrase.clone()), &r.vector)?;
        }
        Ok(store)
    }
}

pub fn build_iso(inv: &SkillInventory, phrase_store: &EmbeddingStore) -> Result<SkillRepTable> {
    if phrase_store.kind() != StoreKind::Phrase {
        return Err(Error::Store("ISO needs a phrase store".into()));
    }
    let mut table = SkillRepTable {
        method: RepMethod::Iso,
        dim: phrase_store.dim(),
        rows: Vec::new(),
        unrepresentable: Vec::new(),
    };
    for e in &inv.entries {
        let phrase = e.phrase();
        match phrase_store.phrase(&phrase) {
            Some(v) => table.rows.push(SkillRow {
                skill_id: e.id.clone(),
                phrase,
                vector: v.to_vec(),
                contexts: 0,
                occurrences: 0,
                fallback: false,
            }),
            None => table.unrepresentable.push(e.id.clone()),
        }
    }
    Ok(table)
}

pub fn build_aoc(
    inv: &SkillInventory,
    ctx_store: &EmbeddingStore,
    corpus: &[&Dataset],
    fallback: Option<&EmbeddingStore>,
) -> Result<SkillRepTable> {
    build_contextual(inv, ctx_store, corpus, fallback, None)
}

pub fn build_wse(
    inv: &SkillInventory,
    ctx_store: &EmbeddingStore,
    idf: &IdfTable,
    corpus: &[&Dataset],
    fallback: Option<&EmbeddingStore>,
) -> Result<SkillRepTable> {
    build_contextual(inv, ctx_store, corpus, fallback, Some(idf))
}

#[derive(Default, Clone)]
struct Accumulator {
    sum: Vec<f64>,
    occurrences: usize,
    contexts: usize,
    last_sentence: Option<usize>,
}

fn build_contextual(
    inv: &SkillInventory,
    ctx: &EmbeddingStore,
    corpus: &[&Dataset],
    fallback: Option<&EmbeddingStore>,
    idf: Option<&IdfTable>,
) -> Result<SkillRepTable> {
    if ctx.kind() != StoreKind::ContextualTokens {
        return Err(Error::Store("AOC/WSE need a contextual token store".into()));
    }
    if let Some(fb) = fallback {
        if fb.dim() != ctx.dim() {
            return Err(Error::DimMismatch {
                expected: ctx.dim(),
                actual: fb.dim(),
            });
        }
    }
    let dim = ctx.dim();
    let mut by_tokens: HashMap<&[String], Vec<usize>> = HashMap::new();
    for (i, e) in inv.entries.iter().enumerate() {
        by_tokens.entry(e.tokens.as_slice()).or_default().push(i);
    }
    let max_len = inv.max_len();
    let mut acc = vec![Accumulator::default(); inv.len()];

    let mut sentence_no = 0usize;
    for d in corpus {
        for s in &d.sentences {
            sentence_no += 1;
            let forms = s.lower_forms();
            let mut vectors: Option<Vec<&[f32]>> = None;
            for start in 0..forms.len() {
                for n in 1..=max_len.min(forms.len() - start) {
                    let Some(skills) = by_tokens.get(&forms[start..start + n]) else {
                        continue;
                    };
                    if vectors.is_none() {
                        vectors = Some(ctx.sentence_vectors(s)?);
                    }
                    let vs = vectors.as_ref().unwrap();
                    let mut occ = vec![0.0f64; dim];
                    for pos in start..start + n {
                        let w = idf.map_or(1.0, |t| t.idf(&forms[pos]));
                        for (o, &x) in occ.iter_mut().zip(vs[pos]) {
                            *o += w * x as f64;
                        }
                    }
                    if idf.is_none() {
                        occ.iter_mut().for_each(|o| *o /= n as f64);
                    }
                    for &k in skills {
                        let a = &mut acc[k];
                        if a.sum.is_empty() {
                            a.sum = vec![0.0; dim];
                        }
                        for (s, o) in a.sum.iter_mut().zip(&occ) {
                            *s += o;
                        }
                        a.occurrences += 1;
                        if a.last_sentence != Some(sentence_no) {
                            a.contexts += 1;
                            a.last_sentence = Some(sentence_no);
                        }
                    }
                }
            }
        }
    }

    let mut table = SkillRepTable {
        method: if idf.is_some() { RepMethod::Wse } else { RepMethod::Aoc },
        dim,
        rows: Vec::with_capacity(inv.len()),
        unrepresentable: Vec::new(),
    };
    for (e, a) in inv.entries.iter().zip(acc) {
        let phrase = e.phrase();
        if a.occurrences > 0 {
            let n = a.occurrences as f64;
            table.rows.push(SkillRow {
                skill_id: e.id.clone(),
                phrase,
                vector: a.sum.iter().map(|s| (s / n) as f32).collect(),
                contexts: a.contexts,
                occurrences: a.occurrences,
                fallback: false,
            });
        } else if let Some(v) = fallback.and_then(|fb| fb.phrase(&phrase)) {
            table.rows.push(SkillRow {
                skill_id: e.id.clone(),
                phrase,
                vector: v.to_vec(),
                contexts: 0,
                occurrences: 0,
                fallback: true,
            });
        } else {
            table.unrepresentable.push(e.id.clone());
        }
    }
    Ok(table)
}

/// Mean of the contextual word vectors over the candidate's tokens.
pub fn embed_candidate(c: CandidateSpan, s: &Sentence, ctx: &EmbeddingStore) -> Result<Vec<f32>> {
    let mut sum = vec![0.0f64; ctx.dim()];
    for tid in c.start..c.end {
        let v = ctx.token(&s.id, tid).ok_or_else(|| {
            Error::MissingVector(
                StoreKey::Token {
                    sid: s.id.clone(),
                    tid,
                }
                .to_string(),
            )
        })?;
        for (acc, &x) in sum.iter_mut().zip(v) {
            *acc += x as f64;
        }
    }
    let n = c.len() as f64;
    Ok(sum.iter().map(|x| (x / n) as f32).collect())
}

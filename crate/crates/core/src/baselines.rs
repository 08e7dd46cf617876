//! Surface baselines: exact token-sequence match, lemma match and POS-sequence
//! match against the inventory.
//!
//! Matching is on whole tokens. Overlapping hits are resolved longest first,
//! then leftmost.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::candidates::ngram_spans;
use crate::corpus::{Dataset, Sentence, SpanLabel, Upos};
use crate::error::{Error, Result};
use crate::predictions::{resolve_longest_leftmost, PredSpan, Predictions, SentencePrediction};
use crate::taxonomy::{top_k, SkillInventory};

/// Lookup from a lowercased token sequence to the first skill id carrying it.
#[derive(Debug, Clone)]
pub struct PhraseLookup {
    phrases: HashMap<Vec<String>, String>,
    max_len: usize,
}

impl PhraseLookup {
    pub fn new<'a>(pairs: impl IntoIterator<Item = (Vec<String>, &'a str)>) -> Self {
        let mut phrases = HashMap::new();
        let mut max_len = 0;
        for (tokens, id) in pairs {
            max_len = max_len.max(tokens.len());
            phrases.entry(tokens).or_insert_with(|| id.to_string());
        }
        PhraseLookup { phrases, max_len }
    }

    pub fn surface(inv: &SkillInventory) -> Self {
        Self::new(inv.entries.iter().map(|e| (e.tokens.clone(), e.id.as_str())))
    }

    pub fn lemmas(inv: &SkillInventory) -> Result<Self> {
        if !inv.has_lemmas() {
            return Err(Error::MissingAnnotation(
                "lemma match needs a lemma column for every skill".into(),
            ));
        }
        Ok(Self::new(
            inv.entries
                .iter()
                .map(|e| (e.lemmas.clone().unwrap(), e.id.as_str())),
        ))
    }

    pub fn get(&self, tokens: &[String]) -> Option<&str> {
        self.phrases.get(tokens).map(String::as_str)
    }

    /// Non-overlapping matches over `tokens` (already lowercased).
    pub fn find(&self, tokens: &[String]) -> Vec<PredSpan> {
        let mut hits = Vec::new();
        for c in ngram_spans(tokens.len(), self.max_len) {
            if let Some(id) = self.get(&tokens[c.start..c.end]) {
                hits.push((c.start, c.end, id));
            }
        }
        resolve_longest_leftmost(hits)
            .into_iter()
            .map(|(start, end, id)| PredSpan {
                start,
                end,
                label: SpanLabel::Skill,
                skill_id: Some(id.to_string()),
                score: None,
            })
            .collect()
    }
}

fn predict_all(
    dataset: &Dataset,
    method: &str,
    mut per_sentence: impl FnMut(&Sentence) -> Result<Vec<PredSpan>>,
) -> Result<Predictions> {
    let sentences = dataset
        .sentences
        .iter()
        .map(|s| {
            Ok(SentencePrediction {
                id: s.id.clone(),
                spans: per_sentence(s)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Predictions::new(method, sentences))
}

pub fn exact_match(dataset: &Dataset, inv: &SkillInventory) -> Predictions {
    let lookup = PhraseLookup::surface(inv);
    predict_all(dataset, "exact", |s| Ok(lookup.find(&s.lower_forms())))
        .expect("exact matching is infallible")
}

pub fn lemma_match(dataset: &Dataset, inv: &SkillInventory) -> Result<Predictions> {
    let lookup = PhraseLookup::lemmas(inv)?;
    predict_all(dataset, "lemma", |s| {
        let lemmas = s.lower_lemmas().ok_or_else(|| {
            Error::MissingAnnotation(format!("sentence {:?} has no lemma column", s.id))
        })?;
        Ok(lookup.find(&lemmas))
    })
}

/// The set of inventory POS sequences usable by the POS baseline.
#[derive(Debug, Clone)]
pub struct PosPatterns {
    patterns: HashSet<Vec<Upos>>,
    max_len: usize,
}

impl PosPatterns {
    /// Sequences of at most `max_len` tags; with `top_k`, only the `k` most
    /// frequent of those.
    pub fn from_inventory(inv: &SkillInventory, max_len: usize, top: Option<usize>) -> Result<Self> {
        if !inv.has_upos() {
            return Err(Error::MissingAnnotation(
                "POS match needs UPOS tags for every skill".into(),
            ));
        }
        let mut freq: BTreeMap<Vec<Upos>, usize> = BTreeMap::new();
        for e in &inv.entries {
            let seq = e.upos.as_ref().unwrap();
            if seq.len() <= max_len {
                *freq.entry(seq.clone()).or_insert(0) += 1;
            }
        }
        let patterns = match top {
            Some(k) => top_k(&freq, k).into_iter().map(|(s, _)| s).collect(),
            None => freq.into_keys().collect(),
        };
        Ok(PosPatterns { patterns, max_len })
    }

    pub fn from_sequences(seqs: impl IntoIterator<Item = Vec<Upos>>, max_len: usize) -> Self {
        PosPatterns {
            patterns: seqs.into_iter().filter(|s| s.len() <= max_len).collect(),
            max_len,
        }
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn contains(&self, seq: &[Upos]) -> bool {
        self.patterns.contains(seq)
    }

    pub fn find(&self, tags: &[Upos]) -> Vec<PredSpan> {
        let hits: Vec<(usize, usize, ())> = ngram_spans(tags.len(), self.max_len)
            .into_iter()
            .filter(|c| self.patterns.contains(&tags[c.start..c.end]))
            .map(|c| (c.start, c.end, ()))
            .collect();
        resolve_longest_leftmost(hits)
            .into_iter()
            .map(|(start, end, ())| PredSpan {
                start,
                end,
                label: SpanLabel::Skill,
                skill_id: None,
                score: None,
            })
            .collect()
    }

    pub fn predict(&self, dataset: &Dataset) -> Result<Predictions> {
        predict_all(dataset, "pos", |s| {
            let tags = s.upos().ok_or_else(|| {
                Error::MissingAnnotation(format!("sentence {:?} has no UPOS column", s.id))
            })?;
            Ok(self.find(&tags))
        })
    }
}

pub fn pos_match(
    dataset: &Dataset,
    inv: &SkillInventory,
    max_len: usize,
    top: Option<usize>,
) -> Result<Predictions> {
    PosPatterns::from_inventory(inv, max_len, top)?.predict(dataset)
}

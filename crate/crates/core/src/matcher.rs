//! Cosine matching of candidate n-grams against a skill representation table.
//!
//! Every candidate of up to `n_max` tokens is encoded and scored against every
//! table row; its score is the best cosine over rows (the earliest row wins a
//! tie). In single-span mode the sentence yields the one candidate with the
//! highest score, provided it is strictly above `tau`. In multi-span mode all
//! candidates above `tau` are taken greedily by descending score, skipping
//! any that overlap an earlier pick. Ties between candidates go to the earlier
//! start, then the shorter span.
//!
//! Cosines are computed in `f64` over `f32` inputs, so results do not depend
//! on thread count or evaluation order.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidates::{ngram_spans, CandidateSpan};
use crate::corpus::{Dataset, Sentence, Span, SpanLabel};
use crate::embeddings::{embed_candidate, EmbeddingStore, SkillRepTable, StoreKind};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_loose, evaluate_strict, EvalReport};
use crate::predictions::{PredSpan, Predictions, SentencePrediction};

static ZERO_NORM_WARNINGS: AtomicU64 = AtomicU64::new(0);

/// Number of cosine evaluations that hit a zero-norm vector so far.
pub fn zero_norm_warnings() -> u64 {
    ZERO_NORM_WARNINGS.load(Ordering::Relaxed)
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

fn cosine_with_norms(a: &[f32], na: f64, b: &[f32], nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        ZERO_NORM_WARNINGS.fetch_add(1, Ordering::Relaxed);
        return 0.0;
    }
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

/// Cosine similarity clamped to `[-1, 1]`; 0 (and a counted warning) when
/// either side has zero norm.
pub fn cos_sim(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(cosine_with_norms(a, norm(a), b, norm(b)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    #[default]
    Single,
    Multi,
}

impl FromStr for MatchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" | "single-span" => Ok(MatchMode::Single),
            "multi" | "multi-span" => Ok(MatchMode::Multi),
            _ => Err(format!("unknown match mode {s:?}")),
        }
    }
}

impl fmt::Display for MatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchMode::Single => "single",
            MatchMode::Multi => "multi",
        })
    }
}

/// How candidate n-grams are turned into vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateEncoding {
    /// Mean of the sentence's contextual word vectors.
    #[default]
    Contextual,
    /// Phrase-store lookup of the lowercased n-gram text.
    Isolated,
}

impl FromStr for CandidateEncoding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "contextual" => Ok(CandidateEncoding::Contextual),
            "isolated" => Ok(CandidateEncoding::Isolated),
            _ => Err(format!("unknown candidate encoding {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub tau: f64,
    pub n_max: usize,
    pub mode: MatchMode,
    pub candidate_encoding: CandidateEncoding,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            tau: 0.8,
            n_max: 4,
            mode: MatchMode::Single,
            candidate_encoding: CandidateEncoding::Contextual,
        }
    }
}

impl MatchConfig {
    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_mode(mut self, mode: MatchMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Invalid(format!("tau {} is outside [0, 1]", self.tau)));
        }
        if self.n_max == 0 {
            return Err(Error::Invalid("n_max must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictedSpan {
    pub span: Span,
    pub score: f64,
    pub skill_id: String,
}

impl From<&PredictedSpan> for PredSpan {
    fn from(p: &PredictedSpan) -> Self {
        PredSpan {
            start: p.span.start,
            end: p.span.end,
            label: p.span.label,
            skill_id: Some(p.skill_id.clone()),
            score: Some(p.score),
        }
    }
}

/// A candidate with its best cosine and the index of the table row achieving it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredCandidate {
    pub span: CandidateSpan,
    pub score: f64,
    pub row: usize,
}

/// Pre-normalized view over a table and a store.
pub struct Matcher<'a> {
    table: &'a SkillRepTable,
    store: &'a EmbeddingStore,
    row_norms: Vec<f64>,
    cfg: MatchConfig,
}

impl<'a> Matcher<'a> {
    pub fn new(table: &'a SkillRepTable, store: &'a EmbeddingStore, cfg: MatchConfig) -> Result<Self> {
        cfg.validate()?;
        if table.is_empty() {
            return Err(Error::Invalid("skill representation table is empty".into()));
        }
        if table.dim != store.dim() {
            return Err(Error::DimMismatch {
                expected: table.dim,
                actual: store.dim(),
            });
        }
        let wanted = match cfg.candidate_encoding {
            CandidateEncoding::Contextual => StoreKind::ContextualTokens,
            CandidateEncoding::Isolated => StoreKind::Phrase,
        };
        if store.kind() != wanted {
            return Err(Error::Store(format!(
                "{:?} candidate encoding needs a {wanted:?} store, got {:?}",
                cfg.candidate_encoding,
                store.kind()
            )));
        }
        Ok(Matcher {
            table,
            store,
            row_norms: table.rows.iter().map(|r| norm(&r.vector)).collect(),
            cfg,
        })
    }

    pub fn config(&self) -> &MatchConfig {
        &self.cfg
    }

    fn encode(&self, s: &Sentence, c: CandidateSpan, forms: &[String]) -> Result<Vec<f32>> {
        match self.cfg.candidate_encoding {
            CandidateEncoding::Contextual => embed_candidate(c, s, self.store),
            CandidateEncoding::Isolated => {
                let key = forms[c.start..c.end].join(" ");
                self.store
                    .phrase(&key)
                    .map(<[f32]>::to_vec)
                    .ok_or_else(|| Error::MissingVector(format!("phrase {key:?}")))
            }
        }
    }

    /// Best row and score for every candidate, in candidate order.
    pub fn score_sentence(&self, s: &Sentence) -> Result<Vec<ScoredCandidate>> {
        let forms = match self.cfg.candidate_encoding {
            CandidateEncoding::Isolated => s.lower_forms(),
            CandidateEncoding::Contextual => Vec::new(),
        };
        ngram_spans(s.len(), self.cfg.n_max)
            .into_iter()
            .map(|c| {
                let v = self.encode(s, c, &forms)?;
                let nv = norm(&v);
                let mut best = ScoredCandidate {
                    span: c,
                    score: f64::NEG_INFINITY,
                    row: 0,
                };
                for (i, (row, &nr)) in self.table.rows.iter().zip(&self.row_norms).enumerate() {
                    let score = cosine_with_norms(&row.vector, nr, &v, nv);
                    if score > best.score {
                        best.score = score;
                        best.row = i;
                    }
                }
                Ok(best)
            })
            .collect()
    }

    /// Applies a threshold and the span-selection mode to scored candidates.
    pub fn select(&self, scored: &[ScoredCandidate], tau: f64) -> Vec<PredictedSpan> {
        let to_pred = |c: &ScoredCandidate| PredictedSpan {
            span: Span::new(c.span.start, c.span.end, SpanLabel::Skill),
            score: c.score,
            skill_id: self.table.rows[c.row].skill_id.clone(),
        };
        match self.cfg.mode {
            MatchMode::Single => {
                let mut best: Option<&ScoredCandidate> = None;
                for c in scored {
                    if best.is_none_or(|b| c.score > b.score) {
                        best = Some(c);
                    }
                }
                best.filter(|b| b.score > tau).map(to_pred).into_iter().collect()
            }
            MatchMode::Multi => {
                let mut above: Vec<&ScoredCandidate> = scored.iter().filter(|c| c.score > tau).collect();
                above.sort_by(|a, b| {
                    b.score
                        .total_cmp(&a.score)
                        .then(a.span.start.cmp(&b.span.start))
                        .then(a.span.len().cmp(&b.span.len()))
                });
                let mut chosen: Vec<&ScoredCandidate> = Vec::new();
                for c in above {
                    if chosen.iter().all(|k| !k.span.overlaps(&c.span)) {
                        chosen.push(c);
                    }
                }
                chosen.sort_by_key(|c| c.span.start);
                chosen.into_iter().map(to_pred).collect()
            }
        }
    }

    pub fn match_sentence(&self, s: &Sentence) -> Result<Vec<PredictedSpan>> {
        Ok(self.select(&self.score_sentence(s)?, self.cfg.tau))
    }

    fn score_corpus(&self, d: &Dataset) -> Result<Vec<Vec<ScoredCandidate>>> {
        d.sentences.par_iter().map(|s| self.score_sentence(s)).collect()
    }

    fn predictions_at(&self, d: &Dataset, scored: &[Vec<ScoredCandidate>], tau: f64, method: &str) -> Predictions {
        let sentences = d
            .sentences
            .iter()
            .zip(scored)
            .map(|(s, sc)| SentencePrediction {
                id: s.id.clone(),
                spans: self.select(sc, tau).iter().map(PredSpan::from).collect(),
            })
            .collect();
        Predictions::new(method, sentences)
    }

    pub fn match_corpus(&self, d: &Dataset) -> Result<Predictions> {
        let scored = self.score_corpus(d)?;
        Ok(self.predictions_at(d, &scored, self.cfg.tau, &self.table.method.to_string()))
    }

    /// One evaluation per threshold. Candidates are scored once and re-selected
    /// for each `tau`.
    pub fn sweep(&self, d: &Dataset, taus: &[f64], gold: &Dataset) -> Result<Vec<SweepRow>> {
        if taus.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Invalid("thresholds must be sorted ascending".into()));
        }
        if let Some(t) = taus.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::Invalid(format!("tau {t} is outside [0, 1]")));
        }
        let scored = self.score_corpus(d)?;
        taus.iter()
            .map(|&tau| {
                let preds = self.predictions_at(d, &scored, tau, &self.table.method.to_string());
                Ok(SweepRow {
                    tau,
                    strict: evaluate_strict(&preds, gold)?,
                    loose: evaluate_loose(&preds, gold)?,
                    predicted_spans: preds.span_count(),
                    sentences_with_predictions: preds.sentences_with_spans(),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau: f64,
    pub strict: EvalReport,
    pub loose: EvalReport,
    pub predicted_spans: usize,
    pub sentences_with_predictions: usize,
}

pub fn match_sentence(
    s: &Sentence,
    table: &SkillRepTable,
    store: &EmbeddingStore,
    cfg: &MatchConfig,
) -> Result<Vec<PredictedSpan>> {
    Matcher::new(table, store, *cfg)?.match_sentence(s)
}

pub fn match_corpus(
    d: &Dataset,
    table: &SkillRepTable,
    store: &EmbeddingStore,
    cfg: &MatchConfig,
) -> Result<Predictions> {
    Matcher::new(table, store, *cfg)?.match_corpus(d)
}

pub fn sweep(
    d: &Dataset,
    table: &SkillRepTable,
    store: &EmbeddingStore,
    cfg: &MatchConfig,
    taus: &[f64],
    gold: &Dataset,
) -> Result<Vec<SweepRow>> {
    Matcher::new(table, store, *cfg)?.sweep(d, taus, gold)
}

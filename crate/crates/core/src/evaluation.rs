//! Span-level precision, recall and F1.
//!
//! Strict: a prediction is a true positive when a gold span has the same start,
//! end and label (matched one to one). Loose: a prediction counts toward
//! precision when it overlaps any gold span with the same label, and a gold
//! span counts toward recall when any same-label prediction overlaps it. The
//! two loose counts are kept separately, so one prediction covering two gold
//! spans gives one precision hit and two recall hits.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Span};
use crate::error::{Error, Result};
use crate::predictions::Predictions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Strict,
    Loose,
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalMode::Strict => "strict",
            EvalMode::Loose => "loose",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    /// Predictions credited as correct (precision numerator).
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// Gold spans credited as found (recall numerator); equals `tp` in strict mode.
    pub tp_recall: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl EvalReport {
    pub fn from_counts(mode: EvalMode, tp: usize, fp: usize, tp_recall: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp_recall, tp_recall + fn_);
        // harmonic mean of tp/(tp+fp) and tp_recall/(tp_recall+fn) as one ratio
        let num = 2 * tp as u128 * tp_recall as u128;
        let den = tp as u128 * (tp_recall + fn_) as u128 + (tp + fp) as u128 * tp_recall as u128;
        let f1 = if num == 0 { 0.0 } else { num as f64 / den as f64 };
        EvalReport {
            mode,
            tp,
            fp,
            fn_,
            tp_recall,
            precision,
            recall,
            f1,
        }
    }

    /// Sums the counts of two shards of the same mode.
    pub fn merge(&self, other: &EvalReport) -> EvalReport {
        debug_assert_eq!(self.mode, other.mode);
        EvalReport::from_counts(
            self.mode,
            self.tp + other.tp,
            self.fp + other.fp,
            self.tp_recall + other.tp_recall,
            self.fn_ + other.fn_,
        )
    }
}

/// Aligned plain-text table, scores in percent.
pub fn format_table(reports: &[EvalReport]) -> String {
    let mut out = format!(
        "{:<7} {:>6} {:>6} {:>6} {:>9} {:>8} {:>8} {:>8}\n",
        "mode", "tp", "fp", "fn", "tp(rec)", "P", "R", "F1"
    );
    for r in reports {
        out.push_str(&format!(
            "{:<7} {:>6} {:>6} {:>6} {:>9} {:>8.2} {:>8.2} {:>8.2}\n",
            r.mode.to_string(),
            r.tp,
            r.fp,
            r.fn_,
            r.tp_recall,
            r.precision * 100.0,
            r.recall * 100.0,
            r.f1 * 100.0
        ));
    }
    out
}

/// Pairs predicted and gold spans per sentence id.
fn align(pred: &Predictions, gold: &Dataset) -> Result<Vec<(Vec<Span>, Vec<Span>)>> {
    let mut by_id: HashMap<&str, &crate::predictions::SentencePrediction> = HashMap::new();
    for p in &pred.sentences {
        if by_id.insert(p.id.as_str(), p).is_some() {
            return Err(Error::IdMismatch(format!("sentence {:?} predicted twice", p.id)));
        }
    }
    let mut pairs = Vec::with_capacity(gold.sentences.len());
    for s in &gold.sentences {
        let p = by_id
            .remove(s.id.as_str())
            .ok_or_else(|| Error::IdMismatch(format!("no prediction for gold sentence {:?}", s.id)))?;
        let spans = p.spans();
        if let Some(bad) = spans.iter().find(|sp| sp.start >= sp.end || sp.end > s.len()) {
            return Err(Error::SpanOutOfBounds {
                start: bad.start,
                end: bad.end,
                len: s.len(),
            });
        }
        pairs.push((spans, s.gold_spans()));
    }
    if let Some(extra) = by_id.keys().next() {
        return Err(Error::IdMismatch(format!(
            "prediction for {extra:?} which is not in the gold data"
        )));
    }
    Ok(pairs)
}

fn strict_counts(pred: &[Span], gold: &[Span]) -> (usize, usize, usize) {
    let mut used = vec![false; gold.len()];
    let mut tp = 0;
    for p in pred {
        if let Some(i) = (0..gold.len()).find(|&i| !used[i] && gold[i] == *p) {
            used[i] = true;
            tp += 1;
        }
    }
    (tp, pred.len() - tp, gold.len() - tp)
}

fn loose_counts(pred: &[Span], gold: &[Span]) -> (usize, usize, usize, usize) {
    let hit = |a: &Span, b: &Span| a.label == b.label && a.overlaps(b);
    let tp_p = pred.iter().filter(|p| gold.iter().any(|g| hit(p, g))).count();
    let tp_r = gold.iter().filter(|g| pred.iter().any(|p| hit(p, g))).count();
    (tp_p, pred.len() - tp_p, tp_r, gold.len() - tp_r)
}

pub fn evaluate_strict(pred: &Predictions, gold: &Dataset) -> Result<EvalReport> {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (p, g) in align(pred, gold)? {
        let (t, f, n) = strict_counts(&p, &g);
        tp += t;
        fp += f;
        fn_ += n;
    }
    Ok(EvalReport::from_counts(EvalMode::Strict, tp, fp, tp, fn_))
}

pub fn evaluate_loose(pred: &Predictions, gold: &Dataset) -> Result<EvalReport> {
    let (mut tp, mut fp, mut tp_r, mut fn_) = (0, 0, 0, 0);
    for (p, g) in align(pred, gold)? {
        let (a, b, c, d) = loose_counts(&p, &g);
        tp += a;
        fp += b;
        tp_r += c;
        fn_ += d;
    }
    Ok(EvalReport::from_counts(EvalMode::Loose, tp, fp, tp_r, fn_))
}

//! Per-sentence span predictions and their JSON-lines file format.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{bio_from_spans, BioTag, Dataset, Span, SpanLabel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredSpan {
    pub start: usize,
    pub end: usize,
    pub label: SpanLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skill_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl PredSpan {
    pub fn span(&self) -> Span {
        Span::new(self.start, self.end, self.label)
    }
}

impl From<Span> for PredSpan {
    fn from(s: Span) -> Self {
        PredSpan {
            start: s.start,
            end: s.end,
            label: s.label,
            skill_id: None,
            score: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentencePrediction {
    pub id: String,
    pub spans: Vec<PredSpan>,
}

impl SentencePrediction {
    pub fn spans(&self) -> Vec<Span> {
        self.spans.iter().map(PredSpan::span).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub method: String,
    pub sentences: Vec<SentencePrediction>,
}

impl Predictions {
    pub fn new(method: impl Into<String>, sentences: Vec<SentencePrediction>) -> Self {
        Predictions {
            method: method.into(),
            sentences,
        }
    }

    /// Gold spans of a dataset, shaped as predictions.
    pub fn from_gold(dataset: &Dataset) -> Self {
        Predictions::new(
            "gold",
            dataset
                .sentences
                .iter()
                .map(|s| SentencePrediction {
                    id: s.id.clone(),
                    spans: s.gold_spans().into_iter().map(PredSpan::from).collect(),
                })
                .collect(),
        )
    }

    pub fn span_count(&self) -> usize {
        self.sentences.iter().map(|s| s.spans.len()).sum()
    }

    pub fn sentences_with_spans(&self) -> usize {
        self.sentences.iter().filter(|s| !s.spans.is_empty()).count()
    }

    /// BIO tags per sentence, aligned with `dataset`.
    pub fn to_bio(&self, dataset: &Dataset) -> Result<Vec<Vec<BioTag>>> {
        if self.sentences.len() != dataset.sentences.len() {
            return Err(Error::IdMismatch(format!(
                "{} predicted sentences for {} dataset sentences",
                self.sentences.len(),
                dataset.sentences.len()
            )));
        }
        self.sentences
            .iter()
            .zip(&dataset.sentences)
            .map(|(p, s)| {
                if p.id != s.id {
                    return Err(Error::IdMismatch(format!("{:?} vs {:?}", p.id, s.id)));
                }
                bio_from_spans(&p.spans(), s.len())
            })
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for s in &self.sentences {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n").map_err(|e| Error::io("<predictions>", e))?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_jsonl_string()).map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl<R: BufRead>(reader: R, method: &str) -> Result<Self> {
        let mut sentences = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<predictions>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let s: SentencePrediction = serde_json::from_str(&line).map_err(|e| Error::Parse {
                file: "<predictions>".into(),
                line: i + 1,
                message: e.to_string(),
            })?;
            sentences.push(s);
        }
        Ok(Predictions::new(method, sentences))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let method = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::read_jsonl(std::io::BufReader::new(file), &method)
    }
}

/// Greedy overlap resolution: longest first, then leftmost. Output is sorted
/// by start.
pub(crate) fn resolve_longest_leftmost<T>(mut matches: Vec<(usize, usize, T)>) -> Vec<(usize, usize, T)> {
    matches.sort_by(|a, b| (b.1 - b.0).cmp(&(a.1 - a.0)).then(a.0.cmp(&b.0)));
    let mut chosen: Vec<(usize, usize, T)> = Vec::new();
    for m in matches {
        if chosen.iter().all(|c| m.1 <= c.0 || c.1 <= m.0) {
            chosen.push(m);
        }
    }
    chosen.sort_by_key(|c| c.0);
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_format() {
        let p = Predictions::new(
            "exact",
            vec![
                SentencePrediction {
                    id: "a".into(),
                    spans: vec![PredSpan {
                        start: 1,
                        end: 3,
                        label: SpanLabel::Skill,
                        skill_id: Some("k".into()),
                        score: Some(0.5),
                    }],
                },
                SentencePrediction {
                    id: "b".into(),
                    spans: vec![],
                },
            ],
        );
        let text = p.to_jsonl_string();
        assert_eq!(
            text,
            "{\"id\":\"a\",\"spans\":[{\"start\":1,\"end\":3,\"label\":\"SKILL\",\"skill_id\":\"k\",\"score\":0.5}]}\n\
             {\"id\":\"b\",\"spans\":[]}\n"
        );
        let back = Predictions::read_jsonl(text.as_bytes(), "exact").unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn longest_then_leftmost() {
        let out = resolve_longest_leftmost(vec![(1, 2, 'a'), (0, 2, 'b'), (2, 4, 'c'), (1, 3, 'd')]);
        assert_eq!(out, vec![(0, 2, 'b'), (2, 4, 'c')]);
    }
}

//! Token inverse document frequency, `-ln(count / total)`, over lowercased
//! forms. Unseen tokens get the add-one value `-ln(1 / (total + 1))`.

use std::collections::HashMap;

use crate::corpus::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IdfTable {
    counts: HashMap<String, u64>,
    total: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdfValue {
    pub value: f64,
    /// False when the smoothed unseen-token value was used.
    pub seen: bool,
}

impl IdfTable {
    pub fn from_counts(counts: HashMap<String, u64>) -> Self {
        let total = counts.values().sum();
        IdfTable { counts, total }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, token: &str) -> u64 {
        self.counts.get(&token.to_lowercase()).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &HashMap<String, u64> {
        &self.counts
    }

    pub fn lookup(&self, token: &str) -> IdfValue {
        match self.counts.get(&token.to_lowercase()) {
            Some(&n) => IdfValue {
                value: -(n as f64 / self.total as f64).ln(),
                seen: true,
            },
            None => IdfValue {
                value: -(1.0 / (self.total as f64 + 1.0)).ln(),
                seen: false,
            },
        }
    }

    pub fn idf(&self, token: &str) -> f64 {
        self.lookup(token).value
    }

    /// Entries sorted by descending count, then token.
    pub fn sorted(&self) -> Vec<(&str, u64, f64)> {
        let mut rows: Vec<_> = self
            .counts
            .iter()
            .map(|(t, &n)| (t.as_str(), n, self.idf(t)))
            .collect();
        rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        rows
    }
}

pub fn compute_idf(corpus: &[&Dataset]) -> Result<IdfTable> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for d in corpus {
        for s in &d.sentences {
            for t in &s.tokens {
                *counts.entry(t.form.to_lowercase()).or_insert(0) += 1;
            }
        }
    }
    if counts.is_empty() {
        return Err(Error::Invalid("idf corpus has no tokens".into()));
    }
    Ok(IdfTable::from_counts(counts))
}

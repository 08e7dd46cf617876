//! Candidate n-gram spans.

use crate::corpus::Sentence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CandidateSpan {
    pub start: usize,
    pub end: usize,
}

impl CandidateSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &CandidateSpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// All contiguous spans of 1..=`n_max` tokens, ordered by start then length.
pub fn generate_ngrams(sentence: &Sentence, n_max: usize) -> Vec<CandidateSpan> {
    ngram_spans(sentence.len(), n_max)
}

pub fn ngram_spans(len: usize, n_max: usize) -> Vec<CandidateSpan> {
    let mut out = Vec::with_capacity(candidate_count(len, n_max));
    for start in 0..len {
        for n in 1..=n_max.min(len - start) {
            out.push(CandidateSpan {
                start,
                end: start + n,
            });
        }
    }
    out
}

/// Closed form of `sum_{k=1..min(n_max, len)} (len - k + 1)`.
pub fn candidate_count(len: usize, n_max: usize) -> usize {
    let k = n_max.min(len);
    k * (len + 1) - k * (k + 1) / 2
}

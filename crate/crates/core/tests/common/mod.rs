//! Synthetic corpora and brute-force reference implementations shared by the
//! integration tests. Nothing here calls the library's representation,
//! idf or matching code.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skillweak::corpus::bio_from_spans;
use skillweak::embeddings::{HashEmbedder, TokenKeying};
use skillweak::{Dataset, Sentence, SkillEntry, SkillInventory, Span, Split, Token};

pub const VOCAB: &[&str] = &[
    "java", "python", "manage", "staff", "project", "management", "team", "customer", "service", "data",
    "analysis", "write", "reports", "strong", "communication", "skills", "we", "need", "a", "the", "with",
    "and", "to", "develop", "software", "sales", "excel", "lead", "people", "build", "cloud", "systems",
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sentences of 3 to 14 tokens over [`VOCAB`], some capitalized, with at
/// most one random gold span each.
pub fn synthetic_corpus(name: &str, sentences: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let out = (0..sentences)
        .map(|i| {
            let len = r.random_range(3..=14);
            let forms: Vec<String> = (0..len)
                .map(|_| {
                    let w = VOCAB[r.random_range(0..VOCAB.len())];
                    if r.random_range(0..5) == 0 {
                        let mut c = w.chars();
                        let first = c.next().unwrap().to_ascii_uppercase();
                        format!("{first}{}", c.as_str())
                    } else {
                        w.to_string()
                    }
                })
                .collect();
            let spans = if r.random_range(0..2) == 0 {
                let l = r.random_range(1..=3.min(len));
                let s = r.random_range(0..=len - l);
                vec![Span::skill(s, s + l)]
            } else {
                vec![]
            };
            let tags = bio_from_spans(&spans, len).unwrap();
            let tokens = forms.into_iter().zip(tags).map(|(f, t)| Token::new(f).with_bio(t)).collect();
            Sentence::new(format!("{name}-{i}"), tokens)
        })
        .collect();
    Dataset::new(name, Split::Train, out).unwrap()
}

/// `n` skills: most are n-grams copied from the corpus (so they occur), a few
/// are random word sequences that may not.
pub fn synthetic_inventory(corpus: &Dataset, n: usize, seed: u64) -> SkillInventory {
    let mut r = rng(seed);
    let mut entries = Vec::new();
    let mut seen = std::collections::HashSet::new();
    while entries.len() < n {
        let phrase = if r.random_range(0..4) == 0 {
            let l = r.random_range(1..=3);
            (0..l).map(|_| VOCAB[r.random_range(0..VOCAB.len())]).collect::<Vec<_>>().join(" ")
        } else {
            let s = &corpus.sentences[r.random_range(0..corpus.sentences.len())];
            let l = r.random_range(1..=4.min(s.len()));
            let start = r.random_range(0..=s.len() - l);
            s.tokens[start..start + l].iter().map(|t| t.form.as_str()).collect::<Vec<_>>().join(" ")
        };
        if seen.insert(phrase.to_lowercase()) {
            entries.push(SkillEntry::new(format!("k{}", entries.len()), phrase).unwrap());
        }
    }
    SkillInventory::from_entries(entries, "synthetic")
}

/// Token vector straight from the hash provider, bypassing any store.
pub fn token_vector(h: &HashEmbedder, s: &Sentence, tid: usize, keying: TokenKeying) -> Vec<f32> {
    h.vector(&h.token_key(s, tid, keying))
}

/// idf by direct counting: `-ln(count / total)` over lowercased forms.
pub fn oracle_idf(corpus: &[&Dataset]) -> (BTreeMap<String, f64>, u64) {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut total = 0u64;
    for d in corpus {
        for s in &d.sentences {
            for t in &s.tokens {
                *counts.entry(t.form.to_lowercase()).or_default() += 1;
                total += 1;
            }
        }
    }
    let idf = counts
        .into_iter()
        .map(|(w, n)| (w, -((n as f64) / (total as f64)).ln()))
        .collect();
    (idf, total)
}

/// AOC (`idf = None`) or WSE rows, one `Option` per inventory entry (None
/// when the skill never occurs).
pub fn oracle_reps(
    inv: &SkillInventory,
    corpus: &[&Dataset],
    h: &HashEmbedder,
    keying: TokenKeying,
    idf: Option<&BTreeMap<String, f64>>,
) -> Vec<Option<Vec<f64>>> {
    inv.entries
        .iter()
        .map(|e| {
            let k = e.tokens.len();
            let mut occurrences: Vec<Vec<f64>> = Vec::new();
            for d in corpus {
                for s in &d.sentences {
                    let forms: Vec<String> = s.tokens.iter().map(|t| t.form.to_lowercase()).collect();
                    if forms.len() < k {
                        continue;
                    }
                    for start in 0..=forms.len() - k {
                        if forms[start..start + k] != e.tokens[..] {
                            continue;
                        }
                        let mut v = vec![0.0f64; h.dim];
                        for tid in start..start + k {
                            let w = idf.map_or(1.0, |m| m[&forms[tid]]);
                            let x = token_vector(h, s, tid, keying);
                            for j in 0..h.dim {
                                v[j] += w * x[j] as f64;
                            }
                        }
                        if idf.is_none() {
                            for x in &mut v {
                                *x /= k as f64;
                            }
                        }
                        occurrences.push(v);
                    }
                }
            }
            if occurrences.is_empty() {
                return None;
            }
            let mut mean = vec![0.0f64; h.dim];
            for o in &occurrences {
                for j in 0..h.dim {
                    mean[j] += o[j];
                }
            }
            Some(mean.into_iter().map(|x| x / occurrences.len() as f64).collect())
        })
        .collect()
}

/// Cosine with the same 64-bit accumulation order as a plain loop.
pub fn oracle_cos(a: &[f32], b: &[f32]) -> f64 {
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for i in 0..a.len() {
        dot += a[i] as f64 * b[i] as f64;
        na += a[i] as f64 * a[i] as f64;
        nb += b[i] as f64 * b[i] as f64;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

/// Mean of the token vectors of `start..end`, rounded to f32.
pub fn oracle_candidate(h: &HashEmbedder, s: &Sentence, start: usize, end: usize, keying: TokenKeying) -> Vec<f32> {
    let mut sum = vec![0.0f64; h.dim];
    for tid in start..end {
        let x = token_vector(h, s, tid, keying);
        for j in 0..h.dim {
            sum[j] += x[j] as f64;
        }
    }
    sum.into_iter().map(|x| (x / (end - start) as f64) as f32).collect()
}

/// Every (candidate, row) score: `(start, end, row, cosine)` in candidate
/// order (start ascending, then length), rows in table order.
pub fn oracle_scores(
    s: &Sentence,
    rows: &[Vec<f32>],
    h: &HashEmbedder,
    keying: TokenKeying,
    n_max: usize,
) -> Vec<(usize, usize, usize, f64)> {
    let mut out = Vec::new();
    for start in 0..s.len() {
        for end in start + 1..=(start + n_max).min(s.len()) {
            let c = oracle_candidate(h, s, start, end, keying);
            for (i, r) in rows.iter().enumerate() {
                out.push((start, end, i, oracle_cos(&c, r)));
            }
        }
    }
    out
}

/// Single-span selection over all (candidate, row) pairs: the first strict
/// maximum, emitted only when above `tau`.
pub fn oracle_single(scores: &[(usize, usize, usize, f64)], tau: f64) -> Option<(usize, usize, usize, f64)> {
    let mut best: Option<(usize, usize, usize, f64)> = None;
    for &x in scores {
        if best.is_none_or(|b| x.3 > b.3) {
            best = Some(x);
        }
    }
    best.filter(|b| b.3 > tau)
}

/// Multi-span selection: best row per candidate, then greedy by score
/// (earlier start, then shorter, on ties) without overlaps.
pub fn oracle_multi(scores: &[(usize, usize, usize, f64)], tau: f64) -> Vec<(usize, usize, usize, f64)> {
    let mut per_candidate: Vec<(usize, usize, usize, f64)> = Vec::new();
    for &x in scores {
        match per_candidate.last_mut() {
            Some(last) if last.0 == x.0 && last.1 == x.1 => {
                if x.3 > last.3 {
                    *last = x;
                }
            }
            _ => per_candidate.push(x),
        }
    }
    let mut above: Vec<_> = per_candidate.into_iter().filter(|x| x.3 > tau).collect();
    above.sort_by(|a, b| {
        b.3.partial_cmp(&a.3)
            .unwrap()
            .then(a.0.cmp(&b.0))
            .then((a.1 - a.0).cmp(&(b.1 - b.0)))
    });
    let mut chosen: Vec<(usize, usize, usize, f64)> = Vec::new();
    for x in above {
        if chosen.iter().all(|c| x.1 <= c.0 || c.1 <= x.0) {
            chosen.push(x);
        }
    }
    chosen.sort_by_key(|c| c.0);
    chosen
}

//! Skill inventory loading, phrase preprocessing and surface statistics.
//!
//! Skill files are either JSON lines (`{"id", "phrase", "upos"?, "lemmas"?}`)
//! or plain text with one phrase per line, ids assigned by line ordinal. The
//! optional `upos` and `lemmas` arrays are aligned to the *preprocessed*
//! tokens of the phrase.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Deserialize;

use crate::corpus::Upos;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SkillEntry {
    pub id: String,
    pub raw: String,
    pub tokens: Vec<String>,
    pub upos: Option<Vec<Upos>>,
    pub lemmas: Option<Vec<String>>,
}

impl SkillEntry {
    pub fn new(id: impl Into<String>, raw: impl Into<String>) -> Result<Self> {
        let raw = raw.into();
        let tokens = preprocess_skill(&raw)?;
        Ok(SkillEntry {
            id: id.into(),
            raw,
            tokens,
            upos: None,
            lemmas: None,
        })
    }

    /// The key under which this skill's phrase vector is stored.
    pub fn phrase(&self) -> String {
        self.tokens.join(" ")
    }
}

#[derive(Debug, Clone, Default)]
pub struct SkillInventory {
    pub entries: Vec<SkillEntry>,
    pub version: String,
    /// Rows whose token sequence repeated an earlier row.
    pub duplicates: usize,
    /// Rows that preprocessed to nothing.
    pub skipped: usize,
}

impl SkillInventory {
    /// De-duplicates by preprocessed token sequence; the first id wins.
    pub fn from_entries(entries: impl IntoIterator<Item = SkillEntry>, version: &str) -> Self {
        let mut seen: HashMap<Vec<String>, ()> = HashMap::new();
        let mut inv = SkillInventory {
            version: version.to_string(),
            ..Default::default()
        };
        for e in entries {
            if seen.insert(e.tokens.clone(), ()).is_some() {
                inv.duplicates += 1;
            } else {
                inv.entries.push(e);
            }
        }
        inv
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_len(&self) -> usize {
        self.entries.iter().map(|e| e.tokens.len()).max().unwrap_or(0)
    }

    pub fn has_upos(&self) -> bool {
        !self.entries.is_empty() && self.entries.iter().all(|e| e.upos.is_some())
    }

    pub fn has_lemmas(&self) -> bool {
        !self.entries.is_empty() && self.entries.iter().all(|e| e.lemmas.is_some())
    }
}

/// Strips bracketed text, drops punctuation-only tokens, lowercases and splits
/// on whitespace.
///
/// `(...)` and `[...]` are removed with their contents (nesting allowed); an
/// unclosed opening bracket removes everything after it and a stray closing
/// bracket is dropped.
pub fn preprocess_skill(raw: &str) -> Result<Vec<String>> {
    let mut kept = String::with_capacity(raw.len());
    let mut depth = 0usize;
    for c in raw.chars() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth = depth.saturating_sub(1),
            _ if depth == 0 => kept.push(c),
            _ => {}
        }
    }
    let tokens: Vec<String> = kept
        .split_whitespace()
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .map(str::to_lowercase)
        .collect();
    if tokens.is_empty() {
        Err(Error::EmptySkill(raw.to_string()))
    } else {
        Ok(tokens)
    }
}

#[derive(Deserialize)]
struct SkillRow {
    id: String,
    phrase: String,
    #[serde(default)]
    upos: Option<Vec<String>>,
    #[serde(default)]
    lemmas: Option<Vec<String>>,
}

pub fn load_skills(path: impl AsRef<Path>) -> Result<SkillInventory> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let version = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_skills_str(&text, &path.display().to_string(), &version)
}

pub fn parse_skills_str(text: &str, source: &str, version: &str) -> Result<SkillInventory> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    if lines.is_empty() {
        return Err(Error::Invalid(format!("skill file {source} is empty")));
    }
    let jsonl = lines[0].1.starts_with('{');
    let parse_err = |line: usize, message: String| Error::Parse {
        file: source.to_string(),
        line,
        message,
    };

    let mut entries = Vec::with_capacity(lines.len());
    let mut skipped = 0;
    for (ordinal, (lineno, line)) in lines.into_iter().enumerate() {
        let row = if jsonl {
            serde_json::from_str::<SkillRow>(line).map_err(|e| parse_err(lineno, e.to_string()))?
        } else {
            SkillRow {
                id: ordinal.to_string(),
                phrase: line.to_string(),
                upos: None,
                lemmas: None,
            }
        };
        let mut entry = match SkillEntry::new(row.id, row.phrase) {
            Ok(e) => e,
            Err(Error::EmptySkill(raw)) => {
                log::warn!("{source}:{lineno}: skill {raw:?} is empty after preprocessing, skipped");
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        if let Some(tags) = row.upos {
            if tags.len() != entry.tokens.len() {
                return Err(parse_err(
                    lineno,
                    format!(
                        "{} UPOS tags for {} tokens {:?}",
                        tags.len(),
                        entry.tokens.len(),
                        entry.tokens
                    ),
                ));
            }
            let tags = tags
                .iter()
                .map(|t| t.parse::<Upos>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|m| parse_err(lineno, m))?;
            entry.upos = Some(tags);
        }
        if let Some(lemmas) = row.lemmas {
            if lemmas.len() != entry.tokens.len() {
                return Err(parse_err(
                    lineno,
                    format!("{} lemmas for {} tokens", lemmas.len(), entry.tokens.len()),
                ));
            }
            entry.lemmas = Some(lemmas.iter().map(|l| l.to_lowercase()).collect());
        }
        entries.push(entry);
    }
    let mut inv = SkillInventory::from_entries(entries, version);
    inv.skipped = skipped;
    if inv.is_empty() {
        return Err(Error::Invalid(format!("skill file {source} has no usable phrases")));
    }
    Ok(inv)
}

/// Surface statistics of an inventory.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    pub entries: usize,
    pub length_histogram: BTreeMap<usize, usize>,
    /// Frequency tables for n = 1, 2, 3 (index n - 1).
    pub ngram_freq: [BTreeMap<Vec<String>, usize>; 3],
    /// Whole-phrase POS sequences; present when requested.
    pub pos_seq_freq: Option<BTreeMap<Vec<Upos>, usize>>,
}

impl StatsReport {
    /// Most common phrase length; the shorter length wins a tie.
    pub fn length_mode(&self) -> usize {
        let mut best = (0, 0);
        for (&len, &count) in &self.length_histogram {
            if count > best.1 {
                best = (len, count);
            }
        }
        best.0
    }

    /// Lower median of the phrase-length distribution.
    pub fn length_median(&self) -> usize {
        let target = (self.entries.saturating_sub(1)) / 2;
        let mut seen = 0;
        for (&len, &count) in &self.length_histogram {
            seen += count;
            if seen > target {
                return len;
            }
        }
        0
    }

    pub fn top_ngrams(&self, n: usize, k: usize) -> Vec<(Vec<String>, usize)> {
        top_k(&self.ngram_freq[n - 1], k)
    }

    pub fn top_pos_sequences(&self, k: usize) -> Option<Vec<(Vec<Upos>, usize)>> {
        self.pos_seq_freq.as_ref().map(|m| top_k(m, k))
    }
}

/// Entries by descending count, ties in key order.
pub fn top_k<K: Ord + Clone>(freq: &BTreeMap<K, usize>, k: usize) -> Vec<(K, usize)> {
    let mut items: Vec<(K, usize)> = freq.iter().map(|(k, &c)| (k.clone(), c)).collect();
    items.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    items.truncate(k);
    items
}

pub fn compute_stats(inv: &SkillInventory, with_pos: bool) -> Result<StatsReport> {
    if inv.is_empty() {
        return Err(Error::Invalid("cannot compute statistics of an empty inventory".into()));
    }
    if with_pos && !inv.has_upos() {
        return Err(Error::MissingAnnotation(
            "POS statistics requested but the inventory has no UPOS tags".into(),
        ));
    }
    let mut report = StatsReport {
        entries: inv.len(),
        length_histogram: BTreeMap::new(),
        ngram_freq: Default::default(),
        pos_seq_freq: with_pos.then(BTreeMap::new),
    };
    for e in &inv.entries {
        *report.length_histogram.entry(e.tokens.len()).or_insert(0) += 1;
        for n in 1..=3 {
            for gram in e.tokens.windows(n) {
                *report.ngram_freq[n - 1].entry(gram.to_vec()).or_insert(0) += 1;
            }
        }
        if let (Some(freq), Some(upos)) = (report.pos_seq_freq.as_mut(), e.upos.as_ref()) {
            *freq.entry(upos.clone()).or_insert(0) += 1;
        }
    }
    Ok(report)
}

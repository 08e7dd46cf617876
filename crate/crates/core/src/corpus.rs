//! Tokenized, BIO-annotated job-posting corpora.
//!
//! Files are CoNLL-like: one token per line, TAB-separated columns, one blank
//! line between sentences, and `# ` comment lines (a `# id = <id>` comment names
//! the following sentence; unnamed sentences get `<dataset name>-<index>`).
//! The column layout is detected per sentence from the column count:
//!
//! | columns | layout                      |
//! |---------|-----------------------------|
//! | 1       | FORM                        |
//! | 2       | FORM LABEL                  |
//! | 3       | FORM UPOS LABEL             |
//! | 4       | FORM LEMMA UPOS LABEL       |
//!
//! Orphan `I-` tags (following `O`, a different label, or the sentence start)
//! are promoted to `B-` and counted in [`Dataset::repaired_labels`].

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The 17 Universal Dependencies part-of-speech tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Upos {
    Adj,
    Adp,
    Adv,
    Aux,
    Cconj,
    Det,
    Intj,
    Noun,
    Num,
    Part,
    Pron,
    Propn,
    Punct,
    Sconj,
    Sym,
    Verb,
    X,
}

impl Upos {
    pub const ALL: [Upos; 17] = [
        Upos::Adj,
        Upos::Adp,
        Upos::Adv,
        Upos::Aux,
        Upos::Cconj,
        Upos::Det,
        Upos::Intj,
        Upos::Noun,
        Upos::Num,
        Upos::Part,
        Upos::Pron,
        Upos::Propn,
        Upos::Punct,
        Upos::Sconj,
        Upos::Sym,
        Upos::Verb,
        Upos::X,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Upos::Adj => "ADJ",
            Upos::Adp => "ADP",
            Upos::Adv => "ADV",
            Upos::Aux => "AUX",
            Upos::Cconj => "CCONJ",
            Upos::Det => "DET",
            Upos::Intj => "INTJ",
            Upos::Noun => "NOUN",
            Upos::Num => "NUM",
            Upos::Part => "PART",
            Upos::Pron => "PRON",
            Upos::Propn => "PROPN",
            Upos::Punct => "PUNCT",
            Upos::Sconj => "SCONJ",
            Upos::Sym => "SYM",
            Upos::Verb => "VERB",
            Upos::X => "X",
        }
    }
}

impl fmt::Display for Upos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Upos {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Upos::ALL
            .iter()
            .copied()
            .find(|u| u.as_str() == s)
            .ok_or_else(|| format!("unknown UPOS tag {s:?}"))
    }
}

/// Renders a POS sequence as `VERB-NOUN`.
pub fn pos_sequence_string(seq: &[Upos]) -> String {
    seq.iter()
        .map(|u| u.as_str())
        .collect::<Vec<_>>()
        .join("-")
}

/// Span label. `KNOWLEDGE` only exists before [`simplify_labels`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SpanLabel {
    Skill,
    Knowledge,
}

impl SpanLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SpanLabel::Skill => "SKILL",
            SpanLabel::Knowledge => "KNOWLEDGE",
        }
    }
}

impl fmt::Display for SpanLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BioTag {
    Outside,
    Begin(SpanLabel),
    Inside(SpanLabel),
}

impl fmt::Display for BioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BioTag::Outside => f.write_str("O"),
            BioTag::Begin(l) => write!(f, "B-{l}"),
            BioTag::Inside(l) => write!(f, "I-{l}"),
        }
    }
}

impl FromStr for BioTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let label = |rest: &str| match rest {
            "SKILL" => Ok(SpanLabel::Skill),
            "KNOWLEDGE" => Ok(SpanLabel::Knowledge),
            _ => Err(format!("unknown label {s:?}")),
        };
        match s {
            "O" => Ok(BioTag::Outside),
            _ if s.starts_with("B-") => label(&s[2..]).map(BioTag::Begin),
            _ if s.starts_with("I-") => label(&s[2..]).map(BioTag::Inside),
            _ => Err(format!("unknown label {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub form: String,
    pub lemma: Option<String>,
    pub upos: Option<Upos>,
    pub bio: Option<BioTag>,
}

impl Token {
    pub fn new(form: impl Into<String>) -> Self {
        Token {
            form: form.into(),
            lemma: None,
            upos: None,
            bio: None,
        }
    }

    pub fn with_bio(mut self, bio: BioTag) -> Self {
        self.bio = Some(bio);
        self
    }

    pub fn with_upos(mut self, upos: Upos) -> Self {
        self.upos = Some(upos);
        self
    }

    pub fn with_lemma(mut self, lemma: impl Into<String>) -> Self {
        self.lemma = Some(lemma.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub id: String,
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(id: impl Into<String>, tokens: Vec<Token>) -> Self {
        Sentence {
            id: id.into(),
            tokens,
        }
    }

    /// Builds an unannotated sentence from whitespace-separated text.
    pub fn from_text(id: impl Into<String>, text: &str) -> Self {
        Sentence::new(id, text.split_whitespace().map(Token::new).collect())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Lowercased token forms.
    pub fn lower_forms(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.form.to_lowercase()).collect()
    }

    pub fn lower_lemmas(&self) -> Option<Vec<String>> {
        self.tokens
            .iter()
            .map(|t| t.lemma.as_ref().map(|l| l.to_lowercase()))
            .collect()
    }

    pub fn upos(&self) -> Option<Vec<Upos>> {
        self.tokens.iter().map(|t| t.upos).collect()
    }

    /// Gold BIO tags, `O` where a token carries none.
    pub fn tags(&self) -> Vec<BioTag> {
        self.tokens
            .iter()
            .map(|t| t.bio.unwrap_or(BioTag::Outside))
            .collect()
    }

    pub fn has_gold(&self) -> bool {
        self.tokens.iter().all(|t| t.bio.is_some())
    }

    pub fn gold_spans(&self) -> Vec<Span> {
        spans_from_bio(&self.tags())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    /// Guesses the split from a file name (`test`, then `dev`/`val`, else train).
    pub fn from_file_name(name: &str) -> Split {
        let name = name.to_lowercase();
        if name.contains("test") {
            Split::Test
        } else if name.contains("dev") || name.contains("val") {
            Split::Dev
        } else {
            Split::Train
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub split: Split,
    pub sentences: Vec<Sentence>,
    /// Orphan `I-` tags promoted to `B-` while parsing.
    pub repaired_labels: usize,
}

impl Dataset {
    /// Builds a dataset, rejecting duplicate sentence ids.
    pub fn new(name: impl Into<String>, split: Split, sentences: Vec<Sentence>) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &sentences {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::Invalid(format!("duplicate sentence id {:?}", s.id)));
            }
        }
        Ok(Dataset {
            name: name.into(),
            split,
            sentences,
            repaired_labels: 0,
        })
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    pub fn has_lemmas(&self) -> bool {
        self.sentences
            .iter()
            .all(|s| s.tokens.iter().all(|t| t.lemma.is_some()))
    }

    pub fn has_upos(&self) -> bool {
        self.sentences
            .iter()
            .all(|s| s.tokens.iter().all(|t| t.upos.is_some()))
    }

    pub fn stats(&self) -> DatasetStats {
        let spans: Vec<usize> = self
            .sentences
            .iter()
            .flat_map(|s| s.gold_spans())
            .map(|sp| sp.len())
            .collect();
        let span_tokens: usize = spans.iter().sum();
        DatasetStats {
            sentences: self.sentences.len(),
            tokens: self.token_count(),
            spans: spans.len(),
            avg_span_len: if spans.is_empty() {
                0.0
            } else {
                span_tokens as f64 / spans.len() as f64
            },
        }
    }

    /// POS sequences of the distinct gold span surface forms.
    pub fn gold_pos_sequences(&self) -> Result<BTreeMap<Vec<Upos>, usize>> {
        if !self.has_upos() {
            return Err(Error::MissingAnnotation(format!(
                "dataset {} has no UPOS column",
                self.name
            )));
        }
        let mut seen = HashSet::new();
        let mut freq = BTreeMap::new();
        for s in &self.sentences {
            let forms = s.lower_forms();
            for span in s.gold_spans() {
                if seen.insert(forms[span.start..span.end].to_vec()) {
                    let seq: Vec<Upos> = s.tokens[span.start..span.end]
                        .iter()
                        .filter_map(|t| t.upos)
                        .collect();
                    *freq.entry(seq).or_insert(0) += 1;
                }
            }
        }
        Ok(freq)
    }
}

/// Surface counts of a dataset split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub sentences: usize,
    pub tokens: usize,
    pub spans: usize,
    pub avg_span_len: f64,
}

/// Half-open token interval `[start, end)` with a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub label: SpanLabel,
}

impl Span {
    pub fn new(start: usize, end: usize, label: SpanLabel) -> Self {
        debug_assert!(start < end);
        Span { start, end, label }
    }

    pub fn skill(start: usize, end: usize) -> Self {
        Span::new(start, end, SpanLabel::Skill)
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// One span per maximal `B I*` run, in order of appearance.
///
/// An `I-` that cannot continue the current run opens a new span, so the
/// function is total on arbitrary tag sequences.
pub fn spans_from_bio(tags: &[BioTag]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, SpanLabel)> = None;
    for (i, tag) in tags.iter().enumerate() {
        match *tag {
            BioTag::Outside => {
                if let Some((start, label)) = open.take() {
                    spans.push(Span::new(start, i, label));
                }
            }
            BioTag::Begin(label) => {
                if let Some((start, l)) = open.take() {
                    spans.push(Span::new(start, i, l));
                }
                open = Some((i, label));
            }
            BioTag::Inside(label) => match open {
                Some((_, l)) if l == label => {}
                _ => {
                    if let Some((start, l)) = open.take() {
                        spans.push(Span::new(start, i, l));
                    }
                    open = Some((i, label));
                }
            },
        }
    }
    if let Some((start, label)) = open {
        spans.push(Span::new(start, tags.len(), label));
    }
    spans
}

pub fn bio_from_spans(spans: &[Span], len: usize) -> Result<Vec<BioTag>> {
    let mut tags = vec![BioTag::Outside; len];
    let mut sorted: Vec<&Span> = spans.iter().collect();
    sorted.sort_by_key(|s| (s.start, s.end));
    for pair in sorted.windows(2) {
        if pair[0].overlaps(pair[1]) {
            return Err(Error::OverlappingSpans(
                pair[0].start,
                pair[0].end,
                pair[1].start,
                pair[1].end,
            ));
        }
    }
    for span in sorted {
        if span.start >= span.end || span.end > len {
            return Err(Error::SpanOutOfBounds {
                start: span.start,
                end: span.end,
                len,
            });
        }
        tags[span.start] = BioTag::Begin(span.label);
        for tag in &mut tags[span.start + 1..span.end] {
            *tag = BioTag::Inside(span.label);
        }
    }
    Ok(tags)
}

/// Promotes orphan `I-` tags to `B-`; returns the number of repairs.
pub fn repair_bio(tags: &mut [BioTag]) -> usize {
    let mut repairs = 0;
    let mut prev = BioTag::Outside;
    for tag in tags.iter_mut() {
        if let BioTag::Inside(label) = *tag {
            let continues = matches!(prev, BioTag::Begin(l) | BioTag::Inside(l) if l == label);
            if !continues {
                *tag = BioTag::Begin(label);
                repairs += 1;
            }
        }
        prev = *tag;
    }
    repairs
}

/// Rewrites every `KNOWLEDGE` tag to `SKILL`, keeping the B/I prefix.
pub fn simplify_labels(dataset: &Dataset) -> Dataset {
    let mut out = dataset.clone();
    for sentence in &mut out.sentences {
        for token in &mut sentence.tokens {
            token.bio = token.bio.map(|tag| match tag {
                BioTag::Begin(_) => BioTag::Begin(SpanLabel::Skill),
                BioTag::Inside(_) => BioTag::Inside(SpanLabel::Skill),
                BioTag::Outside => BioTag::Outside,
            });
        }
    }
    out
}

pub fn parse_conll(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_conll_str(&text, &path.display().to_string(), &stem, Split::from_file_name(&stem))
}

/// Parses CoNLL text. `source` is only used in error messages.
pub fn parse_conll_str(text: &str, source: &str, name: &str, split: Split) -> Result<Dataset> {
    let err = |line: usize, message: String| Error::Parse {
        file: source.to_string(),
        line,
        message,
    };

    let mut sentences = Vec::new();
    let mut repaired = 0;
    let mut block: Vec<(usize, Vec<&str>)> = Vec::new();
    let mut pending_id: Option<String> = None;

    let mut flush = |block: &mut Vec<(usize, Vec<&str>)>,
                     pending_id: &mut Option<String>,
                     sentences: &mut Vec<Sentence>|
     -> Result<()> {
        if block.is_empty() {
            *pending_id = None;
            return Ok(());
        }
        let (first_line, first) = &block[0];
        let columns = first.len();
        if !(1..=4).contains(&columns) {
            return Err(err(*first_line, format!("expected 1-4 columns, found {columns}")));
        }
        let mut tokens = Vec::with_capacity(block.len());
        for (line, fields) in block.iter() {
            if fields.len() != columns {
                return Err(err(
                    *line,
                    format!(
                        "inconsistent column count: {} (sentence started with {columns})",
                        fields.len()
                    ),
                ));
            }
            let form = fields[0];
            if form.is_empty() || form.chars().any(char::is_whitespace) {
                return Err(err(*line, format!("invalid token form {form:?}")));
            }
            let mut token = Token::new(form);
            let upos_col = match columns {
                3 => Some(1),
                4 => Some(2),
                _ => None,
            };
            if columns == 4 {
                token.lemma = Some(fields[1].to_string());
            }
            if let Some(c) = upos_col {
                token.upos = Some(fields[c].parse().map_err(|m| err(*line, m))?);
            }
            if columns >= 2 {
                token.bio = Some(fields[columns - 1].parse().map_err(|m| err(*line, m))?);
            }
            tokens.push(token);
        }
        if columns >= 2 {
            let mut tags: Vec<BioTag> = tokens.iter().map(|t| t.bio.unwrap()).collect();
            let fixed = repair_bio(&mut tags);
            if fixed > 0 {
                log::warn!(
                    "{source}:{first_line}: promoted {fixed} orphan I- tag(s) to B-"
                );
                repaired += fixed;
                for (t, tag) in tokens.iter_mut().zip(tags) {
                    t.bio = Some(tag);
                }
            }
        }
        let id = pending_id
            .take()
            .unwrap_or_else(|| format!("{name}-{}", sentences.len()));
        sentences.push(Sentence::new(id, tokens));
        block.clear();
        Ok(())
    };

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            flush(&mut block, &mut pending_id, &mut sentences)?;
            continue;
        }
        if block.is_empty() && line.starts_with("# ") {
            if let Some(id) = line[2..].trim().strip_prefix("id =") {
                pending_id = Some(id.trim().to_string());
            }
            continue;
        }
        block.push((lineno, line.split('\t').collect()));
    }
    flush(&mut block, &mut pending_id, &mut sentences)?;

    let mut dataset = Dataset::new(name, split, sentences)?;
    dataset.repaired_labels = repaired;
    Ok(dataset)
}

/// Serializes a dataset back to CoNLL text, using the richest layout all
/// tokens support.
pub fn write_conll(dataset: &Dataset) -> String {
    let mut out = String::new();
    for s in &dataset.sentences {
        out.push_str(&format!("# id = {}\n", s.id));
        let lemmas = s.tokens.iter().all(|t| t.lemma.is_some());
        let upos = s.tokens.iter().all(|t| t.upos.is_some());
        let gold = s.has_gold();
        for t in &s.tokens {
            let mut fields = vec![t.form.clone()];
            if lemmas && upos {
                fields.push(t.lemma.clone().unwrap());
            }
            if upos {
                fields.push(t.upos.unwrap().to_string());
            }
            if gold || upos {
                fields.push(t.bio.unwrap_or(BioTag::Outside).to_string());
            }
            out.push_str(&fields.join("\t"));
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

//! Named span-labeling methods.
//!
//! Each method implements [`SpanLabeler`] and is registered in a
//! [`MethodRegistry`] under its name together with a factory that builds it
//! from [`MethodInputs`]. The built-in registry knows `exact`, `lemma`, `pos`,
//! `iso`, `aoc` and `wse`; callers can register more.

use std::collections::BTreeMap;

use crate::baselines::{PhraseLookup, PosPatterns};
use crate::corpus::Dataset;
use crate::embeddings::{build_aoc, build_iso, build_wse, compute_idf, EmbeddingStore, RepMethod, SkillRepTable};
use crate::error::{Error, Result};
use crate::matcher::{CandidateEncoding, MatchConfig, Matcher};
use crate::predictions::{Predictions, SentencePrediction};
use crate::taxonomy::SkillInventory;

pub trait SpanLabeler: Send + Sync {
    fn name(&self) -> &str;

    fn label(&self, dataset: &Dataset) -> Result<Predictions>;

    /// The skill representation table, for embedding-based methods.
    fn representation(&self) -> Option<&SkillRepTable> {
        None
    }
}

/// Everything a method factory may draw on.
#[derive(Clone)]
pub struct MethodInputs<'a> {
    pub inventory: &'a SkillInventory,
    /// Non-test splits used for contexts and idf counts.
    pub reference: Vec<&'a Dataset>,
    pub phrase_store: Option<&'a EmbeddingStore>,
    pub context_store: Option<&'a EmbeddingStore>,
    pub match_config: MatchConfig,
    pub pos_max_len: usize,
    pub pos_top_k: Option<usize>,
}

impl<'a> MethodInputs<'a> {
    pub fn new(inventory: &'a SkillInventory) -> Self {
        MethodInputs {
            inventory,
            reference: Vec::new(),
            phrase_store: None,
            context_store: None,
            match_config: MatchConfig::default(),
            pos_max_len: 4,
            pos_top_k: None,
        }
    }

    fn phrase_store(&self, method: &str) -> Result<&'a EmbeddingStore> {
        self.phrase_store
            .ok_or_else(|| Error::Invalid(format!("method {method} needs a phrase store")))
    }

    fn context_store(&self, method: &str) -> Result<&'a EmbeddingStore> {
        self.context_store
            .ok_or_else(|| Error::Invalid(format!("method {method} needs a contextual store")))
    }
}

/// Builds the representation table of an embedding method.
pub fn build_table(method: RepMethod, inputs: &MethodInputs<'_>) -> Result<SkillRepTable> {
    let name = method.to_string();
    match method {
        RepMethod::Iso => build_iso(inputs.inventory, inputs.phrase_store(&name)?),
        RepMethod::Aoc => {
            if inputs.reference.is_empty() {
                return Err(Error::Invalid("aoc needs at least one context split".into()));
            }
            build_aoc(
                inputs.inventory,
                inputs.context_store(&name)?,
                &inputs.reference,
                inputs.phrase_store,
            )
        }
        RepMethod::Wse => {
            let idf = compute_idf(&inputs.reference)?;
            build_wse(
                inputs.inventory,
                inputs.context_store(&name)?,
                &idf,
                &inputs.reference,
                inputs.phrase_store,
            )
        }
    }
}

struct ExactLabeler {
    lookup: PhraseLookup,
}

impl SpanLabeler for ExactLabeler {
    fn name(&self) -> &str {
        "exact"
    }

    fn label(&self, dataset: &Dataset) -> Result<Predictions> {
        Ok(Predictions::new(
            "exact",
            dataset
                .sentences
                .iter()
                .map(|s| SentencePrediction {
                    id: s.id.clone(),
                    spans: self.lookup.find(&s.lower_forms()),
                })
                .collect(),
        ))
    }
}

struct LemmaLabeler {
    lookup: PhraseLookup,
}

impl SpanLabeler for LemmaLabeler {
    fn name(&self) -> &str {
        "lemma"
    }

    fn label(&self, dataset: &Dataset) -> Result<Predictions> {
        let sentences = dataset
            .sentences
            .iter()
            .map(|s| {
                let lemmas = s.lower_lemmas().ok_or_else(|| {
                    Error::MissingAnnotation(format!("sentence {:?} has no lemma column", s.id))
                })?;
                Ok(SentencePrediction {
                    id: s.id.clone(),
                    spans: self.lookup.find(&lemmas),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Predictions::new("lemma", sentences))
    }
}

struct PosLabeler {
    patterns: PosPatterns,
}

impl SpanLabeler for PosLabeler {
    fn name(&self) -> &str {
        "pos"
    }

    fn label(&self, dataset: &Dataset) -> Result<Predictions> {
        self.patterns.predict(dataset)
    }
}

/// Cosine matching against an ISO, AOC or WSE table.
pub struct EmbeddingLabeler<'a> {
    name: String,
    table: SkillRepTable,
    store: &'a EmbeddingStore,
    cfg: MatchConfig,
}

impl<'a> EmbeddingLabeler<'a> {
    pub fn new(table: SkillRepTable, store: &'a EmbeddingStore, cfg: MatchConfig) -> Result<Self> {
        // fail early on dimension or store-kind problems
        Matcher::new(&table, store, cfg)?;
        Ok(EmbeddingLabeler {
            name: table.method.to_string(),
            table,
            store,
            cfg,
        })
    }

    pub fn matcher(&self) -> Matcher<'_> {
        Matcher::new(&self.table, self.store, self.cfg).expect("validated in new")
    }
}

impl SpanLabeler for EmbeddingLabeler<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn label(&self, dataset: &Dataset) -> Result<Predictions> {
        self.matcher().match_corpus(dataset)
    }

    fn representation(&self) -> Option<&SkillRepTable> {
        Some(&self.table)
    }
}

type Factory =
    Box<dyn for<'a> Fn(&MethodInputs<'a>) -> Result<Box<dyn SpanLabeler + 'a>> + Send + Sync>;

struct Registration {
    description: &'static str,
    factory: Factory,
}

#[derive(Default)]
pub struct MethodRegistry {
    methods: BTreeMap<String, Registration>,
}

impl MethodRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::new();
        r.register("exact", "exact token-sequence match against the inventory", |i| {
            Ok(Box::new(ExactLabeler {
                lookup: PhraseLookup::surface(i.inventory),
            }))
        });
        r.register("lemma", "lemma-sequence match against lemmatized skills", |i| {
            Ok(Box::new(LemmaLabeler {
                lookup: PhraseLookup::lemmas(i.inventory)?,
            }))
        });
        r.register("pos", "match n-grams whose POS sequence occurs in the inventory", |i| {
            Ok(Box::new(PosLabeler {
                patterns: PosPatterns::from_inventory(i.inventory, i.pos_max_len, i.pos_top_k)?,
            }))
        });
        for (name, method, description) in [
            ("iso", RepMethod::Iso, "cosine match against skills encoded in isolation"),
            ("aoc", RepMethod::Aoc, "cosine match against skills averaged over corpus contexts"),
            ("wse", RepMethod::Wse, "cosine match against idf-weighted span embeddings"),
        ] {
            r.register(name, description, move |i| {
                let table = build_table(method, i)?;
                let store = match i.match_config.candidate_encoding {
                    CandidateEncoding::Contextual => i.context_store(name)?,
                    CandidateEncoding::Isolated => i.phrase_store(name)?,
                };
                Ok(Box::new(EmbeddingLabeler::new(table, store, i.match_config)?))
            });
        }
        r
    }

    pub fn register<F>(&mut self, name: &str, description: &'static str, factory: F)
    where
        F: for<'a> Fn(&MethodInputs<'a>) -> Result<Box<dyn SpanLabeler + 'a>> + Send + Sync + 'static,
    {
        self.methods.insert(
            name.to_string(),
            Registration {
                description,
                factory: Box::new(factory),
            },
        );
    }

    pub fn names(&self) -> Vec<&str> {
        self.methods.keys().map(String::as_str).collect()
    }

    pub fn describe(&self) -> Vec<(&str, &str)> {
        self.methods
            .iter()
            .map(|(k, r)| (k.as_str(), r.description))
            .collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.methods.contains_key(name)
    }

    pub fn build<'a>(&self, name: &str, inputs: &MethodInputs<'a>) -> Result<Box<dyn SpanLabeler + 'a>> {
        let reg = self.methods.get(name).ok_or_else(|| Error::UnknownMethod {
            name: name.to_string(),
            available: self.names().join(", "),
        })?;
        (reg.factory)(inputs)
    }
}

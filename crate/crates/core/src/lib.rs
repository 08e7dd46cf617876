//! Weakly supervised skill-span extraction.
//!
//! Job-posting sentences are labeled by matching their n-grams against a skill
//! taxonomy, either on the surface (exact, lemma and POS-sequence baselines)
//! or by cosine similarity in embedding space against skill representations
//! built in isolation (ISO), averaged over corpus contexts (AOC) or as
//! idf-weighted span embeddings (WSE). Predictions are scored with strict and
//! loose span F1.

pub mod baselines;
pub mod candidates;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod matcher;
pub mod methods;
pub mod predictions;
pub mod taxonomy;

pub use corpus::{BioTag, Dataset, Sentence, Span, SpanLabel, Split, Token, Upos};
pub use error::{Error, Result};
pub use evaluation::{evaluate_loose, evaluate_strict, EvalMode, EvalReport};
pub use matcher::{CandidateEncoding, MatchConfig, MatchMode, Matcher};
pub use methods::{MethodInputs, MethodRegistry, SpanLabeler};
pub use predictions::{PredSpan, Predictions, SentencePrediction};
pub use taxonomy::{SkillEntry, SkillInventory};

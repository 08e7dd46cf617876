//! Embedding stores, idf weights and skill representation tables.

pub mod hash;
pub mod idf;
pub mod reps;
pub mod store;

pub use hash::{HashEmbedder, TokenKeying};
pub use idf::{compute_idf, IdfTable, IdfValue};
pub use reps::{build_aoc, build_iso, build_wse, embed_candidate, RepMethod, SkillRepTable, SkillRow};
pub use store::{EmbeddingStore, Pooling, StoreKey, StoreKind, StoreMeta};

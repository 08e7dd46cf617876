//! Deterministic stand-in for a language model.
//!
//! The vector of a key is drawn from a ChaCha8 stream seeded with
//! `SHA-256(seed_le || key)`. Each `u32` draw maps its top 24 bits linearly
//! onto `[-1, 1]`, so vectors are identical across runs and platforms.

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::store::{EmbeddingStore, Pooling, StoreKey, StoreKind};
use crate::corpus::{Dataset, Sentence};
use crate::error::Result;
use crate::taxonomy::SkillInventory;

/// What a token's hash key is built from in a contextual store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TokenKeying {
    /// The lowercased form: every occurrence of a word shares one vector.
    #[default]
    Form,
    /// Sentence id, token index and form: every occurrence differs.
    Position,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        HashEmbedder { dim, seed }
    }

    pub fn model_name(&self) -> String {
        format!("hash-chacha8-d{}-s{}", self.dim, self.seed)
    }

    pub fn vector(&self, key: &[u8]) -> Vec<f32> {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(key);
        let digest: [u8; 32] = hasher.finalize().into();
        let mut rng = ChaCha8Rng::from_seed(digest);
        (0..self.dim)
            .map(|_| {
                let bits = rng.next_u32() >> 8;
                (bits as f64 / ((1u32 << 24) - 1) as f64 * 2.0 - 1.0) as f32
            })
            .collect()
    }

    pub fn token_key(&self, sentence: &Sentence, tid: usize, keying: TokenKeying) -> Vec<u8> {
        let form = sentence.tokens[tid].form.to_lowercase();
        match keying {
            TokenKeying::Form => form.into_bytes(),
            TokenKeying::Position => format!("{}\u{1f}{tid}\u{1f}{form}", sentence.id).into_bytes(),
        }
    }

    /// Phrase store over the inventory's preprocessed phrases.
    pub fn phrase_store(&self, inv: &SkillInventory) -> Result<EmbeddingStore> {
        self.phrase_store_for(inv.entries.iter().map(|e| e.phrase()))
    }

    pub fn phrase_store_for(&self, phrases: impl IntoIterator<Item = String>) -> Result<EmbeddingStore> {
        let mut store = EmbeddingStore::new(self.dim, StoreKind::Phrase, Pooling::FirstSubword, self.model_name())?;
        for p in phrases {
            if store.phrase(&p).is_none() {
                let v = self.vector(p.as_bytes());
                store.push(StoreKey::Phrase(p), &v)?;
            }
        }
        Ok(store)
    }

    /// Contextual store covering every token of the given datasets.
    pub fn contextual_store(&self, datasets: &[&Dataset], keying: TokenKeying) -> Result<EmbeddingStore> {
        let mut store = EmbeddingStore::new(
            self.dim,
            StoreKind::ContextualTokens,
            Pooling::FirstSubword,
            self.model_name(),
        )?;
        for d in datasets {
            for s in &d.sentences {
                for tid in 0..s.len() {
                    let v = self.vector(&self.token_key(s, tid, keying));
                    store.push(
                        StoreKey::Token {
                            sid: s.id.clone(),
                            tid,
                        },
                        &v,
                    )?;
                }
            }
        }
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_bounded() {
        let h = HashEmbedder::new(128, 7);
        let a = h.vector(b"java");
        let b = h.vector(b"java");
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert_ne!(a, h.vector(b"python"));
        assert_ne!(a, HashEmbedder::new(128, 8).vector(b"java"));
    }

    #[test]
    fn frozen_values() {
        // guards against silent changes to the hashing or the stream
        let v = HashEmbedder::new(4, 0).vector(b"skill");
        let bits: Vec<u32> = v.iter().map(|x| x.to_bits()).collect();
        assert_eq!(bits, [3204784474, 3207419772, 1062472976, 3188221789]);
    }

    #[test]
    fn keying_modes() {
        let h = HashEmbedder::new(8, 1);
        let d = Dataset::new(
            "d",
            crate::corpus::Split::Train,
            vec![Sentence::from_text("a", "Java java"), Sentence::from_text("b", "java")],
        )
        .unwrap();
        let by_form = h.contextual_store(&[&d], TokenKeying::Form).unwrap();
        assert_eq!(by_form.token("a", 0), by_form.token("b", 0));
        assert_eq!(by_form.token("a", 1), by_form.token("b", 0));
        let by_pos = h.contextual_store(&[&d], TokenKeying::Position).unwrap();
        assert_ne!(by_pos.token("a", 0), by_pos.token("b", 0));
        assert!(by_pos.covers(&d.sentences[0]));
    }
}

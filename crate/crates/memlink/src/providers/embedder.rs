//! Reference embedder: hashed character-trigram counts, L2-normalized.
//!
//! Deterministic and dependency-free. Topically similar texts share many
//! trigrams and land close in cosine space, which is all the downstream
//! segmentation and retrieval logic needs for property tests.

use super::{Embedder, EmbeddingVector, ProviderError};

pub const DEFAULT_EMBEDDING_DIM: usize = 256;

/// Hashed character-trigram embedder.
#[derive(Debug, Clone)]
pub struct HashedTrigramEmbedder {
    dim: usize,
}

impl Default for HashedTrigramEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_EMBEDDING_DIM)
    }
}

impl HashedTrigramEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    fn embed_text(&self, text: &str) -> EmbeddingVector {
        let mut counts = vec![0.0_f64; self.dim];
        let chars: Vec<char> = text.to_lowercase().chars().collect();
        if chars.is_empty() {
            return EmbeddingVector::normalized(counts);
        }
        if chars.len() < 3 {
            let bucket = fnv1a(&chars) as usize % self.dim;
            counts[bucket] += 1.0;
        } else {
            for window in chars.windows(3) {
                let bucket = fnv1a(window) as usize % self.dim;
                counts[bucket] += 1.0;
            }
        }
        EmbeddingVector::normalized(counts)
    }
}

impl Embedder for HashedTrigramEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        Ok(texts.iter().map(|t| self.embed_text(t)).collect())
    }
}

// FNV-1a over the UTF-8 bytes of a char window. Fixed constants keep the
// bucketing identical across runs and platforms.
fn fnv1a(chars: &[char]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    let mut buf = [0u8; 4];
    for &c in chars {
        for &b in c.encode_utf8(&mut buf).as_bytes() {
            hash ^= u64::from(b);
            hash = hash.wrapping_mul(PRIME);
        }
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_texts_embed_identically() {
        let e = HashedTrigramEmbedder::default();
        let out = e.embed(&["a".into(), "a".into()]).unwrap();
        assert_eq!(out[0], out[1]);
    }

    #[test]
    fn vectors_are_unit_norm() {
        let e = HashedTrigramEmbedder::default();
        let v = e.embed_one("hello world").unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-9);
        assert_eq!(v.dim(), DEFAULT_EMBEDDING_DIM);
    }

    #[test]
    fn topical_overlap_beats_unrelated_text() {
        let e = HashedTrigramEmbedder::default();
        let base = e.embed_one("hiking in paris").unwrap();
        let near = e.embed_one("hiking in paris today").unwrap();
        let far = e.embed_one("stock market report").unwrap();
        assert!(base.cosine(&near) > base.cosine(&far));
    }

    #[test]
    fn empty_text_yields_basis_vector() {
        let e = HashedTrigramEmbedder::default();
        let v = e.embed_one("").unwrap();
        assert_eq!(v.values()[0], 1.0);
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn short_text_is_embeddable() {
        let e = HashedTrigramEmbedder::default();
        let v = e.embed_one("ab").unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-9);
    }
}

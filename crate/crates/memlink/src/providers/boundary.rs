//! Reference boundary scorer.
//!
//! The production signal is a model-internal attention score between adjacent
//! compressed messages; only its peak structure feeds downstream logic. The
//! reference implementation substitutes `1 - cosine` of adjacent compressed
//! message embeddings, which peaks at the same discourse transitions.

use std::sync::Arc;

use super::{BoundaryScorer, Embedder, ProviderError};

/// Scores adjacency dissimilarity with an embedder.
#[derive(Clone)]
pub struct EmbeddingBoundaryScorer {
    embedder: Arc<dyn Embedder>,
}

impl EmbeddingBoundaryScorer {
    pub fn new(embedder: Arc<dyn Embedder>) -> Self {
        Self { embedder }
    }
}

impl BoundaryScorer for EmbeddingBoundaryScorer {
    fn boundary_scores(&self, compressed_messages: &[String]) -> Result<Vec<f64>, ProviderError> {
        if compressed_messages.len() <= 1 {
            return Ok(Vec::new());
        }
        let vectors = self.embedder.embed(compressed_messages)?;
        Ok(vectors
            .windows(2)
            .map(|pair| 1.0 - pair[0].cosine(&pair[1]))
            .collect())
    }
}

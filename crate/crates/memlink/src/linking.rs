//! Segment links: cross-session chains of semantically related segments.
//!
//! Segments are processed in global order (session order, then in-session
//! order). Each one joins the most similar existing link when that similarity
//! strictly exceeds `tau2`, and otherwise starts a new link. Every segment
//! belongs to exactly one link.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::providers::EmbeddingVector;
use crate::segmentation::Segment;

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("similarity against an empty link")]
    EmptyLink,
}

/// An ordered chain of segment ids in processing order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentLink {
    pub link_id: String,
    pub segment_ids: Vec<String>,
}

/// Max cosine between `segment` and any member of `link`.
pub fn link_similarity(
    segment: &EmbeddingVector,
    link: &SegmentLink,
    segment_embeddings: &HashMap<String, EmbeddingVector>,
) -> Result<f64, LinkError> {
    if link.segment_ids.is_empty() {
        return Err(LinkError::EmptyLink);
    }
    Ok(link
        .segment_ids
        .iter()
        .map(|id| {
            segment.cosine(
                segment_embeddings
                    .get(id)
                    .expect("link member has an embedding"),
            )
        })
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Threads segments into links.
///
/// Appends to the argmax link when `max_L sim(g, L) > tau2` (strict); argmax
/// ties break toward the earliest-created link. Link ids are `L{ordinal}`,
/// 1-based, in creation order.
pub fn assign_links(segments: &[Segment], tau2: f64) -> Vec<SegmentLink> {
    let mut links: Vec<SegmentLink> = Vec::new();
    let mut embeddings: HashMap<String, EmbeddingVector> = HashMap::new();

    for segment in segments {
        embeddings.insert(segment.segment_id.clone(), segment.embedding.clone());

        let mut best_by_link = Vec::with_capacity(links.len());
        for link in &links {
            let sim = link_similarity(&segment.embedding, link, &embeddings)
                .expect("links are never empty");
            best_by_link.push(sim);
        }

        // Strictly-greater comparison keeps the earliest link on ties.
        let mut best: Option<(usize, f64)> = None;
        for (i, &sim) in best_by_link.iter().enumerate() {
            match best {
                Some((_, best_sim)) if sim <= best_sim => {}
                _ => best = Some((i, sim)),
            }
        }

        match best {
            Some((index, sim)) if sim > tau2 => {
                links[index].segment_ids.push(segment.segment_id.clone());
            }
            _ => links.push(SegmentLink {
                link_id: format!("L{}", links.len() + 1),
                segment_ids: vec![segment.segment_id.clone()],
            }),
        }
    }
    links
}

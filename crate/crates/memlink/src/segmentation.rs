//! Session segmentation: boundary-score peaks refined by a similarity
//! threshold.
//!
//! Boundary position `j` (1-based) means "break between message `j` and
//! message `j+1`". Candidates are strict local maxima of the adjacency
//! scores; a candidate survives refinement iff the cosine similarity of the
//! compressed messages straddling it is strictly below `tau1`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::Session;
use crate::providers::{
    BoundaryScorer, Compressor, Embedder, EmbeddingVector, ProviderError,
};

/// A contiguous run of one session's messages with a pooled embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub segment_id: String,
    pub session_id: String,
    pub msg_ids: Vec<String>,
    pub embedding: EmbeddingVector,
}

/// Candidate and refined boundary positions for one session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundarySet {
    pub candidate: BTreeSet<usize>,
    pub refined: BTreeSet<usize>,
}

/// Strict local maxima of the adjacency scores, as 1-based positions.
///
/// Out-of-range neighbors count as negative infinity, so a score at either
/// end can be a peak. Plateaus produce no peak.
pub fn candidate_boundaries(scores: &[f64]) -> BTreeSet<usize> {
    let mut peaks = BTreeSet::new();
    for j in 0..scores.len() {
        let left = if j > 0 { scores[j - 1] } else { f64::NEG_INFINITY };
        let right = if j + 1 < scores.len() {
            scores[j + 1]
        } else {
            f64::NEG_INFINITY
        };
        if scores[j] > left && scores[j] > right {
            peaks.insert(j + 1);
        }
    }
    peaks
}

/// Keeps candidate `j` iff the cosine of the messages straddling the
/// boundary (messages `j` and `j+1`, 1-based) is strictly below `tau1`.
pub fn refine_boundaries(
    candidates: &BTreeSet<usize>,
    message_embeddings: &[EmbeddingVector],
    tau1: f64,
) -> BTreeSet<usize> {
    candidates
        .iter()
        .copied()
        .filter(|&j| {
            debug_assert!(j >= 1 && j < message_embeddings.len());
            message_embeddings[j - 1].cosine(&message_embeddings[j]) < tau1
        })
        .collect()
}

/// Cuts a session after each refined boundary and pools raw-message
/// embeddings into segment embeddings.
///
/// Segment ids are `{session_id}/g{ordinal}` with 1-based ordinals.
pub fn build_segments(
    session: &Session,
    refined_boundaries: &BTreeSet<usize>,
    embedder: &dyn Embedder,
) -> Result<Vec<Segment>, ProviderError> {
    if session.messages.is_empty() {
        return Ok(Vec::new());
    }
    let texts: Vec<String> = session.messages.iter().map(|m| m.full_text()).collect();
    let embeddings = embedder.embed(&texts)?;

    let mut segments = Vec::new();
    let mut start = 0usize;
    let mut cut_points: Vec<usize> = refined_boundaries.iter().copied().collect();
    cut_points.push(session.messages.len());

    for (ordinal, &end) in cut_points.iter().enumerate() {
        debug_assert!(end > start && end <= session.messages.len());
        let members: Vec<&EmbeddingVector> = embeddings[start..end].iter().collect();
        segments.push(Segment {
            segment_id: format!("{}/g{}", session.session_id, ordinal + 1),
            session_id: session.session_id.clone(),
            msg_ids: session.messages[start..end]
                .iter()
                .map(|m| m.msg_id.clone())
                .collect(),
            embedding: EmbeddingVector::mean_normalized(&members),
        });
        start = end;
    }
    Ok(segments)
}

/// Full per-session pipeline: compress, score boundaries, detect and refine
/// peaks, cut segments.
pub fn segment_session(
    session: &Session,
    embedder: &dyn Embedder,
    compressor: &dyn Compressor,
    scorer: &dyn BoundaryScorer,
    tau1: f64,
    compression_rate: f64,
) -> Result<(Vec<Segment>, BoundarySet), ProviderError> {
    let compressed: Vec<String> = session
        .messages
        .iter()
        .map(|m| compressor.compress(&m.full_text(), compression_rate))
        .collect::<Result<_, _>>()?;

    let scores = scorer.boundary_scores(&compressed)?;
    let candidate = candidate_boundaries(&scores);
    let compressed_embeddings = if candidate.is_empty() {
        Vec::new()
    } else {
        embedder.embed(&compressed)?
    };
    let refined = if candidate.is_empty() {
        BTreeSet::new()
    } else {
        refine_boundaries(&candidate, &compressed_embeddings, tau1)
    };

    let segments = build_segments(session, &refined, embedder)?;
    Ok((segments, BoundarySet { candidate, refined }))
}

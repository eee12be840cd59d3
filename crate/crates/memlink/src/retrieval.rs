//! Message-level index, query-time retrieval with segment/link expansion,
//! and recall metrics.
//!
//! Retrieval is deliberately recall-oriented: it enters the history through
//! top-k message matches, expands each hit to its containing segment and all
//! segments in the hit's link, and returns every message of those segments in
//! chronological order.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{GoldAnnotation, History, Query};
use crate::linking::SegmentLink;
use crate::providers::{Compressor, Embedder, EmbeddingVector, ProviderError};
use crate::segmentation::Segment;

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RetrievalError {
    /// A message is not covered by any segment, or a segment by any link.
    #[error("coverage error: {0}")]
    Coverage(String),
    #[error("retrieve on an empty index")]
    EmptyIndex,
    #[error("recall metrics require a non-empty gold set")]
    EmptyGold,
    #[error("snapshot format version {got} unsupported (expected {expected})")]
    SnapshotVersion { expected: u32, got: u32 },
    #[error("snapshot embedding dim {got} does not match entries ({expected})")]
    SnapshotDim { expected: usize, got: usize },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// One index entry: a message keyed by its compressed-content embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub msg_id: String,
    pub key_embedding: EmbeddingVector,
    pub segment_id: String,
    pub link_id: String,
}

/// The queryable memory structure: entries plus back-references to the
/// history, segments, and links they resolve into.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryIndex {
    pub history: History,
    pub segments: Vec<Segment>,
    pub links: Vec<SegmentLink>,
    pub entries: Vec<IndexEntry>,
    pub embedding_dim: usize,
}

/// High-recall candidate set for one query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    /// All candidate messages, deduplicated, in chronological order.
    pub msg_ids: Vec<String>,
    /// The raw top-k matches that seeded the expansion.
    pub hit_msg_ids: Vec<String>,
    /// Segments covered after segment and link expansion.
    pub expanded_segment_ids: BTreeSet<String>,
    /// Whitespace-token count of the candidate messages' raw contents.
    pub token_count: usize,
}

/// Recall metrics for one query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecallMetrics {
    /// 1 iff every gold message is in the candidate set.
    pub recall01: u8,
    /// Fraction of gold messages covered.
    pub recall: f64,
}

/// Builds the message-level index over a segmented, linked history.
///
/// Every message must belong to a segment and every segment to a link.
pub fn build_index(
    history: History,
    segments: Vec<Segment>,
    links: Vec<SegmentLink>,
    embedder: &dyn Embedder,
    compressor: &dyn Compressor,
    compression_rate: f64,
) -> Result<MemoryIndex, RetrievalError> {
    let mut segment_of: HashMap<&str, &str> = HashMap::new();
    for segment in &segments {
        for msg_id in &segment.msg_ids {
            segment_of.insert(msg_id, &segment.segment_id);
        }
    }
    let mut link_of: HashMap<&str, &str> = HashMap::new();
    for link in &links {
        for segment_id in &link.segment_ids {
            link_of.insert(segment_id, &link.link_id);
        }
    }

    let mut entries = Vec::with_capacity(history.message_count());
    for message in history.messages() {
        let segment_id = *segment_of.get(message.msg_id.as_str()).ok_or_else(|| {
            RetrievalError::Coverage(format!("message {} has no segment", message.msg_id))
        })?;
        let link_id = *link_of.get(segment_id).ok_or_else(|| {
            RetrievalError::Coverage(format!("segment {segment_id} has no link"))
        })?;
        let compressed = compressor.compress(&message.full_text(), compression_rate)?;
        let key_embedding = embedder.embed_one(&compressed)?;
        entries.push(IndexEntry {
            msg_id: message.msg_id.clone(),
            key_embedding,
            segment_id: segment_id.to_string(),
            link_id: link_id.to_string(),
        });
    }

    let embedding_dim = entries.first().map_or(embedder.dim(), |e| e.key_embedding.dim());
    Ok(MemoryIndex {
        history,
        segments,
        links,
        entries,
        embedding_dim,
    })
}

impl MemoryIndex {
    pub fn segment(&self, segment_id: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.segment_id == segment_id)
    }

    pub fn link(&self, link_id: &str) -> Option<&SegmentLink> {
        self.links.iter().find(|l| l.link_id == link_id)
    }

    /// Top-k retrieval with segment and link expansion.
    ///
    /// Scores every key by cosine against the raw query embedding; top-k ties
    /// break toward chronologically earlier messages. Hits expand to their
    /// containing segments and every segment in their links; the candidate
    /// set is the union of those segments' messages in chronological order.
    pub fn retrieve(
        &self,
        embedder: &dyn Embedder,
        query: &Query,
        k: usize,
    ) -> Result<CandidateSet, RetrievalError> {
        assert!(k >= 1, "k must be at least 1");
        if self.entries.is_empty() {
            return Err(RetrievalError::EmptyIndex);
        }
        let query_embedding = embedder.embed_one(&query.text)?;

        let mut scored: Vec<(usize, f64)> = self
            .entries
            .iter()
            .enumerate()
            .map(|(pos, entry)| (pos, query_embedding.cosine(&entry.key_embedding)))
            .collect();
        // Entries are stored chronologically, so the index position is the
        // chronological tie-break.
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

        let hits: Vec<&IndexEntry> = scored
            .iter()
            .take(k.min(self.entries.len()))
            .map(|&(pos, _)| &self.entries[pos])
            .collect();
        let hit_msg_ids: Vec<String> = hits.iter().map(|e| e.msg_id.clone()).collect();

        let mut expanded_segment_ids = BTreeSet::new();
        for hit in &hits {
            expanded_segment_ids.insert(hit.segment_id.clone());
            if let Some(link) = self.link(&hit.link_id) {
                expanded_segment_ids.extend(link.segment_ids.iter().cloned());
            }
        }

        let selected: BTreeSet<&str> = self
            .segments
            .iter()
            .filter(|s| expanded_segment_ids.contains(&s.segment_id))
            .flat_map(|s| s.msg_ids.iter().map(String::as_str))
            .collect();

        let mut msg_ids = Vec::with_capacity(selected.len());
        let mut token_count = 0usize;
        for message in self.history.messages() {
            if selected.contains(message.msg_id.as_str()) {
                msg_ids.push(message.msg_id.clone());
                token_count += message.content.split_whitespace().count();
            }
        }

        Ok(CandidateSet {
            msg_ids,
            hit_msg_ids,
            expanded_segment_ids,
            token_count,
        })
    }
}

/// Coverage metrics of a candidate set against gold annotations.
pub fn recall_metrics(
    candidates: &CandidateSet,
    gold: &GoldAnnotation,
) -> Result<RecallMetrics, RetrievalError> {
    if gold.gold_msg_ids.is_empty() {
        return Err(RetrievalError::EmptyGold);
    }
    let hit = gold
        .gold_msg_ids
        .iter()
        .filter(|id| candidates.msg_ids.contains(id))
        .count();
    let recall = hit as f64 / gold.gold_msg_ids.len() as f64;
    Ok(RecallMetrics {
        recall01: u8::from(recall == 1.0),
        recall,
    })
}

/// Persisted form of a [`MemoryIndex`].
#[derive(Debug, Serialize, Deserialize)]
pub struct IndexSnapshot {
    pub format_version: u32,
    pub embedding_dim: usize,
    pub history: History,
    pub segments: Vec<Segment>,
    pub links: Vec<SegmentLink>,
    pub entries: Vec<IndexEntry>,
}

impl MemoryIndex {
    /// Serializes the index to the versioned snapshot format. Identical
    /// indexes produce identical bytes.
    pub fn to_snapshot_json(&self) -> String {
        let snapshot = IndexSnapshot {
            format_version: SNAPSHOT_FORMAT_VERSION,
            embedding_dim: self.embedding_dim,
            history: self.history.clone(),
            segments: self.segments.clone(),
            links: self.links.clone(),
            entries: self.entries.clone(),
        };
        serde_json::to_string_pretty(&snapshot).expect("snapshot serialization cannot fail")
    }

    /// Loads a snapshot, validating the format version and embedding dim.
    pub fn from_snapshot_json(raw: &str) -> Result<Self, RetrievalError> {
        let snapshot: IndexSnapshot = serde_json::from_str(raw).map_err(|e| {
            RetrievalError::Coverage(format!("snapshot does not parse: {e}"))
        })?;
        if snapshot.format_version != SNAPSHOT_FORMAT_VERSION {
            return Err(RetrievalError::SnapshotVersion {
                expected: SNAPSHOT_FORMAT_VERSION,
                got: snapshot.format_version,
            });
        }
        for entry in &snapshot.entries {
            if entry.key_embedding.dim() != snapshot.embedding_dim {
                return Err(RetrievalError::SnapshotDim {
                    expected: snapshot.embedding_dim,
                    got: entry.key_embedding.dim(),
                });
            }
        }
        Ok(Self {
            history: snapshot.history,
            segments: snapshot.segments,
            links: snapshot.links,
            entries: snapshot.entries,
            embedding_dim: snapshot.embedding_dim,
        })
    }
}

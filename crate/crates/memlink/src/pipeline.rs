//! End-to-end structure building: history -> segments -> links -> index.

use std::sync::Arc;

use crate::config::EngineConfig;
use crate::corpus::History;
use crate::linking::{assign_links, SegmentLink};
use crate::providers::remote::{RemoteConfig, RemoteEmbedder};
use crate::providers::{
    BoundaryScorer, Compressor, Embedder, EmbeddingBoundaryScorer, HashedTrigramEmbedder,
    ProviderError, ReferenceCompressor,
};
use crate::retrieval::{build_index, MemoryIndex, RetrievalError};
use crate::segmentation::{segment_session, Segment};

/// The build-time provider bundle.
#[derive(Clone)]
pub struct ProviderSet {
    pub embedder: Arc<dyn Embedder>,
    pub compressor: Arc<dyn Compressor>,
    pub scorer: Arc<dyn BoundaryScorer>,
}

impl ProviderSet {
    /// Deterministic offline providers.
    pub fn reference() -> Self {
        let embedder: Arc<dyn Embedder> = Arc::new(HashedTrigramEmbedder::default());
        Self {
            scorer: Arc::new(EmbeddingBoundaryScorer::new(embedder.clone())),
            compressor: Arc::new(ReferenceCompressor),
            embedder,
        }
    }

    /// Custom embedder, reference compressor, embedding boundary scorer.
    pub fn with_embedder(embedder: Arc<dyn Embedder>) -> Self {
        Self {
            scorer: Arc::new(EmbeddingBoundaryScorer::new(embedder.clone())),
            compressor: Arc::new(ReferenceCompressor),
            embedder,
        }
    }

    /// Remote embedder when an endpoint is configured, reference otherwise.
    pub fn from_config(config: &EngineConfig) -> Result<Self, ProviderError> {
        match &config.embed_endpoint {
            Some(endpoint) => {
                let mut remote = RemoteConfig::new(endpoint.clone());
                remote.timeout_secs = config.timeout_secs;
                remote.retries = config.retries;
                Ok(Self::with_embedder(Arc::new(RemoteEmbedder::new(remote)?)))
            }
            None => Ok(Self::reference()),
        }
    }
}

/// Segments and links every session of a history.
pub fn build_structure(
    history: &History,
    providers: &ProviderSet,
    config: &EngineConfig,
) -> Result<(Vec<Segment>, Vec<SegmentLink>), ProviderError> {
    let mut segments = Vec::new();
    for session in history.sessions() {
        let (session_segments, _) = segment_session(
            session,
            providers.embedder.as_ref(),
            providers.compressor.as_ref(),
            providers.scorer.as_ref(),
            config.tau1,
            config.compression_rate,
        )?;
        segments.extend(session_segments);
    }
    let links = assign_links(&segments, config.tau2);
    Ok((segments, links))
}

/// Full build: segment, link, and index a history.
pub fn build_memory_index(
    history: History,
    providers: &ProviderSet,
    config: &EngineConfig,
) -> Result<MemoryIndex, RetrievalError> {
    let (segments, links) = build_structure(&history, providers, config)?;
    build_index(
        history,
        segments,
        links,
        providers.embedder.as_ref(),
        providers.compressor.as_ref(),
        config.compression_rate,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::load_history;

    fn toy_history() -> History {
        load_history(
            r#"{"sessions":[
                {"session_id":"s1","messages":[
                    {"content":"planning the hiking trip to the alps"},
                    {"content":"the hiking trip needs new boots"},
                    {"content":"quarterly earnings report for the bank"},
                    {"content":"the earnings report numbers look strong"}
                ]},
                {"session_id":"s2","messages":[
                    {"content":"back to the hiking trip plans again"},
                    {"content":"the hiking boots arrived today"}
                ]}
            ]}"#,
        )
        .unwrap()
    }

    #[test]
    fn build_covers_every_message() {
        let history = toy_history();
        let config = EngineConfig::default();
        let index = build_memory_index(history, &ProviderSet::reference(), &config).unwrap();
        assert_eq!(index.entries.len(), 6);
        // Every entry resolves.
        for entry in &index.entries {
            assert!(index.segment(&entry.segment_id).is_some());
            assert!(index.link(&entry.link_id).is_some());
        }
    }

    #[test]
    fn rebuilds_are_identical() {
        let config = EngineConfig::default();
        let a = build_memory_index(toy_history(), &ProviderSet::reference(), &config).unwrap();
        let b = build_memory_index(toy_history(), &ProviderSet::reference(), &config).unwrap();
        assert_eq!(a.to_snapshot_json(), b.to_snapshot_json());
    }

    #[test]
    fn tau2_one_gives_one_link_per_segment() {
        let config = EngineConfig {
            tau2: 1.0,
            ..EngineConfig::default()
        };
        let index = build_memory_index(toy_history(), &ProviderSet::reference(), &config).unwrap();
        assert_eq!(index.links.len(), index.segments.len());
    }
}

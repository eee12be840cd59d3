//! External-capability contracts and their deterministic reference
//! implementations.
//!
//! Five capabilities are pluggable: text embedding, message compression,
//! boundary scoring, evidence judging, and answer generation/judging. The
//! reference implementations are pure functions of their inputs so the whole
//! engine runs offline; remote implementations (see [`remote`]) speak a
//! minimal HTTP wire protocol.

mod boundary;
mod compressor;
mod embedder;
mod judge;
pub mod prompts;
pub mod remote;

pub use boundary::EmbeddingBoundaryScorer;
pub use compressor::ReferenceCompressor;
pub use embedder::HashedTrigramEmbedder;
pub use judge::{OracleAnswerJudge, OracleAnswerer, OracleEvidenceJudge, ABSTENTION_ANSWER};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::EvidenceEntry;
use crate::corpus::{Message, Query};

/// Errors surfaced by capability providers.
#[derive(Debug, Error)]
pub enum ProviderError {
    /// Transport or remote-service failure (after retries).
    #[error("provider transport failure: {0}")]
    Transport(String),
    /// A remote embedder returned vectors of inconsistent dimension.
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// A judge or answerer returned bytes that do not parse as the documented
    /// response shape.
    #[error("malformed judge output: {0}")]
    MalformedJudgeOutput(String),
    /// A remote response violated the wire contract in a non-judge way
    /// (e.g. wrong vector count).
    #[error("invalid provider response: {0}")]
    InvalidResponse(String),
}

/// A fixed-dimension embedding with positive L2 norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Wraps raw values without normalizing.
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    /// L2-normalizes `values`; an all-zero input is replaced by a fixed unit
    /// basis vector (cosine is undefined on zero vectors), with a warning.
    pub fn normalized(values: Vec<f64>) -> Self {
        let norm: f64 = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            log::warn!("zero embedding vector replaced by unit basis vector");
            return Self::unit_basis(values.len().max(1));
        }
        Self(values.into_iter().map(|v| v / norm).collect())
    }

    /// The fallback vector for degenerate inputs: e_0 of the given dimension.
    pub fn unit_basis(dim: usize) -> Self {
        let mut values = vec![0.0; dim];
        values[0] = 1.0;
        Self(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Cosine similarity. Both vectors must share a dimension.
    pub fn cosine(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "cosine on mismatched dimensions");
        let dot: f64 = self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum();
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            return 0.0;
        }
        dot / denom
    }

    /// Mean of several vectors, re-normalized. Degenerate (cancelling) sums
    /// fall back to the unit basis vector.
    pub fn mean_normalized(vectors: &[&EmbeddingVector]) -> Self {
        assert!(!vectors.is_empty(), "mean of zero vectors");
        let dim = vectors[0].dim();
        let mut acc = vec![0.0; dim];
        for v in vectors {
            assert_eq!(v.dim(), dim, "mean over mismatched dimensions");
            for (a, b) in acc.iter_mut().zip(v.values()) {
                *a += b;
            }
        }
        let n = vectors.len() as f64;
        for a in acc.iter_mut() {
            *a /= n;
        }
        Self::normalized(acc)
    }
}

/// Maps texts to fixed-dimension embeddings.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    /// One vector per input text, all of [`Embedder::dim`].
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError>;

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        let mut out = self.embed(&[text.to_string()])?;
        Ok(out.remove(0))
    }
}

/// Compresses message content to a token subsequence.
pub trait Compressor: Send + Sync {
    /// Returns a token-subsequence of `text` with at most
    /// `ceil(rate * token_count)` tokens; `rate` 1.0 is the identity.
    fn compress(&self, text: &str, rate: f64) -> Result<String, ProviderError>;
}

/// Scores local cohesion between adjacent compressed messages.
pub trait BoundaryScorer: Send + Sync {
    /// For `n` messages, returns `n - 1` scores; score `j` (0-based) belongs
    /// to the adjacency between message `j` and `j + 1`. Higher scores mean
    /// weaker cohesion.
    fn boundary_scores(&self, compressed_messages: &[String]) -> Result<Vec<f64>, ProviderError>;
}

/// A contiguous group of source messages, as presented to judges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentMessages {
    pub segment_id: String,
    pub messages: Vec<Message>,
}

/// Verdict for one evidence entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

/// Failure categories the evidence judge may assign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FailType {
    SubjectMismatch,
    VoiceInconsistency,
    InfoNotSelfContained,
    Unsupported,
    TemporalError,
}

/// Per-entry outcome from the evidence judge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryVerdict {
    pub msg_id: String,
    pub verdict: Verdict,
    pub fail_types: Vec<FailType>,
    pub reason: String,
}

/// Full evidence-judge response: exactly one verdict per submitted entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub entries: Vec<EntryVerdict>,
}

impl JudgeVerdict {
    pub fn pass_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.verdict == Verdict::Pass)
            .count()
    }
}

/// Combined answer-correctness and failure-attribution verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerVerdict {
    pub correct: bool,
    pub info_is_failure_source: bool,
    pub llm_is_failure_source: bool,
    pub reason: String,
    pub generated_answer: String,
}

impl AnswerVerdict {
    /// Builds a verdict, enforcing that a correct answer carries no failure
    /// attribution.
    pub fn new(
        correct: bool,
        info_is_failure_source: bool,
        llm_is_failure_source: bool,
        reason: String,
        generated_answer: String,
    ) -> Self {
        Self {
            correct,
            info_is_failure_source: !correct && info_is_failure_source,
            llm_is_failure_source: !correct && llm_is_failure_source,
            reason,
            generated_answer,
        }
    }
}

/// Evidence as shown to the downstream answerer: message ids stripped,
/// speaker and timestamp attached from the source message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedEvidence {
    pub info: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub speaker: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timestamp: Option<String>,
}

/// Judges evidence faithfulness and self-containedness.
pub trait EvidenceJudge: Send + Sync {
    fn judge_evidence(
        &self,
        entries: &[EvidenceEntry],
        source_segments: &[SegmentMessages],
    ) -> Result<JudgeVerdict, ProviderError>;
}

/// Produces a downstream answer from distilled evidence.
pub trait Answerer: Send + Sync {
    fn answer(
        &self,
        query: &Query,
        evidence: &[RenderedEvidence],
        question_type: &str,
    ) -> Result<String, ProviderError>;
}

/// Judges answer correctness and attributes failures.
pub trait AnswerJudge: Send + Sync {
    fn judge_answer(
        &self,
        query: &Query,
        gold_answer: &str,
        evidence: &[RenderedEvidence],
        generated_answer: &str,
        question_type: &str,
    ) -> Result<AnswerVerdict, ProviderError>;
}

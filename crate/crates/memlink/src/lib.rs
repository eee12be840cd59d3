//! Long-term conversational memory engine built on a segment-link structure,
//! paired with the verifiable reward and advantage machinery used to train a
//! query-time evidence distiller.
//!
//! The library splits long-term memory QA into two stages:
//!
//! 1. **High-recall candidate retrieval.** Raw multi-session histories are
//!    organized into contiguous semantic segments ([`segmentation`]), segments
//!    are threaded into cross-session links ([`linking`]), and a message-level
//!    index serves top-k retrieval with segment and link expansion
//!    ([`retrieval`]).
//! 2. **Evidence-distillation scoring.** Structured distillation actions are
//!    parsed and validated ([`action`]), scored with eight decomposed and
//!    gated reward components ([`rewards`]), and turned into group-relative,
//!    span-aligned advantages plus a clipped-surrogate objective value
//!    ([`policy`]).
//!
//! External capabilities (embedding, compression, boundary scoring, LLM
//! judges) are provider traits with deterministic reference implementations
//! ([`providers`]), so the entire pipeline is testable offline. The
//! [`harness`] module exposes the CLI-level commands (build, retrieve, sweep,
//! reward, advantage) as plain functions for library embedding.

pub mod action;
pub mod config;
pub mod corpus;
pub mod harness;
pub mod linking;
pub mod pipeline;
pub mod policy;
pub mod providers;
pub mod retrieval;
pub mod rewards;
pub mod segmentation;

pub use config::EngineConfig;
pub use corpus::{GoldAnnotation, History, Message, Query, Session};
pub use providers::EmbeddingVector;

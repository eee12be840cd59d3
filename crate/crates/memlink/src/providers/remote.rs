//! Remote providers over a minimal HTTP wire protocol.
//!
//! Embedding service: `POST {"texts":[str]}` -> `{"vectors":[[number]]}`.
//! Judge/answerer service: `POST {"messages":[{"role","content"}],
//! "temperature":0.0}` -> `{"content":str}`. Temperatures are fixed at 0.0.
//!
//! Responses from judges are parsed strictly; anything that does not match
//! the documented shape is a [`ProviderError::MalformedJudgeOutput`].
//! Requests are memoized per client instance keyed by request bytes.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::action::EvidenceEntry;
use crate::corpus::Query;

use super::prompts::{
    render_answer_judge_prompt, render_answer_messages, render_evidence_judge_prompt, ChatMessage,
};
use super::{
    AnswerJudge, AnswerVerdict, Answerer, Embedder, EmbeddingVector, EntryVerdict, EvidenceJudge,
    FailType, JudgeVerdict, ProviderError, RenderedEvidence, SegmentMessages, Verdict,
};

/// Connection settings for one remote service.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
}

fn default_timeout_secs() -> u64 {
    30
}

fn default_retries() -> u32 {
    2
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout_secs: default_timeout_secs(),
            retries: default_retries(),
        }
    }
}

fn build_client(timeout_secs: u64) -> Result<reqwest::blocking::Client, ProviderError> {
    reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(timeout_secs))
        .build()
        .map_err(|e| ProviderError::Transport(e.to_string()))
}

/// POSTs a JSON body with retries, returning the raw response body.
fn post_with_retries(
    client: &reqwest::blocking::Client,
    endpoint: &str,
    body: &str,
    retries: u32,
) -> Result<String, ProviderError> {
    let mut last_error = String::new();
    for _ in 0..=retries {
        let sent = client
            .post(endpoint)
            .header("content-type", "application/json")
            .body(body.to_string())
            .send();
        match sent {
            Ok(resp) if resp.status().is_success() => {
                return resp
                    .text()
                    .map_err(|e| ProviderError::Transport(e.to_string()));
            }
            Ok(resp) => last_error = format!("status {}", resp.status()),
            Err(e) => last_error = e.to_string(),
        }
    }
    Err(ProviderError::Transport(last_error))
}

/// Chat-completion client with per-instance request memoization.
pub struct ChatClient {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    memo: Mutex<HashMap<String, String>>,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    messages: &'a [ChatMessage],
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    content: String,
}

impl ChatClient {
    pub fn new(config: RemoteConfig) -> Result<Self, ProviderError> {
        let client = build_client(config.timeout_secs)?;
        Ok(Self {
            config,
            client,
            memo: Mutex::new(HashMap::new()),
        })
    }

    /// Sends the messages at temperature 0.0 and returns the response content.
    pub fn complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        let body = serde_json::to_string(&ChatRequest {
            messages,
            temperature: 0.0,
        })
        .expect("request serialization cannot fail");

        if let Some(cached) = self.memo.lock().unwrap().get(&body) {
            return Ok(cached.clone());
        }

        let raw = post_with_retries(&self.client, &self.config.endpoint, &body, self.config.retries)?;
        let parsed: ChatResponse = serde_json::from_str(&raw)
            .map_err(|e| ProviderError::InvalidResponse(format!("chat response: {e}")))?;

        self.memo.lock().unwrap().insert(body, parsed.content.clone());
        Ok(parsed.content)
    }
}

/// Remote embedding provider.
pub struct RemoteEmbedder {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    /// Dimension pinned by the first successful response.
    dim: Mutex<Option<usize>>,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

impl RemoteEmbedder {
    pub fn new(config: RemoteConfig) -> Result<Self, ProviderError> {
        let client = build_client(config.timeout_secs)?;
        Ok(Self {
            config,
            client,
            dim: Mutex::new(None),
        })
    }
}

impl Embedder for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim.lock().unwrap().unwrap_or(0)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        let body = serde_json::to_string(&EmbedRequest { texts })
            .expect("request serialization cannot fail");
        let raw = post_with_retries(&self.client, &self.config.endpoint, &body, self.config.retries)?;
        let parsed: EmbedResponse = serde_json::from_str(&raw)
            .map_err(|e| ProviderError::InvalidResponse(format!("embed response: {e}")))?;

        if parsed.vectors.len() != texts.len() {
            return Err(ProviderError::InvalidResponse(format!(
                "expected {} vectors, got {}",
                texts.len(),
                parsed.vectors.len()
            )));
        }

        let mut pinned = self.dim.lock().unwrap();
        let mut out = Vec::with_capacity(parsed.vectors.len());
        for values in parsed.vectors {
            let expected = *pinned.get_or_insert(values.len());
            if values.len() != expected {
                return Err(ProviderError::DimensionMismatch {
                    expected,
                    got: values.len(),
                });
            }
            let v = EmbeddingVector::new(values);
            out.push(if v.norm() == 0.0 {
                log::warn!("remote embedder returned a zero vector; substituting unit basis");
                EmbeddingVector::unit_basis(expected)
            } else {
                v
            });
        }
        Ok(out)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EvidenceJudgeResponse {
    results: Vec<EvidenceJudgeResult>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EvidenceJudgeResult {
    msg_id: String,
    verdict: String,
    fail_types: Vec<String>,
    reason_in_a_sentence: String,
}

/// Remote evidence faithfulness judge.
pub struct RemoteEvidenceJudge {
    chat: ChatClient,
}

impl RemoteEvidenceJudge {
    pub fn new(config: RemoteConfig) -> Result<Self, ProviderError> {
        Ok(Self {
            chat: ChatClient::new(config)?,
        })
    }
}

fn parse_fail_type(raw: &str) -> Result<FailType, ProviderError> {
    match raw {
        "SUBJECT_MISMATCH" => Ok(FailType::SubjectMismatch),
        "VOICE_INCONSISTENCY" => Ok(FailType::VoiceInconsistency),
        "INFO_NOT_SELF_CONTAINED" => Ok(FailType::InfoNotSelfContained),
        "UNSUPPORTED" => Ok(FailType::Unsupported),
        "TEMPORAL_ERROR" => Ok(FailType::TemporalError),
        other => Err(ProviderError::MalformedJudgeOutput(format!(
            "unknown fail type {other:?}"
        ))),
    }
}

impl EvidenceJudge for RemoteEvidenceJudge {
    fn judge_evidence(
        &self,
        entries: &[EvidenceEntry],
        source_segments: &[SegmentMessages],
    ) -> Result<JudgeVerdict, ProviderError> {
        if entries.is_empty() {
            return Ok(JudgeVerdict { entries: Vec::new() });
        }
        let prompt = render_evidence_judge_prompt(entries, source_segments);
        let content = self.chat.complete(&[ChatMessage::user(prompt)])?;
        let parsed: EvidenceJudgeResponse = serde_json::from_str(&content)
            .map_err(|e| ProviderError::MalformedJudgeOutput(e.to_string()))?;

        if parsed.results.len() != entries.len() {
            return Err(ProviderError::MalformedJudgeOutput(format!(
                "expected {} verdicts, got {}",
                entries.len(),
                parsed.results.len()
            )));
        }

        let mut out = Vec::with_capacity(parsed.results.len());
        for result in parsed.results {
            let verdict = match result.verdict.as_str() {
                "PASS" => Verdict::Pass,
                "FAIL" => Verdict::Fail,
                other => {
                    return Err(ProviderError::MalformedJudgeOutput(format!(
                        "verdict must be PASS or FAIL, got {other:?}"
                    )))
                }
            };
            let fail_types = result
                .fail_types
                .iter()
                .map(|t| parse_fail_type(t))
                .collect::<Result<Vec<_>, _>>()?;
            out.push(EntryVerdict {
                msg_id: result.msg_id,
                verdict,
                fail_types,
                reason: result.reason_in_a_sentence,
            });
        }
        Ok(JudgeVerdict { entries: out })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerJudgeResponse {
    generated_answer_is_correct_or_wrong: String,
    the_information_is_failure_source: String,
    the_llm_is_failure_source: String,
    reason_in_a_sentence: String,
}

fn parse_yes_no(raw: &str, field: &str) -> Result<bool, ProviderError> {
    match raw {
        "YES" => Ok(true),
        "NO" => Ok(false),
        other => Err(ProviderError::MalformedJudgeOutput(format!(
            "{field} must be YES or NO, got {other:?}"
        ))),
    }
}

/// Remote combined answer-correctness and failure-attribution judge.
pub struct RemoteAnswerJudge {
    chat: ChatClient,
}

impl RemoteAnswerJudge {
    pub fn new(config: RemoteConfig) -> Result<Self, ProviderError> {
        Ok(Self {
            chat: ChatClient::new(config)?,
        })
    }
}

impl AnswerJudge for RemoteAnswerJudge {
    fn judge_answer(
        &self,
        query: &Query,
        gold_answer: &str,
        evidence: &[RenderedEvidence],
        generated_answer: &str,
        question_type: &str,
    ) -> Result<AnswerVerdict, ProviderError> {
        let prompt =
            render_answer_judge_prompt(query, gold_answer, evidence, generated_answer, question_type);
        let content = self.chat.complete(&[ChatMessage::user(prompt)])?;
        let parsed: AnswerJudgeResponse = serde_json::from_str(&content)
            .map_err(|e| ProviderError::MalformedJudgeOutput(e.to_string()))?;

        let correct = match parsed.generated_answer_is_correct_or_wrong.as_str() {
            "CORRECT" => true,
            "WRONG" => false,
            other => {
                return Err(ProviderError::MalformedJudgeOutput(format!(
                    "correctness must be CORRECT or WRONG, got {other:?}"
                )))
            }
        };
        let info_fault = parse_yes_no(
            &parsed.the_information_is_failure_source,
            "the_information_is_failure_source",
        )?;
        let llm_fault = parse_yes_no(
            &parsed.the_llm_is_failure_source,
            "the_llm_is_failure_source",
        )?;

        Ok(AnswerVerdict::new(
            correct,
            info_fault,
            llm_fault,
            parsed.reason_in_a_sentence,
            generated_answer.to_string(),
        ))
    }
}

/// Remote downstream answerer.
pub struct RemoteAnswerer {
    chat: ChatClient,
    common_answerer_rules: String,
}

impl RemoteAnswerer {
    pub fn new(config: RemoteConfig, common_answerer_rules: String) -> Result<Self, ProviderError> {
        Ok(Self {
            chat: ChatClient::new(config)?,
            common_answerer_rules,
        })
    }
}

impl Answerer for RemoteAnswerer {
    fn answer(
        &self,
        query: &Query,
        evidence: &[RenderedEvidence],
        question_type: &str,
    ) -> Result<String, ProviderError> {
        let messages =
            render_answer_messages(query, evidence, question_type, &self.common_answerer_rules);
        self.chat.complete(&messages)
    }
}

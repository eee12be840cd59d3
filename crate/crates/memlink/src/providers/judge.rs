//! Oracle judge and answerer stubs.
//!
//! These are pure functions of test-fixture annotations, so the judge-backed
//! reward components are exercisable without any network. The oracle evidence
//! judge passes an entry iff its statement subsumes the annotated gold
//! statement for that message; the oracle answerer echoes the evidence; the
//! oracle answer judge does case-folded substring matching with the
//! empty-gold abstention rule.

use std::collections::BTreeMap;

use super::{
    AnswerJudge, AnswerVerdict, Answerer, EntryVerdict, EvidenceJudge, FailType, JudgeVerdict,
    ProviderError, RenderedEvidence, SegmentMessages, Verdict,
};
use crate::action::EvidenceEntry;
use crate::corpus::Query;

/// The canonical abstention answer.
pub const ABSTENTION_ANSWER: &str = "Cannot be determined from the provided information.";

/// Phrases that count as "clearly indicates the question cannot be answered".
const ABSTENTION_MARKERS: &[&str] = &[
    "cannot be determined",
    "cannot be answered",
    "cannot answer",
    "insufficient information",
    "not enough information",
    "no information",
];

fn fold(text: &str) -> String {
    text.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Fixture-backed evidence judge: PASS iff the entry's info contains the
/// annotated gold statement for its message (case/whitespace-normalized).
#[derive(Debug, Clone, Default)]
pub struct OracleEvidenceJudge {
    gold_statements: BTreeMap<String, String>,
}

impl OracleEvidenceJudge {
    pub fn new(gold_statements: BTreeMap<String, String>) -> Self {
        Self { gold_statements }
    }
}

impl EvidenceJudge for OracleEvidenceJudge {
    fn judge_evidence(
        &self,
        entries: &[EvidenceEntry],
        _source_segments: &[SegmentMessages],
    ) -> Result<JudgeVerdict, ProviderError> {
        let entries = entries
            .iter()
            .map(|entry| {
                let pass = self
                    .gold_statements
                    .get(&entry.msg_id)
                    .map(|gold| fold(&entry.info).contains(&fold(gold)))
                    .unwrap_or(false);
                if pass {
                    EntryVerdict {
                        msg_id: entry.msg_id.clone(),
                        verdict: Verdict::Pass,
                        fail_types: Vec::new(),
                        reason: "matches annotated statement".to_string(),
                    }
                } else {
                    EntryVerdict {
                        msg_id: entry.msg_id.clone(),
                        verdict: Verdict::Fail,
                        fail_types: vec![FailType::Unsupported],
                        reason: "does not match annotated statement".to_string(),
                    }
                }
            })
            .collect();
        Ok(JudgeVerdict { entries })
    }
}

/// Deterministic answerer: echoes the evidence statements, abstaining when
/// none are provided.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleAnswerer;

impl Answerer for OracleAnswerer {
    fn answer(
        &self,
        _query: &Query,
        evidence: &[RenderedEvidence],
        _question_type: &str,
    ) -> Result<String, ProviderError> {
        if evidence.is_empty() {
            return Ok(ABSTENTION_ANSWER.to_string());
        }
        Ok(evidence
            .iter()
            .map(|e| e.info.as_str())
            .collect::<Vec<_>>()
            .join("\n"))
    }
}

/// Substring-matching answer judge with the empty-gold abstention rule.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleAnswerJudge;

impl OracleAnswerJudge {
    fn evidence_supports(evidence: &[RenderedEvidence], gold_answer: &str) -> bool {
        let joined = fold(
            &evidence
                .iter()
                .map(|e| e.info.as_str())
                .collect::<Vec<_>>()
                .join("\n"),
        );
        joined.contains(&fold(gold_answer))
    }
}

impl AnswerJudge for OracleAnswerJudge {
    fn judge_answer(
        &self,
        _query: &Query,
        gold_answer: &str,
        evidence: &[RenderedEvidence],
        generated_answer: &str,
        _question_type: &str,
    ) -> Result<AnswerVerdict, ProviderError> {
        let generated = fold(generated_answer);
        let correct = if gold_answer.is_empty() {
            ABSTENTION_MARKERS.iter().any(|m| generated.contains(m))
        } else {
            generated.contains(&fold(gold_answer))
        };

        let (info_fault, llm_fault, reason) = if correct {
            (false, false, "generated answer matches gold".to_string())
        } else if gold_answer.is_empty() {
            // On abstention items a non-abstaining answer is the answerer's
            // doing: the oracle evidence cannot "support" a specific answer.
            (false, true, "answerer failed to abstain".to_string())
        } else if Self::evidence_supports(evidence, gold_answer) {
            (false, true, "evidence supports gold but answer is wrong".to_string())
        } else {
            (true, false, "evidence lacks the gold answer".to_string())
        };

        Ok(AnswerVerdict::new(
            correct,
            info_fault,
            llm_fault,
            reason,
            generated_answer.to_string(),
        ))
    }
}

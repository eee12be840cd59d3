//! Decomposed, gated reward computation for evidence-distillation
//! completions.
//!
//! Eight components score one completion:
//!
//! * `r0` format validity (parse + schema, range {-2, 0.5, 1})
//! * `r1` selected-id validity (ids exist in the candidates, no duplicates)
//! * `r2` gold-support coverage (`2 * |U ∩ A*| / |A*|`)
//! * `r3` selection conciseness (`|U ∩ A*| / |U|`, only at full coverage)
//! * `r4` selection-evidence alignment (ids of Z equal U, no duplicates)
//! * `r5` evidence faithfulness and self-containedness (judge PASS fraction)
//! * `r6` answer correctness (`2 * correct`)
//! * `r7` evidence-failure attribution (0 only when the evidence is at fault)
//!
//! Gating is hierarchical but leaky: structural rewards activate only when
//! their prerequisites hold, while the answerability rewards `r6`/`r7` are
//! exposed as soon as the output format is valid. Span rewards:
//!
//! ```text
//! R_sel = r0 + g_fmt * (r1 + r2) + g_cov * r3
//! R_evd = r0 + g_sel * r4 + g_ali * r5 + g_fmt * (r6 + r7)
//! ```
//!
//! with `g_fmt = 1{r0 = 1}`, `g_sel = 1{r1 = 1}`, `g_cov = 1{r2 = 2}`,
//! `g_ali = 1{r4 = 1}`. Maxima are R_sel = 5 and R_evd = 6; a parse failure
//! short-circuits everything to (-2, -2).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{parse_action, EvidenceEntry, ParsedAction};
use crate::corpus::{GoldAnnotation, Message, Query};
use crate::providers::{
    AnswerJudge, AnswerVerdict, Answerer, EvidenceJudge, JudgeVerdict, ProviderError,
    RenderedEvidence, SegmentMessages,
};
use crate::retrieval::{CandidateSet, MemoryIndex};

pub const PARSE_FAIL_REWARD: f64 = -2.0;
pub const SCHEMA_FAIL_REWARD: f64 = 0.5;
pub const FORMAT_OK_REWARD: f64 = 1.0;
pub const MAX_SELECTION_REWARD: f64 = 5.0;
pub const MAX_EVIDENCE_REWARD: f64 = 6.0;

#[derive(Debug, Error)]
pub enum RewardError {
    /// A judge-backed component was required but no provider is configured.
    #[error("judge unavailable: {0}")]
    JudgeUnavailable(&'static str),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// One reward component value plus whether it was actually scored.
/// Gated-off components are stored as 0 and marked inactive, so logs
/// distinguish "scored 0" from "not scored".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardComponent {
    pub value: f64,
    pub active: bool,
}

impl RewardComponent {
    pub fn scored(value: f64) -> Self {
        Self { value, active: true }
    }

    pub fn inactive() -> Self {
        Self {
            value: 0.0,
            active: false,
        }
    }
}

/// The four binary gates derived from component values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gates {
    pub g_fmt: bool,
    pub g_sel: bool,
    pub g_cov: bool,
    pub g_ali: bool,
}

/// Raw component values for the span-reward formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentScores {
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    pub r5: f64,
    pub r6: f64,
    pub r7: f64,
}

impl ComponentScores {
    /// Gates are indicator functions of exact component values.
    pub fn gates(&self) -> Gates {
        Gates {
            g_fmt: self.r0 == FORMAT_OK_REWARD,
            g_sel: self.r1 == 1.0,
            g_cov: self.r2 == 2.0,
            g_ali: self.r4 == 1.0,
        }
    }
}

/// The two span-reward formulas.
pub fn span_rewards(scores: &ComponentScores, gates: &Gates) -> (f64, f64) {
    let fmt = f64::from(u8::from(gates.g_fmt));
    let sel = f64::from(u8::from(gates.g_sel));
    let cov = f64::from(u8::from(gates.g_cov));
    let ali = f64::from(u8::from(gates.g_ali));
    let r_sel = scores.r0 + fmt * (scores.r1 + scores.r2) + cov * scores.r3;
    let r_evd = scores.r0 + sel * scores.r4 + ali * scores.r5 + fmt * (scores.r6 + scores.r7);
    (r_sel, r_evd)
}

/// Full per-completion reward record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r0: RewardComponent,
    pub r1: RewardComponent,
    pub r2: RewardComponent,
    pub r3: RewardComponent,
    pub r4: RewardComponent,
    pub r5: RewardComponent,
    pub r6: RewardComponent,
    pub r7: RewardComponent,
    pub gates: Gates,
    pub r_sel: f64,
    pub r_evd: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub generated_answer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub evidence_verdict: Option<JudgeVerdict>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub answer_verdict: Option<AnswerVerdict>,
}

impl RewardBreakdown {
    /// The stored component values (inactive components read as 0).
    pub fn component_scores(&self) -> ComponentScores {
        ComponentScores {
            r0: self.r0.value,
            r1: self.r1.value,
            r2: self.r2.value,
            r3: self.r3.value,
            r4: self.r4.value,
            r5: self.r5.value,
            r6: self.r6.value,
            r7: self.r7.value,
        }
    }

    /// A breakdown carrying only precomputed span rewards, with every
    /// component unscored. Used when a group file supplies (R_sel, R_evd)
    /// directly.
    pub fn from_spans(r_sel: f64, r_evd: f64) -> Self {
        Self {
            r0: RewardComponent::inactive(),
            r1: RewardComponent::inactive(),
            r2: RewardComponent::inactive(),
            r3: RewardComponent::inactive(),
            r4: RewardComponent::inactive(),
            r5: RewardComponent::inactive(),
            r6: RewardComponent::inactive(),
            r7: RewardComponent::inactive(),
            gates: Gates {
                g_fmt: false,
                g_sel: false,
                g_cov: false,
                g_ali: false,
            },
            r_sel,
            r_evd,
            generated_answer: None,
            evidence_verdict: None,
            answer_verdict: None,
        }
    }

    /// The breakdown a pre-verified full-reward anchor carries.
    pub fn full_reward() -> Self {
        let scores = ComponentScores {
            r0: 1.0,
            r1: 1.0,
            r2: 2.0,
            r3: 1.0,
            r4: 1.0,
            r5: 1.0,
            r6: 2.0,
            r7: 1.0,
        };
        let gates = scores.gates();
        let (r_sel, r_evd) = span_rewards(&scores, &gates);
        debug_assert_eq!((r_sel, r_evd), (MAX_SELECTION_REWARD, MAX_EVIDENCE_REWARD));
        Self {
            r0: RewardComponent::scored(scores.r0),
            r1: RewardComponent::scored(scores.r1),
            r2: RewardComponent::scored(scores.r2),
            r3: RewardComponent::scored(scores.r3),
            r4: RewardComponent::scored(scores.r4),
            r5: RewardComponent::scored(scores.r5),
            r6: RewardComponent::scored(scores.r6),
            r7: RewardComponent::scored(scores.r7),
            gates,
            r_sel,
            r_evd,
            generated_answer: None,
            evidence_verdict: None,
            answer_verdict: None,
        }
    }
}

/// Everything one reward evaluation sees about its instance: the query and
/// the retrieved candidate segments with their messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationContext {
    pub query: Query,
    pub segments: Vec<SegmentMessages>,
}

impl EvaluationContext {
    pub fn new(query: Query, segments: Vec<SegmentMessages>) -> Self {
        Self { query, segments }
    }

    /// Builds the context from a retrieval result, grouping candidate
    /// messages by segment in chronological order.
    pub fn from_candidates(index: &MemoryIndex, candidates: &CandidateSet, query: Query) -> Self {
        let segments = index
            .segments
            .iter()
            .filter(|s| candidates.expanded_segment_ids.contains(&s.segment_id))
            .map(|s| SegmentMessages {
                segment_id: s.segment_id.clone(),
                messages: s
                    .msg_ids
                    .iter()
                    .filter_map(|id| index.history.get(id).cloned())
                    .collect(),
            })
            .collect();
        Self { query, segments }
    }

    /// M(C): all candidate message ids.
    pub fn candidate_ids(&self) -> BTreeSet<String> {
        self.segments
            .iter()
            .flat_map(|s| s.messages.iter().map(|m| m.msg_id.clone()))
            .collect()
    }

    pub fn find_message(&self, msg_id: &str) -> Option<&Message> {
        self.segments
            .iter()
            .flat_map(|s| s.messages.iter())
            .find(|m| m.msg_id == msg_id)
    }
}

/// Judge-backed providers for the reward pipeline. Any of them may be absent;
/// a component that needs a missing one fails with `JudgeUnavailable`.
#[derive(Clone, Copy, Default)]
pub struct RewardProviders<'a> {
    pub evidence_judge: Option<&'a dyn EvidenceJudge>,
    pub answerer: Option<&'a dyn Answerer>,
    pub answer_judge: Option<&'a dyn AnswerJudge>,
}

/// r0: -2 on parse failure, 0.5 on schema failure, 1 when both pass.
pub fn score_format(parsed: &ParsedAction) -> f64 {
    if !parsed.parse_ok {
        PARSE_FAIL_REWARD
    } else if !parsed.schema_ok {
        SCHEMA_FAIL_REWARD
    } else {
        FORMAT_OK_REWARD
    }
}

/// r1, r2, r3 for a selection `U` against candidates `M(C)` and gold `A*`.
///
/// An empty gold set marks an abstention item: full coverage is awarded
/// exactly for the empty selection, and the empty correct selection scores
/// r3 = 1. The returned r3 is meaningful only at full coverage (`r2 = 2`);
/// the pipeline stores it as inactive otherwise.
pub fn score_selection(
    useful_msg: &[String],
    candidate_ids: &BTreeSet<String>,
    gold_ids: &BTreeSet<String>,
) -> (f64, f64, f64) {
    let unique: BTreeSet<&str> = useful_msg.iter().map(String::as_str).collect();
    let no_duplicates = unique.len() == useful_msg.len();
    let all_valid = unique.iter().all(|id| candidate_ids.contains(*id));
    let r1 = f64::from(u8::from(no_duplicates && all_valid));

    let overlap = unique
        .iter()
        .filter(|id| gold_ids.contains(**id))
        .count();

    let r2 = if gold_ids.is_empty() {
        if unique.is_empty() {
            2.0
        } else {
            0.0
        }
    } else {
        2.0 * overlap as f64 / gold_ids.len() as f64
    };

    let r3 = if unique.is_empty() {
        // "If an empty selection is correct, r3 = 1."
        1.0
    } else {
        overlap as f64 / unique.len() as f64
    };

    (r1, r2, r3)
}

/// r4: the evidence ids must equal the selection as a set, with no
/// duplicates.
pub fn score_alignment(distilled_info: &[EvidenceEntry], useful_msg: &[String]) -> f64 {
    let z_ids: Vec<&str> = distilled_info.iter().map(|e| e.msg_id.as_str()).collect();
    let z_set: BTreeSet<&str> = z_ids.iter().copied().collect();
    let u_set: BTreeSet<&str> = useful_msg.iter().map(String::as_str).collect();
    let no_duplicates = z_set.len() == z_ids.len();
    f64::from(u8::from(no_duplicates && z_set == u_set))
}

/// r5: fraction of evidence entries judged PASS. An empty evidence list on a
/// correctly-empty action scores 1 without calling the judge.
pub fn score_evidence(
    distilled_info: &[EvidenceEntry],
    source_segments: &[SegmentMessages],
    judge: &dyn EvidenceJudge,
) -> Result<(f64, Option<JudgeVerdict>), RewardError> {
    if distilled_info.is_empty() {
        return Ok((1.0, None));
    }
    let verdict = judge.judge_evidence(distilled_info, source_segments)?;
    let r5 = verdict.pass_count() as f64 / distilled_info.len() as f64;
    Ok((r5, Some(verdict)))
}

/// Renders evidence for the answerer: message ids are stripped, and the
/// speaker and timestamp of the source message are attached when resolvable.
pub fn render_evidence(
    distilled_info: &[EvidenceEntry],
    context: &EvaluationContext,
) -> Vec<RenderedEvidence> {
    distilled_info
        .iter()
        .map(|entry| {
            let source = context.find_message(&entry.msg_id);
            RenderedEvidence {
                info: entry.info.clone(),
                speaker: source.and_then(|m| m.speaker.clone()),
                timestamp: source.and_then(|m| m.timestamp.clone()),
            }
        })
        .collect()
}

/// Outcome of the answerability stage.
#[derive(Debug, Clone, PartialEq)]
pub struct AnswerabilityOutcome {
    pub r6: f64,
    pub r7: f64,
    pub generated_answer: String,
    pub verdict: AnswerVerdict,
}

/// r6 and r7: generate a downstream answer from the rendered evidence, judge
/// it, and attribute failures. r7 stays 1 on a wrong answer unless the judge
/// blames the evidence.
pub fn score_answerability(
    query: &Query,
    distilled_info: &[EvidenceEntry],
    gold: &GoldAnnotation,
    context: &EvaluationContext,
    answerer: &dyn Answerer,
    answer_judge: &dyn AnswerJudge,
) -> Result<AnswerabilityOutcome, RewardError> {
    let rendered = render_evidence(distilled_info, context);
    let generated_answer = answerer.answer(query, &rendered, &gold.question_type)?;
    let verdict = answer_judge.judge_answer(
        query,
        &gold.gold_answer,
        &rendered,
        &generated_answer,
        &gold.question_type,
    )?;
    let r6 = if verdict.correct { 2.0 } else { 0.0 };
    let r7 = if verdict.correct {
        1.0
    } else if verdict.info_is_failure_source {
        0.0
    } else {
        1.0
    };
    Ok(AnswerabilityOutcome {
        r6,
        r7,
        generated_answer,
        verdict,
    })
}

/// Runs the full decomposed-and-gated pipeline over one completion.
///
/// Parse failure short-circuits everything to (-2, -2). With a parseable but
/// schema-invalid completion only r0 is active. Otherwise r1-r4 are computed
/// deterministically, r5 only when the selection is valid and aligned, and
/// r6/r7 whenever the format gate is open.
pub fn evaluate_completion(
    completion_text: &str,
    context: &EvaluationContext,
    gold: &GoldAnnotation,
    providers: &RewardProviders,
) -> Result<RewardBreakdown, RewardError> {
    let parsed = parse_action(completion_text);
    let r0 = score_format(&parsed);

    if !parsed.parse_ok {
        return Ok(short_circuit(r0));
    }
    if !parsed.schema_ok {
        let scores = ComponentScores {
            r0,
            r1: 0.0,
            r2: 0.0,
            r3: 0.0,
            r4: 0.0,
            r5: 0.0,
            r6: 0.0,
            r7: 0.0,
        };
        let gates = scores.gates();
        let (r_sel, r_evd) = span_rewards(&scores, &gates);
        return Ok(RewardBreakdown {
            r0: RewardComponent::scored(r0),
            r1: RewardComponent::inactive(),
            r2: RewardComponent::inactive(),
            r3: RewardComponent::inactive(),
            r4: RewardComponent::inactive(),
            r5: RewardComponent::inactive(),
            r6: RewardComponent::inactive(),
            r7: RewardComponent::inactive(),
            gates,
            r_sel,
            r_evd,
            generated_answer: None,
            evidence_verdict: None,
            answer_verdict: None,
        });
    }

    let candidate_ids = context.candidate_ids();
    let (r1, r2, r3_raw) = score_selection(&parsed.useful_msg, &candidate_ids, &gold.gold_msg_ids);
    let r4 = score_alignment(&parsed.distilled_info, &parsed.useful_msg);

    let g_sel = r1 == 1.0;
    let g_cov = r2 == 2.0;
    let g_ali = r4 == 1.0;

    // Faithfulness is meaningful only once the evidence ids align with a
    // valid selection.
    let (r5, evidence_verdict) = if g_sel && g_ali {
        if parsed.distilled_info.is_empty() {
            (RewardComponent::scored(1.0), None)
        } else {
            let judge = providers
                .evidence_judge
                .ok_or(RewardError::JudgeUnavailable("evidence judge"))?;
            let (value, verdict) = score_evidence(&parsed.distilled_info, &context.segments, judge)?;
            (RewardComponent::scored(value), verdict)
        }
    } else {
        (RewardComponent::inactive(), None)
    };

    // Leaky exposure: answerability runs whenever the format gate is open.
    let answerer = providers
        .answerer
        .ok_or(RewardError::JudgeUnavailable("answerer"))?;
    let answer_judge = providers
        .answer_judge
        .ok_or(RewardError::JudgeUnavailable("answer judge"))?;
    let outcome = score_answerability(
        &context.query,
        &parsed.distilled_info,
        gold,
        context,
        answerer,
        answer_judge,
    )?;

    let scores = ComponentScores {
        r0,
        r1,
        r2,
        r3: if g_cov { r3_raw } else { 0.0 },
        r4,
        r5: r5.value,
        r6: outcome.r6,
        r7: outcome.r7,
    };
    let gates = scores.gates();
    debug_assert_eq!(
        (gates.g_sel, gates.g_cov, gates.g_ali),
        (g_sel, g_cov, g_ali)
    );
    let (r_sel, r_evd) = span_rewards(&scores, &gates);

    Ok(RewardBreakdown {
        r0: RewardComponent::scored(r0),
        r1: RewardComponent::scored(r1),
        r2: RewardComponent::scored(r2),
        r3: if g_cov {
            RewardComponent::scored(r3_raw)
        } else {
            RewardComponent::inactive()
        },
        r4: RewardComponent::scored(r4),
        r5,
        r6: RewardComponent::scored(outcome.r6),
        r7: RewardComponent::scored(outcome.r7),
        gates,
        r_sel,
        r_evd,
        generated_answer: Some(outcome.generated_answer),
        evidence_verdict,
        answer_verdict: Some(outcome.verdict),
    })
}

fn short_circuit(r0: f64) -> RewardBreakdown {
    RewardBreakdown {
        r0: RewardComponent::scored(r0),
        r1: RewardComponent::inactive(),
        r2: RewardComponent::inactive(),
        r3: RewardComponent::inactive(),
        r4: RewardComponent::inactive(),
        r5: RewardComponent::inactive(),
        r6: RewardComponent::inactive(),
        r7: RewardComponent::inactive(),
        gates: Gates {
            g_fmt: false,
            g_sel: false,
            g_cov: false,
            g_ali: false,
        },
        r_sel: r0,
        r_evd: r0,
        generated_answer: None,
        evidence_verdict: None,
        answer_verdict: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::serialize_action;
    use crate::providers::{OracleAnswerJudge, OracleAnswerer, OracleEvidenceJudge};
    use std::collections::BTreeMap;

    fn ids(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn strings(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn entries(pairs: &[(&str, &str)]) -> Vec<EvidenceEntry> {
        pairs
            .iter()
            .map(|(id, info)| EvidenceEntry {
                msg_id: id.to_string(),
                info: info.to_string(),
            })
            .collect()
    }

    #[test]
    fn format_reward_covers_all_three_values() {
        assert_eq!(score_format(&parse_action("{}")), SCHEMA_FAIL_REWARD);
        assert_eq!(score_format(&parse_action("nope")), PARSE_FAIL_REWARD);
        assert_eq!(
            score_format(&parse_action(r#"{"useful_msg":[],"distilled_info":[]}"#)),
            FORMAT_OK_REWARD
        );
    }

    #[test]
    fn selection_exact_match_maxes_all_three() {
        let (r1, r2, r3) =
            score_selection(&strings(&["a", "b"]), &ids(&["a", "b", "c"]), &ids(&["a", "b"]));
        assert_eq!((r1, r2, r3), (1.0, 2.0, 1.0));
    }

    #[test]
    fn selection_partial_coverage() {
        let (r1, r2, _) =
            score_selection(&strings(&["a"]), &ids(&["a", "b"]), &ids(&["a", "b"]));
        assert_eq!(r1, 1.0);
        assert_eq!(r2, 1.0);
    }

    #[test]
    fn duplicate_selection_fails_r1() {
        let (r1, _, _) = score_selection(&strings(&["a", "a"]), &ids(&["a"]), &ids(&["a"]));
        assert_eq!(r1, 0.0);
    }

    #[test]
    fn distractor_lowers_conciseness() {
        let (r1, r2, r3) = score_selection(
            &strings(&["a", "b", "x"]),
            &ids(&["a", "b", "x"]),
            &ids(&["a", "b"]),
        );
        assert_eq!(r1, 1.0);
        assert_eq!(r2, 2.0);
        assert!((r3 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn coverage_is_monotone_in_gold_overlap() {
        let gold = ids(&["a", "b", "c"]);
        let candidates = ids(&["a", "b", "c", "x", "y"]);
        let mut last = -1.0;
        for useful in [vec![], strings(&["x"]), strings(&["a"]), strings(&["a", "b"]), strings(&["a", "b", "c"])] {
            let (_, r2, _) = score_selection(&useful, &candidates, &gold);
            assert!(r2 >= last, "r2 not monotone at U={useful:?}");
            last = r2;
        }
        assert_eq!(last, 2.0);
    }

    #[test]
    fn abstention_rules() {
        // Empty selection on an abstention item opens the coverage gate.
        let (_, r2, r3) = score_selection(&[], &ids(&["a"]), &BTreeSet::new());
        assert_eq!((r2, r3), (2.0, 1.0));
        // Selecting anything on an abstention item closes it.
        let (_, r2, _) = score_selection(&strings(&["a"]), &ids(&["a"]), &BTreeSet::new());
        assert_eq!(r2, 0.0);
    }

    #[test]
    fn alignment_requires_exact_id_set() {
        let u = strings(&["a", "b"]);
        assert_eq!(score_alignment(&entries(&[("a", "x"), ("b", "y")]), &u), 1.0);
        assert_eq!(score_alignment(&entries(&[("a", "x")]), &u), 0.0);
        assert_eq!(score_alignment(&entries(&[]), &[]), 1.0);
        assert_eq!(
            score_alignment(&entries(&[("a", "x"), ("a", "y"), ("b", "z")]), &u),
            0.0
        );
    }

    fn fixture_judge(pairs: &[(&str, &str)]) -> OracleEvidenceJudge {
        OracleEvidenceJudge::new(
            pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect::<BTreeMap<_, _>>(),
        )
    }

    #[test]
    fn evidence_fraction() {
        let judge = fixture_judge(&[("a", "alpha fact"), ("b", "beta fact"), ("c", "gamma"), ("d", "delta")]);
        let z = entries(&[
            ("a", "the alpha fact holds"),
            ("b", "the beta fact holds"),
            ("c", "something unrelated"),
            ("d", "the delta holds"),
        ]);
        let (r5, verdict) = score_evidence(&z, &[], &judge).unwrap();
        assert_eq!(r5, 0.75);
        assert!(verdict.is_some());

        let (r5, verdict) = score_evidence(&[], &[], &judge).unwrap();
        assert_eq!(r5, 1.0);
        assert!(verdict.is_none());
    }

    fn toy_context(query: &str) -> EvaluationContext {
        let message = |id: &str, content: &str| Message {
            msg_id: id.into(),
            speaker: Some("Jon".into()),
            content: content.into(),
            image_caption: None,
            timestamp: Some("2023/01/29 (Sun) 14:32".into()),
            location: None,
        };
        EvaluationContext::new(
            Query::new(query),
            vec![SegmentMessages {
                segment_id: "s1/g1".into(),
                messages: vec![
                    message("a", "I have been to Paris yesterday"),
                    message("b", "Took a short trip to Rome last week"),
                    message("c", "My dance studio search continues"),
                    message("d", "The weather is nice"),
                    message("e", "Thinking about new flooring"),
                ],
            }],
        )
    }

    fn gold_for(answer: &str, gold_ids: &[&str]) -> GoldAnnotation {
        GoldAnnotation {
            gold_msg_ids: ids(gold_ids),
            gold_answer: answer.into(),
            question_type: "multi-hop".into(),
        }
    }

    #[test]
    fn answerability_correct_and_attributed_cases() {
        let context = toy_context("Which cities has Jon visited?");
        let gold = gold_for("Paris, Rome", &["a", "b"]);
        let z = entries(&[("a", "Jon visited Paris, Rome.")]);
        let outcome = score_answerability(
            &context.query,
            &z,
            &gold,
            &context,
            &OracleAnswerer,
            &OracleAnswerJudge,
        )
        .unwrap();
        assert_eq!((outcome.r6, outcome.r7), (2.0, 1.0));

        // Evidence lacking the answer: wrong and attributed to information.
        let z = entries(&[("c", "Jon searched for a studio.")]);
        let outcome = score_answerability(
            &context.query,
            &z,
            &gold,
            &context,
            &OracleAnswerer,
            &OracleAnswerJudge,
        )
        .unwrap();
        assert_eq!((outcome.r6, outcome.r7), (0.0, 0.0));
    }

    #[test]
    fn rendered_evidence_strips_ids_and_attaches_metadata() {
        let context = toy_context("q");
        let rendered = render_evidence(&entries(&[("a", "Jon visited Paris.")]), &context);
        assert_eq!(rendered.len(), 1);
        assert_eq!(rendered[0].speaker.as_deref(), Some("Jon"));
        assert_eq!(rendered[0].timestamp.as_deref(), Some("2023/01/29 (Sun) 14:32"));
    }

    fn oracle_providers<'a>(
        judge: &'a OracleEvidenceJudge,
        answerer: &'a OracleAnswerer,
        answer_judge: &'a OracleAnswerJudge,
    ) -> RewardProviders<'a> {
        RewardProviders {
            evidence_judge: Some(judge),
            answerer: Some(answerer),
            answer_judge: Some(answer_judge),
        }
    }

    #[test]
    fn perfect_action_attains_the_maxima() {
        let context = toy_context("Which cities has Jon visited?");
        let gold = gold_for("Paris, Rome", &["a", "b"]);
        let judge = fixture_judge(&[("a", "Jon visited Paris"), ("b", "Jon visited Rome")]);
        let providers = oracle_providers(&judge, &OracleAnswerer, &OracleAnswerJudge);

        let text = serialize_action(
            &strings(&["a", "b"]),
            &entries(&[
                ("a", "Jon visited Paris, Rome is next."),
                ("b", "Jon visited Rome after Paris."),
            ]),
        );
        let breakdown = evaluate_completion(&text, &context, &gold, &providers).unwrap();
        assert_eq!(breakdown.r_sel, MAX_SELECTION_REWARD);
        assert_eq!(breakdown.r_evd, MAX_EVIDENCE_REWARD);
        let s = breakdown.component_scores();
        assert_eq!(
            (s.r0, s.r1, s.r2, s.r3, s.r4, s.r5, s.r6, s.r7),
            (1.0, 1.0, 2.0, 1.0, 1.0, 1.0, 2.0, 1.0)
        );
    }

    #[test]
    fn unparseable_completion_short_circuits() {
        let context = toy_context("q");
        let gold = gold_for("x", &["a"]);
        let judge = fixture_judge(&[]);
        let providers = oracle_providers(&judge, &OracleAnswerer, &OracleAnswerJudge);
        let breakdown =
            evaluate_completion("total garbage", &context, &gold, &providers).unwrap();
        assert_eq!((breakdown.r_sel, breakdown.r_evd), (-2.0, -2.0));
        assert!(!breakdown.r1.active && !breakdown.r6.active);
    }

    #[test]
    fn schema_fail_scores_only_r0() {
        let context = toy_context("q");
        let gold = gold_for("x", &["a"]);
        let judge = fixture_judge(&[]);
        let providers = oracle_providers(&judge, &OracleAnswerer, &OracleAnswerJudge);
        let breakdown = evaluate_completion(
            r#"{"useful_msg":[],"distilled_info":[],"extra":1}"#,
            &context,
            &gold,
            &providers,
        )
        .unwrap();
        assert_eq!((breakdown.r_sel, breakdown.r_evd), (0.5, 0.5));
        assert!(!breakdown.gates.g_fmt);
        assert!(!breakdown.r6.active);
    }

    #[test]
    fn bad_id_with_partial_coverage_matches_hand_computation() {
        // Five gold messages, three selected correctly plus one invalid id:
        // r1 = 0, r2 = 1.2, wrong answer attributed to the evidence.
        let context = toy_context("Which cities has Jon visited?");
        let gold = GoldAnnotation {
            gold_msg_ids: ids(&["a", "b", "c", "d", "e"]),
            gold_answer: "an answer that no evidence contains".into(),
            question_type: "multi-hop".into(),
        };
        let judge = fixture_judge(&[]);
        let providers = oracle_providers(&judge, &OracleAnswerer, &OracleAnswerJudge);

        let text = serialize_action(
            &strings(&["a", "b", "c", "ZZ"]),
            &entries(&[("a", "x"), ("b", "y"), ("c", "z"), ("ZZ", "w")]),
        );
        let breakdown = evaluate_completion(&text, &context, &gold, &providers).unwrap();
        let s = breakdown.component_scores();
        assert_eq!(s.r1, 0.0);
        assert!((s.r2 - 1.2).abs() < 1e-12);
        assert_eq!((s.r6, s.r7), (0.0, 0.0));
        assert!((breakdown.r_sel - 2.2).abs() < 1e-12);
        assert!((breakdown.r_evd - 1.0).abs() < 1e-12);
        // r5 never ran: selection ids are invalid.
        assert!(!breakdown.r5.active);
    }

    #[test]
    fn empty_action_on_abstention_item_is_maximal() {
        let context = toy_context("What is Jon's blood type?");
        let gold = GoldAnnotation {
            gold_msg_ids: BTreeSet::new(),
            gold_answer: String::new(),
            question_type: "adversarial".into(),
        };
        let judge = fixture_judge(&[]);
        let providers = oracle_providers(&judge, &OracleAnswerer, &OracleAnswerJudge);
        let breakdown = evaluate_completion(
            r#"{"useful_msg":[],"distilled_info":[]}"#,
            &context,
            &gold,
            &providers,
        )
        .unwrap();
        assert_eq!(breakdown.r_sel, MAX_SELECTION_REWARD);
        assert_eq!(breakdown.r_evd, MAX_EVIDENCE_REWARD);
    }

    #[test]
    fn missing_judges_surface_as_unavailable() {
        let context = toy_context("q");
        let gold = gold_for("x", &["a"]);
        let err = evaluate_completion(
            r#"{"useful_msg":[],"distilled_info":[]}"#,
            &context,
            &gold,
            &RewardProviders::default(),
        )
        .unwrap_err();
        assert!(matches!(err, RewardError::JudgeUnavailable(_)));
    }
}

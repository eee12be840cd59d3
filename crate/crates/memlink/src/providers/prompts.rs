//! Prompt templates and rendering for the remote judge and answerer services.
//!
//! Templates use `{{NAME}}` placeholders; rendering is plain substitution so
//! the request bytes are a deterministic function of the inputs. JSON payload
//! blocks are pretty-printed for model readability.

use serde::{Deserialize, Serialize};

use crate::action::EvidenceEntry;
use crate::corpus::Query;

use super::{RenderedEvidence, SegmentMessages};

/// One chat-completion message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }
}

/// Default shared answering rules for assistant-style histories. Used for the
/// `{{COMMON_ANSWERER_RULES}}` slot unless configuration overrides it.
pub const DEFAULT_COMMON_ANSWERER_RULES: &str = "If the provided information is insufficient to answer the question, respond with \"Cannot be determined from the provided information.\"";

/// Evidence faithfulness and self-containedness judge template.
pub const EVIDENCE_JUDGE_TEMPLATE: &str = r#"You are a strict hallucination judge for distilled information from conversation.

You will be given:
1) Info_extracted: a list of {msg_id, info}.
2) Original_Segs: a list of conversation segments containing the original messages.

Data format of Original_Segs:
- The conversation history is a list of conversation segments.
- Each segment is a list of messages.
- Each message has the following fields:
  - `msg_id`: the id of the message.
  - `speaker` (optional): who said this message (e.g., "user", "assistant", or a username).
  - `content`: the text content of the message.
  - `image` (optional): the caption (text description) of an image that the speaker shared along with this message.
  - `timestamp` (optional): when the message was said by the speaker. It is in the format "YYYY/MM/DD (DayOfWeek) HH:MM" (e.g., "2023/05/30 (Tue) 23:39").
  - `location` (optional): the geographical location where the message was said by the speaker.
- Optional fields may be omitted.

Your job: For EACH {msg_id, info}, verify whether the info is supported by the TARGET MESSAGE (same msg_id) together with any permitted minimal nearby context in the SAME segment. Nearby context = prior messages within the SAME segment as the TARGET MESSAGE.

Important rules:
- You are not allowed to output anything to me except a single JSON object that exactly matches the "Output format" below. For "verdict", output exactly one of: "PASS" or "FAIL" (do NOT output the pipe symbol "|").
- Output cardinality: The "results" list MUST contain exactly one entry for EACH item in Info_extracted (no missing, no extra, no merging).
- For each entry {msg_id, info} in Info_extracted, first locate in Original_Segs the unique message whose `msg_id` equals this `msg_id`. Call this located message the TARGET MESSAGE (i.e., the "target msg_id message").
- Each info entry must be grounded primarily in the TARGET MESSAGE, plus minimal nearby conversational context when necessary. Nearby conversational context = prior messages within the SAME segment as the TARGET MESSAGE. You may use nearby conversational context to:
  1) resolve references/pronouns in the TARGET MESSAGE or in the info.
  2) recover the minimal conversational context needed to interpret what the TARGET MESSAGE is responding to.
- Speaker viewpoint rule:
  - Pronouns like "I/we/my" are from the perspective of the TARGET MESSAGE's speaker.
  - "you/your" refers to the conversational counterpart unless context indicates otherwise.
  - For reported speech/quotations, resolve pronouns based on context.
- Do NOT accept any claim that is not supported by the Original_Segs.

FAIL types:
- SUBJECT_MISMATCH: the subject/pronoun viewpoint is wrong.
- VOICE_INCONSISTENCY: narration voice switches inconsistently within the info.
- INFO_NOT_SELF_CONTAINED: Because the downstream model will NOT see Original_Segs and only receives Info_extracted plus the source message metadata (speaker, timestamp), each info must be self-contained by INCLUDING any minimal resolved referents and conversational context it depends on. Mark INFO_NOT_SELF_CONTAINED ONLY when the info itself omits necessary context (e.g., unresolved "this/that/it", "the second one", bare "yes/no"/reply-only content without stating what it responds to) such that it cannot be interpreted from the info plus the source metadata (speaker, timestamp) alone; do NOT use INFO_NOT_SELF_CONTAINED for merely needing nearby messages of the TARGET MESSAGE to VERIFY factual support.
- UNSUPPORTED: The info asserts content that is not supported by the TARGET MESSAGE OR by the permitted minimal nearby conversational context within the SAME segment. If the info can be supported by that permitted nearby conversational context, it is NOT UNSUPPORTED. Permitted minimal nearby conversational context = any prior messages within the SAME segment as the TARGET MESSAGE, used only as needed.
- TEMPORAL_ERROR: the info misrepresents temporal facts relative to the TARGET MESSAGE-e.g., changes event order, shifts time meaning ("last week"->"last month"), or over-precises a vague relative-time expression. However, it is NOT a TEMPORAL_ERROR to mention the message's own timestamp as the time the message was issued (if a timestamp exists), as long as the info does NOT use that timestamp to resolve/convert vague relative-time phrases (e.g., "last week", "recently") into specific dates.

Output format:
{
  "results": [
    {
      "msg_id": "a msg_id in Info_extracted",
      "verdict": "PASS"|"FAIL",
      "fail_types": [],
      "reason_in_a_sentence": ""
    }
  ]
}

Now judge the following:

Info_extracted:
{{INFO_EXTRACTED_JSON}}

Original_Segs:
{{ORIGINAL_SEGS_JSON}}"#;

/// Combined answer-correctness and failure-attribution judge template.
pub const ANSWER_JUDGE_TEMPLATE: &str = r#"You are supposed to conduct two tasks. You are not allowed to output anything to me except a single JSON object that exactly matches the "Output Format" below.

--- Task 1: determine the correctness of the generated answer ---

{{BENCHMARK_SPECIFIC_CORRECTNESS_RULES}}

Special rule for EMPTY gold answer: If Gold answer is an empty string, then the answer is CORRECT ONLY if the generated answer clearly indicates the question cannot be answered based on the provided information (e.g., insufficient info / cannot determine / some other information is given but the asked information is not). Otherwise WRONG.

Question: {{QUERY}}
{{GOLD_ANSWER_HEAD}}: {{GOLD_ANSWER}}
Generated answer: {{GENERATED_ANSWER}}

--- Task 2: diagnose the failure source ---

Task 2 is diagnostic only and must not override or revise the Task 1 correctness decision.

Besides judging whether the generated answer is CORRECT or WRONG, you will also diagnose where the error comes from if the answer is WRONG.

You will be given the same information that was provided to the answer generator.
Information format:
- Each item is distilled from ONE original message in the conversation.
- "info" describes what that message said.
- "speaker" describes who said this message.
- "timestamp" (optional) is when the message was said by the speaker. It can be used as a CALENDAR ANCHOR only when "timestamp" is not missing and "info" within the same item contains an explicit relative-time expression (e.g., "last month", "yesterday").

How to decide the failure source:
- If you judged the generated answer as CORRECT:
  - the_information_is_failure_source = "NO"
  - the_llm_is_failure_source = "NO"
- If you judged the generated answer as WRONG:
  - Set the_information_is_failure_source = "YES" iff, given the question, the provided information is insufficient, contradictory, ambiguous, or misleading such that even a reasonable model following the instructions (including answering "cannot be determined" when information is insufficient) could not reliably produce the gold answer.
    In particular, mere string overlap with the gold answer is NOT sufficient: the information must be query-aligned, i.e., it must contain enough grounding context to link the candidate answer to the exact entity and constraints asked in the question (e.g., which entity/object, attribute, timeframe, location, condition/scope, comparison target, exclusions/negations). If the information contains an answer-looking string but lacks the necessary context to match it to the question's constraints (so that multiple interpretations are plausible or the answer is easily misattributed), then this is an information failure => set to "YES".
    If the gold answer is EMPTY: set it to "YES" ONLY when the information clearly supports a specific non-empty answer that satisfies the question's constraints; otherwise, set it to "NO" and attribute any specific or misattributed answer to the LLM.
  - Set the_llm_is_failure_source = "YES" if the provided information contains enough correct support to derive the gold answer, but the generated answer is still wrong (e.g., misread, wrong reasoning, wrong conversion, ignores relevant info).

Provided information:
{{DISTILLED_EVIDENCE_JSON}}

--- Output Format ---

Output JSON ONLY. Do NOT output the pipe symbol "|".
Allowed values:
- generated_answer_is_correct_or_wrong: CORRECT or WRONG
- the_information_is_failure_source: YES or NO
- the_llm_is_failure_source: YES or NO
- reason_in_a_sentence: a short string
Output JSON ONLY in exactly this format:
{
  "generated_answer_is_correct_or_wrong": "CORRECT|WRONG",
  "the_information_is_failure_source": "YES|NO",
  "the_llm_is_failure_source": "YES|NO",
  "reason_in_a_sentence": ""
}"#;

/// Answer prompt for human-human histories (all but open-domain questions).
pub const CONVERSATIONAL_ANSWER_TEMPLATE: &str = r#"Provided information:
{{PROVIDED_INFORMATION_JSON}}

Based on the provided information, write a short answer for the following question.
For questions that require answering a date or time: If the information expresses time relatively (e.g., "last week", "the week before DD Month YYYY") and does not provide enough information to convert unambiguously, keep the relative wording exactly as in the information.
Use the format "DD Month YYYY" ONLY when the information contains a specific calendar date or clearly allows conversion.
For relative time expressions, convert only when the information provides a clear anchor; for example, if the information allows resolving "last year" to a specific year, answer with that year instead of the phrase "last year."
Only provide one year, date, or time, without any extra responses.
If the question is about duration, answer in the form of several years, months, or days.
Be explicit when possible.

If the provided information is insufficient to answer the question, respond with "Cannot be determined from the provided information."

Question: {{QUERY}}

Short Answer:"#;

/// Answer prompt for open-domain questions over human-human histories.
pub const OPEN_DOMAIN_ANSWER_TEMPLATE: &str = r#"Provided information:
{{PROVIDED_INFORMATION_JSON}}

Based on the provided information, write a short answer for the following question.
The question may need you to analyze and infer the answer from the information.

Question: {{QUERY}}

Short Answer:"#;

/// Answer prompt for user-assistant histories (system + user messages).
pub const ASSISTANT_ANSWER_SYSTEM: &str = "You are a helpful assistant.";
pub const ASSISTANT_ANSWER_TEMPLATE: &str = r#"Question: {{QUERY}}

Question was issued at: {{QUERY_DATE}}

Please answer the question based on the provided information about your conversation with the user.

{{COMMON_ANSWERER_RULES}}

Provided information:
{{PROVIDED_INFORMATION_JSON}}"#;

const CONVERSATIONAL_RULES: &str = r#"Your first task is to label an answer to a question as 'CORRECT' or 'WRONG'. You will be given the following data:
    (1) a question (posed by one user to another user),
    (2) a 'gold' (ground truth) answer,
    (3) a generated answer
which you will score as CORRECT/WRONG.

The point of the question is to ask about something one user should know about the other user based on their prior conversations.
The gold answer will usually be a concise and short answer that includes the referenced topic, for example:
Question: Do you remember what I got the last time I went to Hawaii?
Gold answer: A shell necklace
The generated answer might be much longer, but you should be generous with your grading - as long as it touches on the same topic as the gold answer, it should be counted as CORRECT.

For time related questions, the gold answer will be a specific date, month, year, etc. The generated answer might be much longer or use relative time references (like "last Tuesday" or "next month"), but you should be generous with your grading - as long as it refers to the same date or time period as the gold answer, it should be counted as CORRECT. Even if the format differs (e.g., "May 7th" vs "7 May"), consider it CORRECT if it's the same date."#;

const ASSISTANT_RULES_DEFAULT: &str = "Your first task is to label a generated answer to a question as 'CORRECT' or 'WRONG'. I will give you a question, a gold answer (i.e., the correct answer to the question), and a generated answer from a model. Please label as CORRECT if the generated answer contains the gold answer. Otherwise, label as WRONG. If the generated answer is equivalent to the gold answer or contains all the intermediate steps to get the gold answer, you should also label as CORRECT. If the generated answer only contains a subset of the information required by the gold answer, label as WRONG.";

const ASSISTANT_RULES_TEMPORAL: &str = "Your first task is to label a generated answer to a question as 'CORRECT' or 'WRONG'. I will give you a question, a gold answer (i.e., the correct answer to the question), and a generated answer from a model. Please label as CORRECT if the generated answer contains the gold answer. Otherwise, label as WRONG. If the generated answer is equivalent to the gold answer or contains all the intermediate steps to get the gold answer, you should also label as CORRECT. If the generated answer only contains a subset of the information required by the gold answer, label as WRONG. In addition, do not penalize off-by-one errors for the number of days. If the question asks for the number of days/weeks/months, etc., and the model makes off-by-one errors (e.g., predicting 19 days when the answer is 18), the model's generated answer is still CORRECT.";

const ASSISTANT_RULES_KNOWLEDGE_UPDATE: &str = "Your first task is to label a generated answer to a question as 'CORRECT' or 'WRONG'. I will give you a question, a gold answer (i.e., the correct answer to the question), and a generated answer from a model. Please label as CORRECT if the generated answer contains the gold answer. Otherwise, label as WRONG. If the generated answer contains some previous information along with an updated answer, the generated answer should be considered as CORRECT as long as the updated answer is the required answer.";

const ASSISTANT_RULES_PREFERENCE: &str = "Your first task is to label a generated answer to a question as 'CORRECT' or 'WRONG'. I will give you a question, a rubric for desired personalized response, and a generated answer from a model. Please label as CORRECT if the generated answer satisfies the desired response. Otherwise, label as WRONG. The model does not need to reflect all the points in the rubric. The generated answer is CORRECT as long as it recalls and utilizes the user's personal information correctly.";

const ASSISTANT_RULES_ABSTENTION: &str = "Your first task is to label a generated answer to a question as 'CORRECT' or 'WRONG'. I will give you an unanswerable question, an explanation, and a generated answer from a model. Please label as CORRECT if the model correctly identifies the question as unanswerable from the provided information. The model could say that the information is incomplete, or some other information is given but the asked information is not.";

/// Question-type families that select prompt variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum QuestionKind {
    Conversational,
    ConversationalOpenDomain,
    Assistant,
    AssistantTemporal,
    AssistantKnowledgeUpdate,
    AssistantPreference,
    AssistantAbstention,
}

fn classify(question_type: &str) -> QuestionKind {
    match question_type {
        "single-session-user" | "single-session-assistant" | "multi-session" => {
            QuestionKind::Assistant
        }
        "temporal-reasoning" => QuestionKind::AssistantTemporal,
        "knowledge-update" => QuestionKind::AssistantKnowledgeUpdate,
        "single-session-preference" => QuestionKind::AssistantPreference,
        "abstention" => QuestionKind::AssistantAbstention,
        "open-domain" | "open_domain" => QuestionKind::ConversationalOpenDomain,
        t if t.ends_with("_abs") => QuestionKind::AssistantAbstention,
        _ => QuestionKind::Conversational,
    }
}

/// The correctness-rule block embedded into the answer judge prompt.
pub fn correctness_rules(question_type: &str) -> &'static str {
    match classify(question_type) {
        QuestionKind::Assistant => ASSISTANT_RULES_DEFAULT,
        QuestionKind::AssistantTemporal => ASSISTANT_RULES_TEMPORAL,
        QuestionKind::AssistantKnowledgeUpdate => ASSISTANT_RULES_KNOWLEDGE_UPDATE,
        QuestionKind::AssistantPreference => ASSISTANT_RULES_PREFERENCE,
        QuestionKind::AssistantAbstention => ASSISTANT_RULES_ABSTENTION,
        QuestionKind::Conversational | QuestionKind::ConversationalOpenDomain => {
            CONVERSATIONAL_RULES
        }
    }
}

/// Label for the gold-answer line in the judge prompt.
pub fn gold_answer_head(question_type: &str) -> &'static str {
    match classify(question_type) {
        QuestionKind::AssistantPreference => "Rubric",
        QuestionKind::AssistantAbstention => "Explanation",
        _ => "Gold answer",
    }
}

/// Serializes evidence entries for the `Info_extracted` slot.
pub fn evidence_entries_json(entries: &[EvidenceEntry]) -> String {
    serde_json::to_string_pretty(entries).expect("entry serialization cannot fail")
}

/// Serializes source segments for the `Original_Segs` slot: a list of
/// segments, each a list of message objects.
pub fn segments_json(segments: &[SegmentMessages]) -> String {
    let nested: Vec<_> = segments.iter().map(|s| &s.messages).collect();
    serde_json::to_string_pretty(&nested).expect("segment serialization cannot fail")
}

/// Serializes rendered evidence for the provided-information slots.
pub fn rendered_evidence_json(evidence: &[RenderedEvidence]) -> String {
    serde_json::to_string_pretty(evidence).expect("evidence serialization cannot fail")
}

/// Renders the evidence judge request content.
pub fn render_evidence_judge_prompt(
    entries: &[EvidenceEntry],
    segments: &[SegmentMessages],
) -> String {
    EVIDENCE_JUDGE_TEMPLATE
        .replace("{{INFO_EXTRACTED_JSON}}", &evidence_entries_json(entries))
        .replace("{{ORIGINAL_SEGS_JSON}}", &segments_json(segments))
}

/// Renders the combined answer judge request content.
pub fn render_answer_judge_prompt(
    query: &Query,
    gold_answer: &str,
    evidence: &[RenderedEvidence],
    generated_answer: &str,
    question_type: &str,
) -> String {
    ANSWER_JUDGE_TEMPLATE
        .replace(
            "{{BENCHMARK_SPECIFIC_CORRECTNESS_RULES}}",
            correctness_rules(question_type),
        )
        .replace("{{QUERY}}", &query.text)
        .replace("{{GOLD_ANSWER_HEAD}}", gold_answer_head(question_type))
        .replace("{{GOLD_ANSWER}}", gold_answer)
        .replace("{{GENERATED_ANSWER}}", generated_answer)
        .replace("{{DISTILLED_EVIDENCE_JSON}}", &rendered_evidence_json(evidence))
}

/// Renders the downstream answer request as chat messages.
pub fn render_answer_messages(
    query: &Query,
    evidence: &[RenderedEvidence],
    question_type: &str,
    common_answerer_rules: &str,
) -> Vec<ChatMessage> {
    let info = rendered_evidence_json(evidence);
    match classify(question_type) {
        QuestionKind::ConversationalOpenDomain => vec![ChatMessage::user(
            OPEN_DOMAIN_ANSWER_TEMPLATE
                .replace("{{PROVIDED_INFORMATION_JSON}}", &info)
                .replace("{{QUERY}}", &query.text),
        )],
        QuestionKind::Conversational => vec![ChatMessage::user(
            CONVERSATIONAL_ANSWER_TEMPLATE
                .replace("{{PROVIDED_INFORMATION_JSON}}", &info)
                .replace("{{QUERY}}", &query.text),
        )],
        _ => vec![
            ChatMessage::system(ASSISTANT_ANSWER_SYSTEM),
            ChatMessage::user(
                ASSISTANT_ANSWER_TEMPLATE
                    .replace("{{QUERY}}", &query.text)
                    .replace("{{QUERY_DATE}}", query.issued_at.as_deref().unwrap_or(""))
                    .replace("{{COMMON_ANSWERER_RULES}}", common_answerer_rules)
                    .replace("{{PROVIDED_INFORMATION_JSON}}", &info),
            ),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_entries() -> Vec<EvidenceEntry> {
        vec![EvidenceEntry {
            msg_id: "D2:4".into(),
            info: "Jon said he had been to Paris yesterday.".into(),
        }]
    }

    #[test]
    fn evidence_judge_prompt_substitutes_all_placeholders() {
        let prompt = render_evidence_judge_prompt(&sample_entries(), &[]);
        assert!(prompt.starts_with("You are a strict hallucination judge"));
        assert!(prompt.contains("\"msg_id\": \"D2:4\""));
        assert!(!prompt.contains("{{"));
    }

    #[test]
    fn answer_judge_prompt_selects_rules_by_question_type() {
        let query = Query::new("How many days was the trip?");
        let prompt =
            render_answer_judge_prompt(&query, "18 days", &[], "19 days", "temporal-reasoning");
        assert!(prompt.contains("do not penalize off-by-one errors"));
        assert!(prompt.contains("Gold answer: 18 days"));
        assert!(!prompt.contains("{{"));

        let prompt = render_answer_judge_prompt(&query, "a rubric", &[], "x", "single-session-preference");
        assert!(prompt.contains("Rubric: a rubric"));

        let prompt = render_answer_judge_prompt(&query, "explained", &[], "x", "abstention");
        assert!(prompt.contains("Explanation: explained"));

        let prompt = render_answer_judge_prompt(&query, "Paris", &[], "x", "single-hop");
        assert!(prompt.contains("posed by one user to another user"));
    }

    #[test]
    fn assistant_answer_prompt_is_system_plus_user() {
        let mut query = Query::new("What vehicle model am I working on?");
        query.issued_at = Some("2023/06/01 (Thu) 10:00".into());
        let messages = render_answer_messages(&query, &[], "single-session-user", DEFAULT_COMMON_ANSWERER_RULES);
        assert_eq!(messages.len(), 2);
        assert_eq!(messages[0].role, "system");
        assert!(messages[1].content.contains("Question was issued at: 2023/06/01 (Thu) 10:00"));
        assert!(messages[1].content.contains(DEFAULT_COMMON_ANSWERER_RULES));
    }

    #[test]
    fn open_domain_answer_prompt_is_single_user_message() {
        let messages = render_answer_messages(
            &Query::new("What hobby suits Jon?"),
            &[],
            "open-domain",
            DEFAULT_COMMON_ANSWERER_RULES,
        );
        assert_eq!(messages.len(), 1);
        assert!(messages[0].content.contains("analyze and infer"));
    }

    #[test]
    fn templates_carry_no_unknown_placeholders() {
        // Each renderer must substitute every slot in its template.
        let q = Query::new("q");
        for qt in ["single-hop", "open-domain", "multi-session", "abstention"] {
            for m in render_answer_messages(&q, &[], qt, "rules") {
                assert!(!m.content.contains("{{"), "unsubstituted slot for {qt}");
            }
        }
    }
}

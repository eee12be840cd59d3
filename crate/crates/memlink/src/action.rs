//! Structured evidence-distillation actions.
//!
//! A completion is expected to be a single JSON object with exactly two keys:
//!
//! ```json
//! {
//!   "useful_msg": [ { "msg_id": "<id>" } ],
//!   "distilled_info": [ { "msg_id": "<id>", "info": "<text>" } ]
//! }
//! ```
//!
//! Parsing is strict by design: code fences, extra keys, duplicate keys, and
//! literal placeholder values all fail validation. The format reward is the
//! training signal for output discipline, so nothing is repaired here.

use std::ops::Range;

use serde::{Deserialize, Serialize};

/// The literal key string that opens the evidence span of a completion.
pub const EVIDENCE_KEY: &str = "\"distilled_info\"";

/// One distilled evidence entry: a source message id plus a self-contained
/// statement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceEntry {
    pub msg_id: String,
    pub info: String,
}

/// Outcome of parsing one completion.
///
/// `schema_ok` implies `parse_ok`. `useful_msg` and `distilled_info` are
/// populated only for schema-valid completions; there is no best-effort
/// extraction from malformed output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAction {
    pub useful_msg: Vec<String>,
    pub distilled_info: Vec<EvidenceEntry>,
    pub parse_ok: bool,
    pub schema_ok: bool,
}

impl ParsedAction {
    /// The mandated no-evidence output: both arrays empty.
    pub fn is_empty_action(&self) -> bool {
        self.schema_ok && self.useful_msg.is_empty() && self.distilled_info.is_empty()
    }

    pub fn evidence_ids(&self) -> Vec<&str> {
        self.distilled_info.iter().map(|e| e.msg_id.as_str()).collect()
    }

    fn invalid(parse_ok: bool) -> Self {
        Self {
            useful_msg: Vec::new(),
            distilled_info: Vec::new(),
            parse_ok,
            schema_ok: false,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireAction {
    useful_msg: Vec<WireSelection>,
    distilled_info: Vec<EvidenceEntryWire>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireSelection {
    msg_id: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EvidenceEntryWire {
    msg_id: String,
    info: String,
}

/// Parses and validates one completion.
///
/// `parse_ok` records whether the text is valid JSON at all; `schema_ok`
/// additionally requires the exact two-key object shape with no placeholder
/// values. Duplicate top-level keys are rejected.
pub fn parse_action(completion_text: &str) -> ParsedAction {
    let parse_ok = serde_json::from_str::<serde_json::Value>(completion_text).is_ok();
    if !parse_ok {
        return ParsedAction::invalid(false);
    }

    let wire: WireAction = match serde_json::from_str(completion_text) {
        Ok(w) => w,
        Err(_) => return ParsedAction::invalid(true),
    };

    let has_placeholder = wire.useful_msg.iter().any(|s| s.msg_id == "<id>")
        || wire
            .distilled_info
            .iter()
            .any(|e| e.msg_id == "<id>" || e.info == "<text>");
    if has_placeholder {
        return ParsedAction::invalid(true);
    }

    ParsedAction {
        useful_msg: wire.useful_msg.into_iter().map(|s| s.msg_id).collect(),
        distilled_info: wire
            .distilled_info
            .into_iter()
            .map(|e| EvidenceEntry {
                msg_id: e.msg_id,
                info: e.info,
            })
            .collect(),
        parse_ok: true,
        schema_ok: true,
    }
}

/// Serializes a selection and evidence list to the wire format.
pub fn serialize_action(useful_msg: &[String], distilled_info: &[EvidenceEntry]) -> String {
    #[derive(Serialize)]
    struct Out<'a> {
        useful_msg: Vec<SelOut<'a>>,
        distilled_info: &'a [EvidenceEntry],
    }
    #[derive(Serialize)]
    struct SelOut<'a> {
        msg_id: &'a str,
    }
    serde_json::to_string(&Out {
        useful_msg: useful_msg.iter().map(|m| SelOut { msg_id: m }).collect(),
        distilled_info,
    })
    .expect("action serialization cannot fail")
}

/// Maps text to token spans (byte ranges). Live trainers plug in the policy
/// model's tokenizer; the reference splits on whitespace, emitting
/// alphanumeric runs and single punctuation characters.
pub trait Tokenizer: Send + Sync {
    fn token_spans(&self, text: &str) -> Vec<Range<usize>>;

    fn token_count(&self, text: &str) -> usize {
        self.token_spans(text).len()
    }
}

/// Reference tokenizer: alphanumeric/underscore runs and single
/// non-whitespace symbols. Fine-grained enough that JSON punctuation does not
/// glue the two spans together.
#[derive(Debug, Clone, Copy, Default)]
pub struct CharClassTokenizer;

impl Tokenizer for CharClassTokenizer {
    fn token_spans(&self, text: &str) -> Vec<Range<usize>> {
        let mut spans = Vec::new();
        let mut run_start: Option<usize> = None;
        for (idx, ch) in text.char_indices() {
            if ch.is_alphanumeric() || ch == '_' {
                if run_start.is_none() {
                    run_start = Some(idx);
                }
                continue;
            }
            if let Some(start) = run_start.take() {
                spans.push(start..idx);
            }
            if !ch.is_whitespace() {
                spans.push(idx..idx + ch.len_utf8());
            }
        }
        if let Some(start) = run_start {
            spans.push(start..text.len());
        }
        spans
    }
}

/// Token-index split of a completion into selection and evidence spans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanSplit {
    pub selection_span: Range<usize>,
    pub evidence_span: Range<usize>,
    pub split_found: bool,
}

impl SpanSplit {
    pub fn token_count(&self) -> usize {
        self.evidence_span.end
    }

    /// True when token `t` belongs to the evidence span.
    pub fn is_evidence_token(&self, t: usize) -> bool {
        self.split_found && self.evidence_span.contains(&t)
    }

    /// A split covering `n` tokens with no evidence span.
    pub fn selection_only(n: usize) -> Self {
        Self {
            selection_span: 0..n,
            evidence_span: n..n,
            split_found: false,
        }
    }
}

/// Splits a completion at the first occurrence of the literal
/// `"distilled_info"` key.
///
/// Tokens strictly before the key's first character form the selection span;
/// the key and everything after form the evidence span. When the key is
/// absent the whole completion is selection-span only.
pub fn split_spans(completion_text: &str, tokenizer: &dyn Tokenizer) -> SpanSplit {
    let spans = tokenizer.token_spans(completion_text);
    let n = spans.len();
    match completion_text.find(EVIDENCE_KEY) {
        None => SpanSplit::selection_only(n),
        Some(key_start) => {
            // A token straddling the key start belongs to the evidence span:
            // the key token itself must carry the evidence advantage.
            let s = spans.iter().take_while(|r| r.end <= key_start).count();
            SpanSplit {
                selection_span: 0..s,
                evidence_span: s..n,
                split_found: true,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const VALID: &str = r#"{"useful_msg":[{"msg_id":"D1:2"}],"distilled_info":[{"msg_id":"D1:2","info":"Jon visited Paris."}]}"#;

    #[test]
    fn valid_action_parses() {
        let parsed = parse_action(VALID);
        assert!(parsed.parse_ok && parsed.schema_ok);
        assert_eq!(parsed.useful_msg, vec!["D1:2"]);
        assert_eq!(parsed.distilled_info.len(), 1);
        assert_eq!(parsed.distilled_info[0].info, "Jon visited Paris.");
    }

    #[test]
    fn empty_action_is_schema_valid() {
        let parsed = parse_action(r#"{"useful_msg":[],"distilled_info":[]}"#);
        assert!(parsed.parse_ok && parsed.schema_ok);
        assert!(parsed.is_empty_action());
    }

    #[test]
    fn non_json_fails_both_flags() {
        let parsed = parse_action("not json at all");
        assert!(!parsed.parse_ok);
        assert!(!parsed.schema_ok);
    }

    #[test]
    fn code_fences_fail_parse() {
        let fenced = format!("```json\n{VALID}\n```");
        let parsed = parse_action(&fenced);
        assert!(!parsed.parse_ok);
    }

    #[test]
    fn extra_key_fails_schema_only() {
        let parsed =
            parse_action(r#"{"useful_msg":[],"distilled_info":[],"notes":"extra"}"#);
        assert!(parsed.parse_ok);
        assert!(!parsed.schema_ok);
    }

    #[test]
    fn missing_key_fails_schema() {
        let parsed = parse_action(r#"{"useful_msg":[]}"#);
        assert!(parsed.parse_ok);
        assert!(!parsed.schema_ok);
    }

    #[test]
    fn duplicate_top_level_key_fails_schema() {
        let parsed =
            parse_action(r#"{"useful_msg":[],"useful_msg":[],"distilled_info":[]}"#);
        assert!(parsed.parse_ok);
        assert!(!parsed.schema_ok);
    }

    #[test]
    fn placeholder_values_fail_schema() {
        let parsed = parse_action(
            r#"{"useful_msg":[{"msg_id":"<id>"}],"distilled_info":[{"msg_id":"<id>","info":"<text>"}]}"#,
        );
        assert!(parsed.parse_ok);
        assert!(!parsed.schema_ok);
    }

    #[test]
    fn wrong_entry_shape_fails_schema() {
        let parsed = parse_action(r#"{"useful_msg":["D1:1"],"distilled_info":[]}"#);
        assert!(parsed.parse_ok);
        assert!(!parsed.schema_ok);
    }

    #[test]
    fn split_at_evidence_key() {
        let tokenizer = CharClassTokenizer;
        let split = split_spans(VALID, &tokenizer);
        assert!(split.split_found);
        let key_start = VALID.find(EVIDENCE_KEY).unwrap();
        let spans = tokenizer.token_spans(VALID);
        // Every selection token sits strictly before the key.
        for r in &spans[split.selection_span.clone()] {
            assert!(r.end <= key_start);
        }
        // The first evidence token starts the key's opening quote.
        assert_eq!(spans[split.evidence_span.start].start, key_start);
        assert_eq!(split.selection_span.end, split.evidence_span.start);
        assert_eq!(split.evidence_span.end, spans.len());
    }

    #[test]
    fn missing_key_is_selection_only() {
        let split = split_spans("no evidence here at all", &CharClassTokenizer);
        assert!(!split.split_found);
        assert!(split.evidence_span.is_empty());
        assert_eq!(split.selection_span, 0..5);
    }

    #[test]
    fn split_uses_first_occurrence() {
        let text = r#"prefix "distilled_info" mention {"useful_msg":[],"distilled_info":[]}"#;
        let split = split_spans(text, &CharClassTokenizer);
        let spans = CharClassTokenizer.token_spans(text);
        let first = text.find(EVIDENCE_KEY).unwrap();
        assert_eq!(spans[split.evidence_span.start].start, first);
    }

    #[test]
    fn serialized_actions_round_trip() {
        let entries = vec![EvidenceEntry {
            msg_id: "D2:4".into(),
            info: "Jon said he had been to Paris yesterday.".into(),
        }];
        let text = serialize_action(&["D2:4".to_string()], &entries);
        let parsed = parse_action(&text);
        assert!(parsed.schema_ok);
        assert_eq!(parsed.useful_msg, vec!["D2:4"]);
        assert_eq!(parsed.distilled_info, entries);
        assert!(split_spans(&text, &CharClassTokenizer).split_found);
    }

    proptest! {
        #[test]
        fn spans_partition_the_token_range(text in ".{0,200}") {
            let tokenizer = CharClassTokenizer;
            let split = split_spans(&text, &tokenizer);
            let n = tokenizer.token_count(&text);
            prop_assert_eq!(split.selection_span.len() + split.evidence_span.len(), n);
            prop_assert_eq!(split.selection_span.end, split.evidence_span.start);
            prop_assert_eq!(split.evidence_span.is_empty(), !split.split_found);
        }

        #[test]
        fn round_trip_identity_on_valid_actions(
            ids in proptest::collection::vec("[A-Za-z0-9:]{1,8}", 0..5),
            infos in proptest::collection::vec("[a-zA-Z0-9 .,]{1,40}", 0..5),
        ) {
            let entries: Vec<EvidenceEntry> = ids
                .iter()
                .zip(&infos)
                .map(|(id, info)| EvidenceEntry { msg_id: id.clone(), info: info.clone() })
                .collect();
            let text = serialize_action(&ids, &entries);
            let parsed = parse_action(&text);
            prop_assert!(parsed.parse_ok && parsed.schema_ok);
            prop_assert_eq!(parsed.useful_msg, ids);
            prop_assert_eq!(parsed.distilled_info, entries);
        }
    }
}

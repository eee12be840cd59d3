//! Raw-history data model and ingestion.
//!
//! A [`History`] is an ordered list of sessions, each an ordered list of
//! messages. [`load_history`] normalizes benchmark-shaped conversation files
//! (human-human with named speakers, or user-assistant with role strings)
//! into this one model, generating `D{session}:{message}` identifiers when a
//! message has none.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while loading or querying a history.
#[derive(Debug, Error)]
pub enum CorpusError {
    /// Input document does not match the canonical history schema.
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    /// Two messages (explicit or generated) share one id.
    #[error("duplicate message id \"{0}\"")]
    DuplicateId(String),
    /// No message with the requested id exists.
    #[error("message id \"{0}\" not found")]
    NotFound(String),
}

/// One conversational message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub msg_id: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub speaker: Option<String>,
    pub content: String,
    /// Textual caption of an attached image, when one was shared.
    #[serde(rename = "image", skip_serializing_if = "Option::is_none", default)]
    pub image_caption: Option<String>,
    /// Calendar string in the form "YYYY/MM/DD (Dow) HH:MM".
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timestamp: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub location: Option<String>,
}

impl Message {
    /// Content plus the image caption, when present. This is the text that
    /// feeds compression and embedding; captions are part of what a message
    /// "says".
    pub fn full_text(&self) -> String {
        match &self.image_caption {
            Some(caption) if !caption.trim().is_empty() => {
                format!("{} {}", self.content, caption)
            }
            _ => self.content.clone(),
        }
    }
}

/// One session: an ordered run of messages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub messages: Vec<Message>,
}

/// A full multi-session conversation history.
///
/// Immutable after construction; the id map makes [`History::lookup`] O(1)
/// amortized.
#[derive(Debug, Clone)]
pub struct History {
    sessions: Vec<Session>,
    by_id: HashMap<String, (usize, usize)>,
}

impl PartialEq for History {
    fn eq(&self, other: &Self) -> bool {
        self.sessions == other.sessions
    }
}
impl Eq for History {}

impl Serialize for History {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire<'a> {
            sessions: &'a [Session],
        }
        Wire {
            sessions: &self.sessions,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for History {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            sessions: Vec<Session>,
        }
        let wire = Wire::deserialize(deserializer)?;
        History::from_sessions(wire.sessions).map_err(serde::de::Error::custom)
    }
}

impl History {
    /// Builds a history from sessions, rejecting colliding message ids.
    pub fn from_sessions(sessions: Vec<Session>) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::new();
        for (si, session) in sessions.iter().enumerate() {
            for (mi, message) in session.messages.iter().enumerate() {
                if by_id.insert(message.msg_id.clone(), (si, mi)).is_some() {
                    return Err(CorpusError::DuplicateId(message.msg_id.clone()));
                }
            }
        }
        Ok(Self { sessions, by_id })
    }

    pub fn sessions(&self) -> &[Session] {
        &self.sessions
    }

    /// O(1) message lookup by id.
    pub fn lookup(&self, msg_id: &str) -> Result<&Message, CorpusError> {
        self.get(msg_id)
            .ok_or_else(|| CorpusError::NotFound(msg_id.to_string()))
    }

    pub fn get(&self, msg_id: &str) -> Option<&Message> {
        let &(si, mi) = self.by_id.get(msg_id)?;
        Some(&self.sessions[si].messages[mi])
    }

    pub fn contains(&self, msg_id: &str) -> bool {
        self.by_id.contains_key(msg_id)
    }

    /// All messages in chronological order (session order, then in-session
    /// order).
    pub fn messages(&self) -> impl Iterator<Item = &Message> {
        self.sessions.iter().flat_map(|s| s.messages.iter())
    }

    pub fn message_count(&self) -> usize {
        self.sessions.iter().map(|s| s.messages.len()).sum()
    }

    /// Global chronological position of a message, or None when unknown.
    pub fn chrono_position(&self, msg_id: &str) -> Option<usize> {
        let &(si, mi) = self.by_id.get(msg_id)?;
        let before: usize = self.sessions[..si].iter().map(|s| s.messages.len()).sum();
        Some(before + mi)
    }

    /// Serializes to the canonical history file format.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("history serialization cannot fail")
    }
}

/// A question posed against a history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub issued_at: Option<String>,
}

impl Query {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            issued_at: None,
        }
    }
}

/// Gold annotations for one query: the answer-supporting message ids and the
/// reference answer. An empty `gold_answer` marks an abstention item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAnnotation {
    pub gold_msg_ids: BTreeSet<String>,
    pub gold_answer: String,
    pub question_type: String,
}

impl GoldAnnotation {
    /// True when the correct behavior is declaring the answer unsupported.
    pub fn is_abstention(&self) -> bool {
        self.gold_answer.is_empty()
    }

    /// Checks that every gold id resolves in the history.
    pub fn validate_against(&self, history: &History) -> Result<(), CorpusError> {
        for id in &self.gold_msg_ids {
            if !history.contains(id) {
                return Err(CorpusError::NotFound(id.clone()));
            }
        }
        Ok(())
    }
}

/// Parses a canonical history document.
///
/// Accepted shape:
/// `{"sessions":[{"session_id":str,"timestamp":str?,"messages":[{"msg_id":str?,
/// "speaker":str?,"content":str,"image":str?,"timestamp":str?,"location":str?}]}]}`
///
/// `role` is accepted as an alias for `speaker`. Messages without a `msg_id`
/// get `D{session_index}:{message_index}` (both 1-based). A message without a
/// timestamp inherits the session-level one. Unknown fields are ignored.
pub fn load_history(raw_document: &str) -> Result<History, CorpusError> {
    let value: serde_json::Value =
        serde_json::from_str(raw_document).map_err(|e| CorpusError::Schema {
            path: "/".to_string(),
            message: format!("not valid JSON: {e}"),
        })?;

    let root = value.as_object().ok_or_else(|| schema("/", "expected a JSON object"))?;
    let sessions_value = root
        .get("sessions")
        .ok_or_else(|| schema("/", "missing \"sessions\" array"))?
        .as_array()
        .ok_or_else(|| schema("/sessions", "expected an array"))?;

    let mut sessions = Vec::with_capacity(sessions_value.len());
    for (si, session_value) in sessions_value.iter().enumerate() {
        let spath = format!("/sessions/{si}");
        let session_obj = session_value
            .as_object()
            .ok_or_else(|| schema(&spath, "expected an object"))?;

        let session_id = require_string(session_obj, "session_id", &spath)?;
        let session_timestamp = optional_string(session_obj, "timestamp", &spath)?;
        let messages_value = session_obj
            .get("messages")
            .ok_or_else(|| schema(&spath, "missing \"messages\" array"))?
            .as_array()
            .ok_or_else(|| schema(&format!("{spath}/messages"), "expected an array"))?;

        let mut messages = Vec::with_capacity(messages_value.len());
        for (mi, message_value) in messages_value.iter().enumerate() {
            let mpath = format!("{spath}/messages/{mi}");
            let message_obj = message_value
                .as_object()
                .ok_or_else(|| schema(&mpath, "expected an object"))?;

            let msg_id = optional_string(message_obj, "msg_id", &mpath)?
                .unwrap_or_else(|| format!("D{}:{}", si + 1, mi + 1));

            let speaker = match optional_string(message_obj, "speaker", &mpath)? {
                Some(s) => Some(s),
                None => optional_string(message_obj, "role", &mpath)?,
            };

            let content = require_string(message_obj, "content", &mpath)?
                .trim()
                .to_string();
            if content.is_empty() {
                return Err(schema(
                    &format!("{mpath}/content"),
                    "content must be non-empty",
                ));
            }

            // Images arrive as textual captions only; anything else (nested
            // objects, byte arrays) is rejected.
            let image_caption = optional_string(message_obj, "image", &mpath)?;

            let timestamp = optional_string(message_obj, "timestamp", &mpath)?
                .or_else(|| session_timestamp.clone());
            let location = optional_string(message_obj, "location", &mpath)?;

            messages.push(Message {
                msg_id,
                speaker,
                content,
                image_caption,
                timestamp,
                location,
            });
        }

        sessions.push(Session {
            session_id,
            messages,
        });
    }

    History::from_sessions(sessions)
}

fn schema(path: &str, message: &str) -> CorpusError {
    CorpusError::Schema {
        path: path.to_string(),
        message: message.to_string(),
    }
}

fn require_string(
    obj: &serde_json::Map<String, serde_json::Value>,
    key: &str,
    path: &str,
) -> Result<String, CorpusError> {
    match obj.get(key) {
        Some(serde_json::Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(schema(&format!("{path}/{key}"), "expected a string")),
        None => Err(schema(path, &format!("missing \"{key}\""))),
    }
}

fn optional_string(
    obj: &serde_json::Map<String, serde_json::Value>,
    key: &str,
    path: &str,
) -> Result<Option<String>, CorpusError> {
    match obj.get(key) {
        None | Some(serde_json::Value::Null) => Ok(None),
        Some(serde_json::Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(schema(&format!("{path}/{key}"), "expected a string")),
    }
}

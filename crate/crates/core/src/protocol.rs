//! Line-delimited wire envelope.
//!
//! Every message is one UTF-8 JSON object on its own line:
//!
//! ```text
//! {"at":1000,"kind":"event","session":"s1","v":1, ...payload fields...}
//! ```
//!
//! `v` is the protocol version, `kind` the discriminator, `session` the
//! session id (empty for `open` before a session exists) and `at` the
//! sender's timestamp in milliseconds. Payload fields sit next to the
//! envelope fields. Keys are emitted in sorted order, which makes the
//! encoding canonical: equal messages encode to equal bytes.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::model::{
    ConfigUpdate, Feedback, Finding, HelpNeededEvent, InteractionEvent, Millis, Note, NoteReview, Operation,
    ProactivityConfig, ReasoningStep, Suggestion,
};

pub const PROTOCOL_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Dismiss,
}

/// Message payloads, discriminated by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", rename_all_fields = "camelCase")]
pub enum Message {
    /// Client asks for a new session.
    Open {
        profile: String,
        dataset: String,
    },
    Event(InteractionEvent),
    Decision {
        suggestion_id: String,
        decision: Decision,
    },
    /// Client touched a pending suggestion without deciding (keeps a tip alive).
    Interact {
        suggestion_id: String,
    },
    Note {
        note: Note,
    },
    Config(ConfigUpdate),
    /// Direct dashboard command from the client.
    Operation {
        operation: Operation,
    },
    Abort,
    HelpNeeded(HelpNeededEvent),
    /// Wrapped because a suggestion has its own `kind` field.
    Suggestion {
        suggestion: Suggestion,
    },
    Step(ReasoningStep),
    Feedback(Feedback),
    Finding {
        finding: Finding,
        note: Note,
    },
    Review(NoteReview),
    Expiry {
        suggestion_id: String,
    },
    Ack {
        of: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        config: Option<ProactivityConfig>,
    },
    Error {
        code: String,
        message: String,
    },
}

impl Message {
    pub const KINDS: [&'static str; 17] = [
        "open",
        "event",
        "decision",
        "interact",
        "note",
        "config",
        "operation",
        "abort",
        "help_needed",
        "suggestion",
        "step",
        "feedback",
        "finding",
        "review",
        "expiry",
        "ack",
        "error",
    ];

    pub fn kind(&self) -> &'static str {
        match self {
            Message::Open { .. } => "open",
            Message::Event(_) => "event",
            Message::Decision { .. } => "decision",
            Message::Interact { .. } => "interact",
            Message::Note { .. } => "note",
            Message::Config(_) => "config",
            Message::Operation { .. } => "operation",
            Message::Abort => "abort",
            Message::HelpNeeded(_) => "help_needed",
            Message::Suggestion { .. } => "suggestion",
            Message::Step(_) => "step",
            Message::Feedback(_) => "feedback",
            Message::Finding { .. } => "finding",
            Message::Review(_) => "review",
            Message::Expiry { .. } => "expiry",
            Message::Ack { .. } => "ack",
            Message::Error { .. } => "error",
        }
    }

    /// Kinds the engine may push to a client.
    pub fn is_outbound_kind(kind: &str) -> bool {
        matches!(
            kind,
            "suggestion" | "step" | "feedback" | "finding" | "review" | "expiry" | "error" | "ack" | "help_needed"
        )
    }

    pub fn error(code: &str, message: impl Into<String>) -> Self {
        Message::Error { code: code.to_string(), message: message.into() }
    }
}

/// A message plus its envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub session: String,
    pub at: Millis,
    pub message: Message,
}

impl Frame {
    pub fn new(session: impl Into<String>, at: Millis, message: Message) -> Self {
        Frame { session: session.into(), at, message }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("parse error at line {line}, column {column}: {detail}")]
    Parse { line: usize, column: usize, detail: String },
    #[error("invalid envelope field `{field}`: {detail}")]
    Field { field: String, detail: String },
    #[error("unsupported message kind `{0}`")]
    UnsupportedKind(String),
    #[error("unsupported protocol version {0}")]
    Version(u64),
    #[error("out-of-order clickTime {click_time} for session {session} (last {last})")]
    OutOfOrder { session: String, click_time: Millis, last: Millis },
}

impl ProtocolError {
    pub fn code(&self) -> &'static str {
        match self {
            ProtocolError::Parse { .. } => "parse",
            ProtocolError::Field { .. } => "field",
            ProtocolError::UnsupportedKind(_) => "unsupported_kind",
            ProtocolError::Version(_) => "version",
            ProtocolError::OutOfOrder { .. } => "out_of_order",
        }
    }
}

/// Encodes a frame as one canonical line (without the trailing newline).
pub fn encode(frame: &Frame) -> String {
    let mut obj = match serde_json::to_value(&frame.message) {
        Ok(Value::Object(m)) => m,
        // Every variant serialises to an object because of the internal tag.
        other => unreachable!("message did not serialise to an object: {other:?}"),
    };
    obj.insert("v".into(), Value::from(PROTOCOL_VERSION));
    obj.insert("session".into(), Value::String(frame.session.clone()));
    obj.insert("at".into(), Value::from(frame.at));
    Value::Object(obj).to_string()
}

/// Encodes a frame as bytes terminated by a newline.
pub fn encode_line(frame: &Frame) -> Vec<u8> {
    let mut s = encode(frame);
    s.push('\n');
    s.into_bytes()
}

pub fn decode(bytes: &[u8]) -> Result<Frame, ProtocolError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| ProtocolError::Parse {
        line: e.line(),
        column: e.column(),
        detail: e.to_string(),
    })?;
    let Value::Object(mut obj) = value else {
        return Err(ProtocolError::Parse { line: 1, column: 1, detail: "expected a JSON object".into() });
    };
    let version = take_u64(&mut obj, "v")?;
    if version != PROTOCOL_VERSION {
        return Err(ProtocolError::Version(version));
    }
    let session = match obj.remove("session") {
        Some(Value::String(s)) => s,
        Some(_) => return Err(field_err("session", "expected a string")),
        None => return Err(field_err("session", "missing")),
    };
    let at = match obj.remove("at") {
        Some(v) => v.as_i64().ok_or_else(|| field_err("at", "expected an integer timestamp"))?,
        None => return Err(field_err("at", "missing")),
    };
    let kind = match obj.get("kind") {
        Some(Value::String(k)) => k.clone(),
        Some(_) => return Err(field_err("kind", "expected a string")),
        None => return Err(field_err("kind", "missing")),
    };
    if !Message::KINDS.contains(&kind.as_str()) {
        return Err(ProtocolError::UnsupportedKind(kind));
    }
    let message: Message = serde_json::from_value(Value::Object(obj)).map_err(|e| {
        let detail = e.to_string();
        ProtocolError::Field { field: offending_field(&detail).unwrap_or_else(|| kind.clone()), detail }
    })?;
    Ok(Frame { session, at, message })
}

pub fn decode_str(line: &str) -> Result<Frame, ProtocolError> {
    decode(line.trim_end_matches(['\r', '\n']).as_bytes())
}

fn take_u64(obj: &mut Map<String, Value>, key: &str) -> Result<u64, ProtocolError> {
    match obj.remove(key) {
        Some(v) => v.as_u64().ok_or_else(|| field_err(key, "expected a non-negative integer")),
        None => Err(field_err(key, "missing")),
    }
}

fn field_err(field: &str, detail: &str) -> ProtocolError {
    ProtocolError::Field { field: field.to_string(), detail: detail.to_string() }
}

/// Pulls the field name out of serde messages such as "missing field `x`".
fn offending_field(detail: &str) -> Option<String> {
    let start = detail.find('`')? + 1;
    let len = detail[start..].find('`')?;
    Some(detail[start..start + len].to_string())
}

/// Stateful decoder for a transcript stream. On top of [`decode`] it rejects
/// interaction events whose clickTime does not strictly increase per session.
#[derive(Debug, Default)]
pub struct StreamDecoder {
    last_click: HashMap<String, Millis>,
}

impl StreamDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn decode(&mut self, bytes: &[u8]) -> Result<Frame, ProtocolError> {
        let frame = decode(bytes)?;
        if let Message::Event(ev) = &frame.message {
            let key = if ev.session_id.is_empty() { frame.session.clone() } else { ev.session_id.clone() };
            if let Some(&last) = self.last_click.get(&key) {
                if ev.click_time <= last {
                    return Err(ProtocolError::OutOfOrder { session: key, click_time: ev.click_time, last });
                }
            }
            self.last_click.insert(key, ev.click_time);
        }
        Ok(frame)
    }
}

/// Checks that every suggestion in a transcript references a help-needed
/// event announced earlier in the same transcript. Returns the offending
/// suggestion ids.
pub fn dangling_suggestions(frames: &[Frame]) -> Vec<String> {
    let mut events = std::collections::HashSet::new();
    let mut bad = Vec::new();
    for f in frames {
        match &f.message {
            Message::HelpNeeded(ev) => {
                events.insert(ev.id.clone());
            }
            Message::Suggestion { suggestion: s } if !events.contains(&s.source_event) => bad.push(s.id.clone()),
            _ => {}
        }
    }
    bad
}

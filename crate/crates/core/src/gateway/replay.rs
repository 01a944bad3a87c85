//! Deterministic transcript replay.
//!
//! Input is a client transcript, one envelope per line. The fake clock
//! follows each line's `at`; timers due before a line fire first and any
//! left at the end are drained. Sessions are referred to by label: the
//! label on an `open` line is bound to the session id the engine assigns.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use super::{Catalog, Engine, EngineConfig};
use crate::backend::LlmBackend;
use crate::model::Millis;
use crate::protocol::{decode_str, encode, Frame, Message, ProtocolError};

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: ProtocolError },
    #[error("line {line}: unknown session {session}")]
    UnknownSession { line: usize, session: String },
    #[error("line {line}: time goes backwards ({at} after {last})")]
    TimeReversed { line: usize, at: Millis, last: Millis },
    #[error("line {line}: open failed: {detail}")]
    Open { line: usize, detail: String },
    #[error("{0}")]
    Io(String),
}

impl ReplayError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ReplayError::Parse { line, .. }
            | ReplayError::UnknownSession { line, .. }
            | ReplayError::TimeReversed { line, .. }
            | ReplayError::Open { line, .. } => Some(*line),
            ReplayError::Io(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutput {
    /// Every pushed frame, in emission order.
    pub frames: Vec<Frame>,
    /// Transcript label to engine session id.
    pub sessions: BTreeMap<String, String>,
}

impl ReplayOutput {
    /// One canonical line per frame, newline-terminated.
    pub fn transcript(&self) -> String {
        let mut out = String::new();
        for f in &self.frames {
            out.push_str(&encode(f));
            out.push('\n');
        }
        out
    }
}

/// Replays `text` against `engine`. Blank lines and `#` comments are skipped.
pub fn replay_lines(engine: &Engine, text: &str) -> Result<ReplayOutput, ReplayError> {
    let mut frames = Vec::new();
    let mut sessions: BTreeMap<String, String> = BTreeMap::new();
    let mut last_at = Millis::MIN;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut frame = decode_str(trimmed).map_err(|source| ReplayError::Parse { line, source })?;
        if frame.at < last_at {
            return Err(ReplayError::TimeReversed { line, at: frame.at, last: last_at });
        }
        last_at = frame.at;
        frames.extend(engine.tick(frame.at));
        if let Message::Open { .. } = frame.message {
            let label = frame.session.clone();
            let out = engine.handle(frame, last_at);
            match out.first() {
                Some(Frame { session, message: Message::Ack { .. }, .. }) => {
                    sessions.insert(label, session.clone());
                }
                Some(Frame { message: Message::Error { message, .. }, .. }) => {
                    return Err(ReplayError::Open { line, detail: message.clone() });
                }
                _ => return Err(ReplayError::Open { line, detail: "no acknowledgement".into() }),
            }
            frames.extend(out);
            continue;
        }
        let Some(id) = sessions.get(&frame.session) else {
            return Err(ReplayError::UnknownSession { line, session: frame.session });
        };
        frame.session = id.clone();
        frames.extend(engine.handle(frame, last_at));
    }
    frames.extend(engine.drain());
    Ok(ReplayOutput { frames, sessions })
}

/// Replays on a fresh engine.
pub fn replay(
    catalog: Catalog,
    backend: Arc<dyn LlmBackend + Send + Sync>,
    cfg: EngineConfig,
    text: &str,
) -> Result<ReplayOutput, ReplayError> {
    let engine = Engine::with_config(catalog, backend, cfg);
    replay_lines(&engine, text)
}

pub fn replay_file(
    catalog: Catalog,
    backend: Arc<dyn LlmBackend + Send + Sync>,
    cfg: EngineConfig,
    path: &Path,
) -> Result<ReplayOutput, ReplayError> {
    let text = std::fs::read_to_string(path).map_err(|e| ReplayError::Io(format!("{}: {e}", path.display())))?;
    replay(catalog, backend, cfg, &text)
}

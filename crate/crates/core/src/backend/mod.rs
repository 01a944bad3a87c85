//! Language-model boundary.
//!
//! Every request names a response [`Schema`]. [`complete`] asks the backend
//! for raw text, parses it into the schema's type and, on failure, retries
//! once with a repair instruction. Nothing untyped leaves this module.

mod remote;
mod scripted;

use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use remote::{HttpTransport, RemoteBackend, RemoteConfig, Transport};
pub use scripted::{ScriptEntry, ScriptFile, ScriptMatch, ScriptedBackend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Detector,
    Planner,
    Reasoner,
    Verifier,
    Judge,
    TaskGen,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Detector => "detector",
            Role::Planner => "planner",
            Role::Reasoner => "reasoner",
            Role::Verifier => "verifier",
            Role::Judge => "judge",
            Role::TaskGen => "task_gen",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Registered response schemas. The text is appended to system prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schema {
    HelpNeeded,
    IntentSuggestion,
    ReasoningStep,
    ClaimList,
    JudgeScores,
    TaskList,
}

impl Schema {
    pub fn name(self) -> &'static str {
        match self {
            Schema::HelpNeeded => "HelpNeeded",
            Schema::IntentSuggestion => "IntentSuggestion",
            Schema::ReasoningStep => "ReasoningStep",
            Schema::ClaimList => "ClaimList",
            Schema::JudgeScores => "JudgeScores",
            Schema::TaskList => "TaskList",
        }
    }

    pub fn instructions(self) -> &'static str {
        match self {
            Schema::HelpNeeded => {
                r#"Reply with one JSON object: {"help": bool, "description": string, "pattern": string}. Use {"help": false} when the user does not need assistance."#
            }
            Schema::IntentSuggestion => {
                r#"Reply with one JSON object: {"hypothesis": one of compare|trend|filter_focus|extreme|categorize|summarize|unfamiliar_interaction|unfamiliar_encoding, "rationale": string, "targetData": string or null, "goal": string, "targetViews": [view ids], "message": string}."#
            }
            Schema::ReasoningStep => {
                r#"Reply with one JSON object: {"thought": string, "action": {"operation": {"tool": "readData"|"select"|"filter", "view": string, "params": {...}}}} or {"thought": string, "action": {"finish": {"title": string, "finding": string}}}."#
            }
            Schema::ClaimList => {
                r#"Reply with one JSON object: {"claims": [{"kind": numeric_value|extremum|time_point|time_range|category_assertion, "field": string, "quote": exact substring of the note, "claimedValue": number, string or [string, string], "scope": {field: value}, "reducer": sum|mean|min|max|count, "groupBy": string, "direction": min|max, "at": string}]}. Return {"claims": []} when nothing is checkable."#
            }
            Schema::JudgeScores => {
                r#"Reply with one JSON object: {"taskCompletion": 0-5, "dataAccuracy": 0-5, "pathEfficiency": 0-5}."#
            }
            Schema::TaskList => {
                r#"Reply with one JSON object: {"tasks": [{"category": comparison|trend|performance|correlation|dimension, "prompt": string, "expectedViews": [view ids], "expectedFields": [field names]}]}."#
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FewShot {
    pub input: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PromptRequest {
    pub role: Role,
    pub system_text: String,
    pub user_text: String,
    #[serde(default)]
    pub few_shots: Vec<FewShot>,
    pub response_schema: Schema,
    pub max_tokens: u32,
    pub temperature: f32,
}

impl PromptRequest {
    pub fn new(role: Role, schema: Schema, system_text: impl Into<String>, user_text: impl Into<String>) -> Self {
        PromptRequest {
            role,
            system_text: system_text.into(),
            user_text: user_text.into(),
            few_shots: Vec::new(),
            response_schema: schema,
            max_tokens: 1024,
            temperature: 0.0,
        }
    }

    pub fn with_few_shots(mut self, shots: Vec<FewShot>) -> Self {
        self.few_shots = shots;
        self
    }

    /// `role:` followed by the first 16 hex digits of SHA-256 over the user text.
    pub fn fingerprint(&self) -> String {
        fingerprint(self.role, &self.user_text)
    }
}

pub fn fingerprint(role: Role, user_text: &str) -> String {
    let digest = Sha256::digest(user_text.as_bytes());
    let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    format!("{}:{hex}", role.as_str())
}

/// A failed first attempt, handed back to the backend on the retry.
#[derive(Debug, Clone, PartialEq)]
pub struct Repair {
    pub previous: String,
    pub error: String,
}

impl Repair {
    pub fn instruction(&self, schema: Schema) -> String {
        format!(
            "Your previous reply could not be used ({}). Reply again with only the JSON object for schema {}. {}",
            self.error,
            schema.name(),
            schema.instructions()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("backend timed out after {0} ms")]
    Timeout(u64),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("{schema} validation failed after retry: {detail}")]
    Validation { schema: &'static str, detail: String },
    #[error("no scripted response for {fingerprint}")]
    ScriptMiss { fingerprint: String },
    #[error("backend configuration: {0}")]
    Config(String),
}

/// Source of raw completions. Implementations only produce text; parsing
/// and retries live in [`complete`].
pub trait LlmBackend: Send + Sync {
    fn raw(&self, req: &PromptRequest, repair: Option<&Repair>) -> Result<String, BackendError>;

    fn name(&self) -> &str;
}

/// Requests a completion and parses it as `T`, retrying once on a parse or
/// validation failure. `check` applies semantic rules beyond the type.
pub fn complete_with<T, F>(backend: &dyn LlmBackend, req: &PromptRequest, check: F) -> Result<T, BackendError>
where
    T: DeserializeOwned,
    F: Fn(&T) -> Result<(), String>,
{
    let parse = |text: &str| -> Result<T, String> {
        let value: T = serde_json::from_str(strip_fences(text)).map_err(|e| e.to_string())?;
        check(&value)?;
        Ok(value)
    };
    let first = backend.raw(req, None)?;
    let error = match parse(&first) {
        Ok(v) => return Ok(v),
        Err(e) => e,
    };
    tracing::debug!(role = %req.role, %error, "backend output rejected, retrying with repair");
    let repair = Repair { previous: first, error };
    let second = backend.raw(req, Some(&repair))?;
    parse(&second).map_err(|detail| BackendError::Validation { schema: req.response_schema.name(), detail })
}

pub fn complete<T: DeserializeOwned>(backend: &dyn LlmBackend, req: &PromptRequest) -> Result<T, BackendError> {
    complete_with(backend, req, |_| Ok(()))
}

/// Removes a surrounding Markdown code fence, which chat models like to add.
fn strip_fences(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else { return t };
    let rest = rest.trim_start_matches(|c: char| c.is_ascii_alphanumeric());
    rest.strip_suffix("```").unwrap_or(rest).trim()
}

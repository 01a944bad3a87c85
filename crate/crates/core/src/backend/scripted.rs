use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{BackendError, LlmBackend, PromptRequest, Repair, Role};

/// Conditions an entry places on a request. All given conditions must hold.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScriptMatch {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contains: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
}

/// One canned response. A string `respond` is returned as-is (which is how
/// scripts inject malformed output); any other value is serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScriptEntry {
    pub role: Role,
    #[serde(default)]
    pub when: ScriptMatch,
    pub respond: Value,
    /// How many times the entry may be used; unlimited when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<u32>,
}

impl ScriptEntry {
    pub fn new(role: Role, contains: &[&str], respond: Value) -> Self {
        ScriptEntry {
            role,
            when: ScriptMatch { contains: contains.iter().map(|s| s.to_string()).collect(), fingerprint: None },
            respond,
            times: None,
        }
    }

    pub fn times(mut self, n: u32) -> Self {
        self.times = Some(n);
        self
    }

    fn matches(&self, req: &PromptRequest, fingerprint: &str) -> bool {
        self.role == req.role
            && self.when.fingerprint.as_deref().is_none_or(|f| f == fingerprint)
            && self.when.contains.iter().all(|c| req.user_text.contains(c.as_str()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScriptFile {
    #[serde(default)]
    pub strict: bool,
    pub entries: Vec<ScriptEntry>,
}

impl ScriptFile {
    pub fn load(path: &Path) -> Result<ScriptFile, BackendError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))
    }

    pub fn extend(&mut self, other: ScriptFile) {
        self.entries.extend(other.entries);
    }
}

/// Deterministic offline backend answering from a script. The first entry
/// (in file order) that matches and has uses left wins.
///
/// Without strict mode, unmatched detector and verifier requests get a
/// neutral answer (no help needed, no claims); every other miss is an error.
#[derive(Debug)]
pub struct ScriptedBackend {
    strict: bool,
    entries: Mutex<Vec<(ScriptEntry, Option<u32>)>>,
    calls: Mutex<Vec<PromptRequest>>,
}

impl ScriptedBackend {
    pub fn new(script: ScriptFile) -> Self {
        let entries = script.entries.into_iter().map(|e| {
            let left = e.times;
            (e, left)
        });
        ScriptedBackend { strict: script.strict, entries: Mutex::new(entries.collect()), calls: Mutex::new(Vec::new()) }
    }

    pub fn from_entries(strict: bool, entries: Vec<ScriptEntry>) -> Self {
        ScriptedBackend::new(ScriptFile { strict, entries })
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        Ok(ScriptedBackend::new(ScriptFile::load(path)?))
    }

    /// Every request seen so far, including repair retries.
    pub fn calls(&self) -> Vec<PromptRequest> {
        self.calls.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl LlmBackend for ScriptedBackend {
    fn raw(&self, req: &PromptRequest, _repair: Option<&Repair>) -> Result<String, BackendError> {
        self.calls.lock().unwrap_or_else(|e| e.into_inner()).push(req.clone());
        let fp = req.fingerprint();
        let mut entries = self.entries.lock().unwrap_or_else(|e| e.into_inner());
        for (entry, left) in entries.iter_mut() {
            if left == &Some(0) || !entry.matches(req, &fp) {
                continue;
            }
            if let Some(n) = left {
                *n -= 1;
            }
            return Ok(match &entry.respond {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            });
        }
        if !self.strict {
            match req.role {
                Role::Detector => return Ok(r#"{"help": false}"#.to_string()),
                Role::Verifier => return Ok(r#"{"claims": []}"#.to_string()),
                _ => {}
            }
        }
        tracing::debug!(fingerprint = %fp, "scripted backend miss");
        Err(BackendError::ScriptMiss { fingerprint: fp })
    }

    fn name(&self) -> &str {
        "scripted"
    }
}

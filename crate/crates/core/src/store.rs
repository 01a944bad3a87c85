//! Agent storage: per-session [`Memory`] (recent interactions, suggestions,
//! notes, dashboard state) and static [`Knowledge`] (task, system
//! introduction, operations, interaction-pattern catalog).

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AnalyticIntent, InteractionEvent, Millis, Note, Phase, Suggestion, SuggestionStatus, Tool};
use crate::sandbox::{DashboardState, FilterPredicate};

pub const DEFAULT_RING_CAPACITY: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StoreError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("out-of-order event: clickTime {got} is not after {last}")]
    OutOfOrder { last: Millis, got: Millis },
    #[error("unknown suggestion {0}")]
    UnknownSuggestion(String),
    #[error("illegal transition {from:?} -> {to:?} for suggestion {id}")]
    IllegalTransition { id: String, from: SuggestionStatus, to: SuggestionStatus },
    #[error("knowledge error: {0}")]
    Knowledge(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemCategory {
    UnfamiliarFunctionality,
    DataUnderstanding,
    TaskFailure,
}

impl ProblemCategory {
    pub fn phase(self) -> Phase {
        match self {
            ProblemCategory::UnfamiliarFunctionality => Phase::Onboarding,
            ProblemCategory::DataUnderstanding => Phase::Exploration,
            ProblemCategory::TaskFailure => Phase::Verification,
        }
    }
}

/// One row of the interaction-pattern catalog used as few-shot material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PatternRow {
    pub interaction_pattern: String,
    pub interpretation: String,
    pub subcategory: String,
    pub problem_category: ProblemCategory,
    pub assistance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OperationTemplate {
    pub tool: Tool,
    pub description: String,
}

/// A required element of the analysis task (for omission checks). A slot
/// is covered once any user note makes a claim about one of `fields`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskSlot {
    pub name: String,
    pub fields: Vec<String>,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Knowledge {
    pub name: String,
    pub task_statement: String,
    pub system_introduction: String,
    pub operation_catalog: Vec<OperationTemplate>,
    #[serde(default)]
    pub pattern_catalog: Vec<PatternRow>,
    /// Loaded into `pattern_catalog` when present, relative to the knowledge file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern_catalog_file: Option<String>,
    /// View ids in the order an analyst normally moves through them.
    pub workflow: Vec<String>,
    #[serde(default)]
    pub task_slots: Vec<TaskSlot>,
    /// Default target views per analytic intent when the planner names none.
    #[serde(default)]
    pub intent_views: BTreeMap<AnalyticIntent, Vec<String>>,
    /// Omission reminders start once this many user notes exist.
    #[serde(default = "default_omission_min_notes")]
    pub omission_min_notes: usize,
}

fn default_omission_min_notes() -> usize {
    3
}

impl Knowledge {
    pub fn load(path: &Path) -> Result<Knowledge, StoreError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| StoreError::Knowledge(format!("{}: {e}", path.display())))?;
        let mut k: Knowledge =
            serde_json::from_str(&text).map_err(|e| StoreError::Knowledge(format!("{}: {e}", path.display())))?;
        if let Some(file) = k.pattern_catalog_file.take() {
            let p = path.parent().unwrap_or(Path::new(".")).join(file);
            let rows =
                std::fs::read_to_string(&p).map_err(|e| StoreError::Knowledge(format!("{}: {e}", p.display())))?;
            let rows: Vec<PatternRow> =
                serde_json::from_str(&rows).map_err(|e| StoreError::Knowledge(format!("{}: {e}", p.display())))?;
            k.pattern_catalog.extend(rows);
        }
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        if self.pattern_catalog.is_empty() {
            return Err(StoreError::Knowledge(format!("{}: pattern catalog is empty", self.name)));
        }
        if self.operation_catalog.is_empty() {
            return Err(StoreError::Knowledge(format!("{}: operation catalog is empty", self.name)));
        }
        Ok(())
    }

    pub fn patterns_for(&self, phase: Phase) -> impl Iterator<Item = &PatternRow> {
        self.pattern_catalog.iter().filter(move |r| r.problem_category.phase() == phase)
    }

    pub fn workflow_rank(&self, view: &str) -> usize {
        self.workflow.iter().position(|v| v == view).unwrap_or(usize::MAX)
    }

    pub fn operations_text(&self) -> String {
        self.operation_catalog.iter().map(|o| format!("- {}: {}\n", o.tool.as_str(), o.description)).collect()
    }
}

/// Rolling per-session memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Memory {
    capacity: usize,
    recent_events: VecDeque<InteractionEvent>,
    suggestions: Vec<Suggestion>,
    notes: Vec<Note>,
    dataset_version: u64,
    dashboard: DashboardState,
    last_click: Option<Millis>,
    first_click: Option<Millis>,
}

impl Memory {
    pub fn new(capacity: usize) -> Self {
        Memory {
            capacity: capacity.max(1),
            recent_events: VecDeque::new(),
            suggestions: Vec::new(),
            notes: Vec::new(),
            dataset_version: 0,
            dashboard: DashboardState::default(),
            last_click: None,
            first_click: None,
        }
    }

    pub fn recent_events(&self) -> &VecDeque<InteractionEvent> {
        &self.recent_events
    }

    pub fn suggestions(&self) -> &[Suggestion] {
        &self.suggestions
    }

    pub fn suggestion(&self, id: &str) -> Option<&Suggestion> {
        self.suggestions.iter().find(|s| s.id == id)
    }

    pub fn notes(&self) -> &[Note] {
        &self.notes
    }

    pub fn dataset_version(&self) -> u64 {
        self.dataset_version
    }

    pub fn dashboard_state(&self) -> &DashboardState {
        &self.dashboard
    }

    pub fn first_click(&self) -> Option<Millis> {
        self.first_click
    }

    pub fn last_click(&self) -> Option<Millis> {
        self.last_click
    }

    pub fn pending(&self, phase: Phase) -> Option<&Suggestion> {
        self.suggestions.iter().find(|s| s.phase == phase && s.status == SuggestionStatus::Pending)
    }
}

/// Slice of memory handed to detectors, planners and the reasoner.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ContextBundle {
    pub events: Vec<InteractionEvent>,
    pub active_filters: BTreeMap<String, FilterPredicate>,
    pub selections: BTreeMap<String, String>,
    pub current_view: Option<String>,
    pub prior_suggestions: Vec<Suggestion>,
    pub notes: Vec<Note>,
    pub dataset_version: u64,
    /// Milliseconds between the first and the latest event.
    pub session_age: Millis,
}

impl ContextBundle {
    pub fn empty() -> Self {
        ContextBundle {
            events: Vec::new(),
            active_filters: BTreeMap::new(),
            selections: BTreeMap::new(),
            current_view: None,
            prior_suggestions: Vec::new(),
            notes: Vec::new(),
            dataset_version: 0,
            session_age: 0,
        }
    }

    /// Compact multi-line rendering for prompts.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("session age: {} ms\n", self.session_age));
        if let Some(v) = &self.current_view {
            out.push_str(&format!("current view: {v}\n"));
        }
        out.push_str(&format!(
            "dashboard state (v{}): filters {} selections {}\n",
            self.dataset_version,
            serde_json::to_string(&self.active_filters).unwrap_or_default(),
            serde_json::to_string(&self.selections).unwrap_or_default()
        ));
        out.push_str("recent events:\n");
        for e in &self.events {
            out.push_str(&format!("  {}\n", render_event(e)));
        }
        if !self.prior_suggestions.is_empty() {
            out.push_str("prior suggestions:\n");
            for s in &self.prior_suggestions {
                out.push_str(&format!("  [{:?}/{:?}] {}\n", s.kind, s.status, s.message));
            }
        }
        out
    }
}

pub fn render_event(e: &InteractionEvent) -> String {
    let data = if e.data.is_empty() {
        String::new()
    } else {
        format!(" data={}", serde_json::to_string(&e.data).unwrap_or_default())
    };
    let think = e.think_time.map(|t| format!(" thinkTime={t}ms")).unwrap_or_default();
    format!("{} {} {}/{}{}{} at {}", e.event_id, e.action_type.as_str(), e.view, e.element, data, think, e.click_time)
}

impl Memory {
    /// Stores an event, filling in its think time. The oldest event is
    /// evicted once the ring is full.
    pub fn append_event(&mut self, session: &str, mut event: InteractionEvent) -> Result<&Memory, StoreError> {
        if let Some(last) = self.last_click {
            if event.click_time <= last {
                return Err(StoreError::OutOfOrder { last, got: event.click_time });
            }
        }
        event.think_time = self.last_click.map(|last| event.click_time - last);
        event.session_id = session.to_string();
        self.last_click = Some(event.click_time);
        self.first_click.get_or_insert(event.click_time);
        if self.recent_events.len() == self.capacity {
            self.recent_events.pop_front();
        }
        self.recent_events.push_back(event);
        Ok(self)
    }

    pub fn add_suggestion(&mut self, suggestion: Suggestion) {
        self.suggestions.push(suggestion);
    }

    /// Moves a pending suggestion to a final status.
    pub fn transition_suggestion(&mut self, id: &str, to: SuggestionStatus) -> Result<Suggestion, StoreError> {
        let s = self
            .suggestions
            .iter_mut()
            .find(|s| s.id == id)
            .ok_or_else(|| StoreError::UnknownSuggestion(id.to_string()))?;
        if s.status != SuggestionStatus::Pending || to == SuggestionStatus::Pending {
            return Err(StoreError::IllegalTransition { id: id.to_string(), from: s.status, to });
        }
        s.status = to;
        Ok(s.clone())
    }

    /// Adds a note, replacing an earlier note with the same id.
    pub fn put_note(&mut self, note: Note) {
        match self.notes.iter_mut().find(|n| n.note_id == note.note_id) {
            Some(existing) => *existing = note,
            None => self.notes.push(note),
        }
    }

    /// Mirrors the dashboard state after a state-changing operation.
    pub fn record_state(&mut self, state: &DashboardState, version: u64) {
        self.dashboard = state.clone();
        self.dataset_version = version;
    }

    /// Last `window` events plus a summary of the dashboard state. Pure read.
    pub fn snapshot_context(&self, window: usize) -> ContextBundle {
        let skip = self.recent_events.len().saturating_sub(window);
        let events: Vec<InteractionEvent> = self.recent_events.iter().skip(skip).cloned().collect();
        let current_view = self.recent_events.back().map(|e| e.view.clone());
        let session_age = match (self.first_click, self.last_click) {
            (Some(a), Some(b)) => b - a,
            _ => 0,
        };
        ContextBundle {
            events,
            active_filters: self.dashboard.active_filters.clone(),
            selections: self.dashboard.selections.clone(),
            current_view,
            prior_suggestions: self.suggestions.clone(),
            notes: self.notes.clone(),
            dataset_version: self.dataset_version,
            session_age,
        }
    }
}

/// Memory of several sessions keyed by session id.
#[derive(Debug, Clone)]
pub struct SessionStore {
    capacity: usize,
    sessions: BTreeMap<String, Memory>,
}

impl Default for SessionStore {
    fn default() -> Self {
        SessionStore::new(DEFAULT_RING_CAPACITY)
    }
}

impl SessionStore {
    pub fn new(capacity: usize) -> Self {
        SessionStore { capacity, sessions: BTreeMap::new() }
    }

    pub fn open(&mut self, session: &str) {
        self.sessions.entry(session.to_string()).or_insert_with(|| Memory::new(self.capacity));
    }

    pub fn memory(&self, session: &str) -> Result<&Memory, StoreError> {
        self.sessions.get(session).ok_or_else(|| StoreError::UnknownSession(session.to_string()))
    }

    pub fn memory_mut(&mut self, session: &str) -> Result<&mut Memory, StoreError> {
        self.sessions.get_mut(session).ok_or_else(|| StoreError::UnknownSession(session.to_string()))
    }

    pub fn append_event(&mut self, session: &str, event: InteractionEvent) -> Result<&Memory, StoreError> {
        self.memory_mut(session)?.append_event(session, event)
    }

    pub fn add_suggestion(&mut self, session: &str, suggestion: Suggestion) -> Result<(), StoreError> {
        self.memory_mut(session)?.add_suggestion(suggestion);
        Ok(())
    }

    pub fn transition_suggestion(
        &mut self,
        session: &str,
        id: &str,
        to: SuggestionStatus,
    ) -> Result<Suggestion, StoreError> {
        self.memory_mut(session)?.transition_suggestion(id, to)
    }

    pub fn put_note(&mut self, session: &str, note: Note) -> Result<(), StoreError> {
        self.memory_mut(session)?.put_note(note);
        Ok(())
    }

    pub fn record_state(&mut self, session: &str, state: &DashboardState, version: u64) -> Result<(), StoreError> {
        self.memory_mut(session)?.record_state(state, version);
        Ok(())
    }

    pub fn snapshot_context(&self, session: &str, window: usize) -> Result<ContextBundle, StoreError> {
        Ok(self.memory(session)?.snapshot_context(window))
    }
}

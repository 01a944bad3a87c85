//! Shared domain types exchanged between the engine, the sandbox dashboard,
//! the evaluation harness and the companion UI.
//!
//! All types are plain immutable values. Field names follow the wire
//! contract (camelCase keys, snake_case enum values).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Milliseconds since the Unix epoch (or since an arbitrary origin under a fake clock).
pub type Millis = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionType {
    Click,
    Hover,
    Brush,
    Filter,
    Select,
    Scroll,
    Toggle,
    NoteSubmit,
    ViewSwitch,
}

impl ActionType {
    pub const ALL: [ActionType; 9] = [
        ActionType::Click,
        ActionType::Hover,
        ActionType::Brush,
        ActionType::Filter,
        ActionType::Select,
        ActionType::Scroll,
        ActionType::Toggle,
        ActionType::NoteSubmit,
        ActionType::ViewSwitch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionType::Click => "click",
            ActionType::Hover => "hover",
            ActionType::Brush => "brush",
            ActionType::Filter => "filter",
            ActionType::Select => "select",
            ActionType::Scroll => "scroll",
            ActionType::Toggle => "toggle",
            ActionType::NoteSubmit => "note_submit",
            ActionType::ViewSwitch => "view_switch",
        }
    }
}

/// One timestamped user action on a dashboard component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InteractionEvent {
    #[serde(default)]
    pub event_id: String,
    #[serde(default)]
    pub session_id: String,
    pub action_type: ActionType,
    pub view: String,
    #[serde(default)]
    pub element: String,
    #[serde(default)]
    pub data: BTreeMap<String, Value>,
    pub click_time: Millis,
    /// Pause since the previous event of the same session. Filled in by the
    /// engine; whatever a client sends here is discarded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub think_time: Option<Millis>,
}

impl InteractionEvent {
    pub fn new(
        action_type: ActionType,
        view: impl Into<String>,
        element: impl Into<String>,
        click_time: Millis,
    ) -> Self {
        InteractionEvent {
            event_id: String::new(),
            session_id: String::new(),
            action_type,
            view: view.into(),
            element: element.into(),
            data: BTreeMap::new(),
            click_time,
            think_time: None,
        }
    }

    pub fn with_data(mut self, key: &str, value: Value) -> Self {
        self.data.insert(key.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Onboarding,
    Exploration,
    Verification,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Onboarding, Phase::Exploration, Phase::Verification];

    /// Tie-break order when several detectors fire at once; higher wins.
    pub fn priority(self) -> u8 {
        match self {
            Phase::Verification => 3,
            Phase::Exploration => 2,
            Phase::Onboarding => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Onboarding => "onboarding",
            Phase::Exploration => "exploration",
            Phase::Verification => "verification",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    ProlongedPause,
    Repetition,
    NoteIssue,
}

impl Trigger {
    pub fn as_str(self) -> &'static str {
        match self {
            Trigger::ProlongedPause => "prolonged_pause",
            Trigger::Repetition => "repetition",
            Trigger::NoteIssue => "note_issue",
        }
    }
}

/// A detected moment of need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HelpNeededEvent {
    pub id: String,
    pub session_id: String,
    pub phase: Phase,
    pub trigger: Trigger,
    pub description: String,
    /// Event ids, or the note id for `note_issue`.
    pub evidence: Vec<String>,
    pub detected_at: Millis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionKind {
    Tip,
    ExplorationOffer,
    NoteCorrection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionStatus {
    Pending,
    Accepted,
    Dismissed,
    Expired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueType {
    FactualError,
    InternalConflict,
    TaskOmission,
}

/// One problem found in a note, with the text spans to highlight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NoteIssue {
    pub issue_type: IssueType,
    pub comment: String,
    pub corrected_answer: String,
    /// Verbatim, case-sensitive substrings of the note text.
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Correction {
    pub note_id: String,
    #[serde(flatten)]
    pub issue: NoteIssue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Suggestion {
    pub id: String,
    pub source_event: String,
    pub phase: Phase,
    pub kind: SuggestionKind,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<Plan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correction: Option<Correction>,
    pub status: SuggestionStatus,
}

impl Suggestion {
    /// Structural invariants that hold independently of any note text.
    pub fn check_shape(&self) -> Result<(), String> {
        match self.kind {
            SuggestionKind::NoteCorrection if self.correction.is_none() => {
                Err(format!("{}: note_correction without correction", self.id))
            }
            SuggestionKind::Tip | SuggestionKind::ExplorationOffer if self.correction.is_some() => {
                Err(format!("{}: correction on a non-correction suggestion", self.id))
            }
            SuggestionKind::ExplorationOffer if self.plan.is_none() => {
                Err(format!("{}: exploration_offer without plan", self.id))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticIntent {
    Compare,
    Trend,
    FilterFocus,
    Extreme,
    Categorize,
    Summarize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Plan {
    pub goal: String,
    pub target_views: Vec<String>,
    pub hypothesized_intent: AnalyticIntent,
    pub max_steps: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tool {
    #[serde(rename = "readData")]
    ReadData,
    #[serde(rename = "select")]
    Select,
    #[serde(rename = "filter")]
    Filter,
}

impl Tool {
    pub fn as_str(self) -> &'static str {
        match self {
            Tool::ReadData => "readData",
            Tool::Select => "select",
            Tool::Filter => "filter",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reducer {
    Sum,
    Mean,
    Min,
    Max,
    Count,
}

impl Reducer {
    pub const ALL: [Reducer; 5] = [Reducer::Sum, Reducer::Mean, Reducer::Min, Reducer::Max, Reducer::Count];

    pub fn as_str(self) -> &'static str {
        match self {
            Reducer::Sum => "sum",
            Reducer::Mean => "mean",
            Reducer::Min => "min",
            Reducer::Max => "max",
            Reducer::Count => "count",
        }
    }
}

/// Granularity used when grouping by a timestamp column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeBucket {
    Minute,
    Hour,
    Day,
    Month,
    Year,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReadParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_by: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reducer: Option<Reducer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bucket: Option<TimeBucket>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SelectParams {
    /// Element key to select; `None` clears the view's selection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element: Option<String>,
}

/// A range bound. Timestamp fields accept either epoch milliseconds or a
/// date/time string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Num(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FilterParams {
    pub field: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[Bound; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<String>>,
}

/// A dashboard tool call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tool")]
pub enum Operation {
    #[serde(rename = "readData")]
    ReadData {
        view: String,
        #[serde(default)]
        params: ReadParams,
    },
    #[serde(rename = "select")]
    Select {
        view: String,
        #[serde(default)]
        params: SelectParams,
    },
    #[serde(rename = "filter")]
    Filter { view: String, params: FilterParams },
}

impl Operation {
    pub fn tool(&self) -> Tool {
        match self {
            Operation::ReadData { .. } => Tool::ReadData,
            Operation::Select { .. } => Tool::Select,
            Operation::Filter { .. } => Tool::Filter,
        }
    }

    pub fn view(&self) -> &str {
        match self {
            Operation::ReadData { view, .. } | Operation::Select { view, .. } | Operation::Filter { view, .. } => view,
        }
    }

    /// Data fields this operation names explicitly.
    pub fn fields(&self) -> Vec<&str> {
        match self {
            Operation::ReadData { params, .. } => {
                params.measure.iter().chain(params.group_by.iter()).map(String::as_str).collect()
            }
            Operation::Select { .. } => Vec::new(),
            Operation::Filter { params, .. } => vec![params.field.as_str()],
        }
    }

    pub fn read(view: &str, measure: &str, group_by: Option<&str>, reducer: Reducer) -> Self {
        Operation::ReadData {
            view: view.to_string(),
            params: ReadParams {
                measure: Some(measure.to_string()),
                group_by: group_by.map(str::to_string),
                reducer: Some(reducer),
                ..ReadParams::default()
            },
        }
    }

    pub fn read_rows(view: &str) -> Self {
        Operation::ReadData { view: view.to_string(), params: ReadParams::default() }
    }

    pub fn select(view: &str, element: &str) -> Self {
        Operation::Select { view: view.to_string(), params: SelectParams { element: Some(element.to_string()) } }
    }

    pub fn filter_range(view: &str, field: &str, lo: f64, hi: f64) -> Self {
        Operation::Filter {
            view: view.to_string(),
            params: FilterParams {
                field: field.to_string(),
                range: Some([Bound::Num(lo), Bound::Num(hi)]),
                values: None,
            },
        }
    }

    pub fn filter_values(view: &str, field: &str, values: &[&str]) -> Self {
        Operation::Filter {
            view: view.to_string(),
            params: FilterParams {
                field: field.to_string(),
                range: None,
                values: Some(values.iter().map(|v| v.to_string()).collect()),
            },
        }
    }

    /// Short human-readable rendering used in prompts and logs.
    pub fn describe(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum StepAction {
    Operation(Operation),
    Finish { title: String, finding: String },
}

/// One ReAct iteration: a thought plus either one tool call or the finish marker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReasoningStep {
    pub index: u32,
    pub thought: String,
    pub action: StepAction,
}

impl ReasoningStep {
    pub fn is_terminal(&self) -> bool {
        matches!(self.action, StepAction::Finish { .. })
    }

    pub fn operation(&self) -> Option<&Operation> {
        match &self.action {
            StepAction::Operation(op) => Some(op),
            StepAction::Finish { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Feedback {
    pub step_index: u32,
    pub outcome: Outcome,
    pub state_delta: String,
    #[serde(default)]
    pub payload: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_detail: Option<String>,
}

impl Feedback {
    pub fn error(step_index: u32, detail: impl Into<String>) -> Self {
        Feedback {
            step_index,
            outcome: Outcome::Error,
            state_delta: "no change".to_string(),
            payload: Value::Null,
            error_detail: Some(detail.into()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.outcome == Outcome::Ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Author {
    User,
    Agent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Note {
    pub note_id: String,
    pub author: Author,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claims: Option<Vec<crate::verifier::Claim>>,
    pub created_at: Millis,
    #[serde(default)]
    pub linked_evidence: Vec<String>,
}

impl Note {
    pub fn user(note_id: impl Into<String>, text: impl Into<String>, created_at: Millis) -> Self {
        Note {
            note_id: note_id.into(),
            author: Author::User,
            text: text.into(),
            claims: None,
            created_at,
            linked_evidence: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NoteReview {
    pub note_id: String,
    pub issues: Vec<NoteIssue>,
    pub clean: bool,
}

/// User-tunable proactivity settings (the UI slider and category switches).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProactivityConfig {
    pub think_time_threshold: Millis,
    pub enabled: BTreeSet<Phase>,
    pub suggestion_cooldown: Millis,
    pub max_react_steps: u32,
    /// Minimum repeats on one element before it counts as repetition.
    pub repeat_count: usize,
    pub repeat_window: Millis,
}

pub const MIN_THINK_TIME_THRESHOLD: Millis = 500;
pub const MAX_THINK_TIME_THRESHOLD: Millis = 10_000;

impl Default for ProactivityConfig {
    fn default() -> Self {
        ProactivityConfig {
            think_time_threshold: 3000,
            enabled: Phase::ALL.into_iter().collect(),
            suggestion_cooldown: 30_000,
            max_react_steps: 10,
            repeat_count: 3,
            repeat_window: 15_000,
        }
    }
}

impl ProactivityConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(MIN_THINK_TIME_THRESHOLD..=MAX_THINK_TIME_THRESHOLD).contains(&self.think_time_threshold) {
            return Err(format!(
                "thinkTimeThreshold {} outside [{MIN_THINK_TIME_THRESHOLD}, {MAX_THINK_TIME_THRESHOLD}]",
                self.think_time_threshold
            ));
        }
        if self.max_react_steps < 1 {
            return Err("maxReactSteps must be at least 1".to_string());
        }
        if self.repeat_count < 2 {
            return Err("repeatCount must be at least 2".to_string());
        }
        if self.suggestion_cooldown < 0 || self.repeat_window < 0 {
            return Err("durations must be non-negative".to_string());
        }
        Ok(())
    }

    pub fn is_enabled(&self, phase: Phase) -> bool {
        self.enabled.contains(&phase)
    }

    /// Returns the config with `update` applied, or an error leaving `self` untouched.
    pub fn apply(&self, update: &ConfigUpdate) -> Result<ProactivityConfig, String> {
        let mut next = self.clone();
        if let Some(v) = update.think_time_threshold {
            next.think_time_threshold = v;
        }
        if let Some(v) = &update.enabled {
            next.enabled = v.clone();
        }
        if let Some(v) = update.suggestion_cooldown {
            next.suggestion_cooldown = v;
        }
        if let Some(v) = update.max_react_steps {
            next.max_react_steps = v;
        }
        if let Some(v) = update.repeat_count {
            next.repeat_count = v;
        }
        if let Some(v) = update.repeat_window {
            next.repeat_window = v;
        }
        next.validate()?;
        Ok(next)
    }
}

/// Partial configuration change; absent fields keep their current value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConfigUpdate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub think_time_threshold: Option<Millis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enabled: Option<BTreeSet<Phase>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggestion_cooldown: Option<Millis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_react_steps: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeat_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeat_window: Option<Millis>,
}

impl From<&ProactivityConfig> for ConfigUpdate {
    fn from(cfg: &ProactivityConfig) -> Self {
        ConfigUpdate {
            think_time_threshold: Some(cfg.think_time_threshold),
            enabled: Some(cfg.enabled.clone()),
            suggestion_cooldown: Some(cfg.suggestion_cooldown),
            max_react_steps: Some(cfg.max_react_steps),
            repeat_count: Some(cfg.repeat_count),
            repeat_window: Some(cfg.repeat_window),
        }
    }
}

/// Reference to the data backing a finding, resolved at emission time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvidenceRef {
    pub view: String,
    #[serde(default)]
    pub elements: Vec<String>,
    #[serde(default)]
    pub filters: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Finding {
    pub title: String,
    pub body: String,
    pub evidence: Vec<EvidenceRef>,
    pub note_id: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn operation_wire_shape() {
        let op = Operation::read("hexmap", "risk", Some("hex"), Reducer::Max);
        let v = serde_json::to_value(&op).unwrap();
        assert_eq!(
            v,
            json!({"tool": "readData", "view": "hexmap", "params": {"measure": "risk", "groupBy": "hex", "reducer": "max"}})
        );
        let back: Operation = serde_json::from_value(v).unwrap();
        assert_eq!(back, op);
    }

    #[test]
    fn readdata_params_optional() {
        let op: Operation = serde_json::from_value(json!({"tool": "readData", "view": "messages"})).unwrap();
        assert_eq!(op, Operation::read_rows("messages"));
    }

    #[test]
    fn step_action_shapes() {
        let step = ReasoningStep {
            index: 2,
            thought: "done".into(),
            action: StepAction::Finish { title: "t".into(), finding: "f".into() },
        };
        let v = serde_json::to_value(&step).unwrap();
        assert_eq!(v["action"], json!({"finish": {"title": "t", "finding": "f"}}));
        assert!(step.is_terminal());
        assert!(step.operation().is_none());
    }

    #[test]
    fn config_bounds() {
        let cfg = ProactivityConfig::default();
        assert_eq!(cfg.think_time_threshold, 3000);
        assert!(cfg.validate().is_ok());
        let low = ConfigUpdate { think_time_threshold: Some(499), ..Default::default() };
        assert!(cfg.apply(&low).is_err());
        let ok = ConfigUpdate { think_time_threshold: Some(1000), ..Default::default() };
        assert_eq!(cfg.apply(&ok).unwrap().think_time_threshold, 1000);
        let zero_steps = ConfigUpdate { max_react_steps: Some(0), ..Default::default() };
        assert!(cfg.apply(&zero_steps).is_err());
    }

    #[test]
    fn suggestion_shape_rules() {
        let s = Suggestion {
            id: "s1.sug1".into(),
            source_event: "s1.help1".into(),
            phase: Phase::Exploration,
            kind: SuggestionKind::ExplorationOffer,
            message: "help?".into(),
            plan: None,
            correction: None,
            status: SuggestionStatus::Pending,
        };
        assert!(s.check_shape().is_err());
        let tip = Suggestion { kind: SuggestionKind::Tip, phase: Phase::Onboarding, ..s };
        assert!(tip.check_shape().is_ok());
    }
}

//! What a dashboard front end does with the protocol: map the proactivity
//! slider to config messages, mirror agent-driven state changes from pushed
//! frames, time out toasts, and apply note corrections.
//!
//! The web client itself lives elsewhere; this module pins the behaviour it
//! relies on so it can be tested against the engine.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::gateway::TIP_DISPLAY_MS;
use crate::model::{ConfigUpdate, Millis, NoteIssue, Operation, StepAction, SuggestionKind};
use crate::protocol::{Frame, Message};
use crate::sandbox::{Dashboard, DashboardModel, DashboardState, ToolTarget};

/// Slider positions, least to most proactive: (think-time threshold, cooldown).
pub const SLIDER_LEVELS: [(Millis, Millis); 5] =
    [(10_000, 120_000), (6000, 60_000), (3000, 30_000), (2000, 15_000), (1000, 10_000)];

/// Toasts close on their own after this long.
pub const TOAST_MS: Millis = TIP_DISPLAY_MS;

/// Config message for a slider position; positions past the end clamp.
pub fn slider_update(level: usize) -> ConfigUpdate {
    let (threshold, cooldown) = SLIDER_LEVELS[level.min(SLIDER_LEVELS.len() - 1)];
    ConfigUpdate {
        think_time_threshold: Some(threshold),
        suggestion_cooldown: Some(cooldown),
        ..ConfigUpdate::default()
    }
}

/// Replaces every keyword span of `issue` in `text` with the corrected
/// answer. Spans are found left to right without overlap; text outside
/// them is untouched.
pub fn apply_correction(text: &str, issue: &NoteIssue) -> String {
    let mut spans: Vec<(usize, usize)> = Vec::new();
    for k in issue.keywords.iter().filter(|k| !k.is_empty()) {
        for (start, m) in text.match_indices(k.as_str()) {
            spans.push((start, start + m.len()));
        }
    }
    spans.sort();
    let mut out = String::with_capacity(text.len());
    let mut pos = 0;
    for (s, e) in spans {
        if s < pos {
            continue;
        }
        out.push_str(&text[pos..s]);
        out.push_str(&issue.corrected_answer);
        pos = e;
    }
    out.push_str(&text[pos..]);
    out
}

/// Client-side copy of one session's dashboard, kept in sync from pushed
/// frames alone.
pub struct ClientMirror {
    dashboard: Dashboard,
    pending: Option<(u32, Operation)>,
    toasts: BTreeMap<String, Millis>,
    redraws: usize,
}

impl ClientMirror {
    pub fn new(model: Arc<DashboardModel>) -> Self {
        ClientMirror { dashboard: Dashboard::new(model, "client"), pending: None, toasts: BTreeMap::new(), redraws: 0 }
    }

    /// Folds one outbound frame into the mirror. `now` is the client's clock.
    pub fn observe(&mut self, frame: &Frame, now: Millis) {
        match &frame.message {
            Message::Step(step) => {
                self.pending = match &step.action {
                    StepAction::Operation(op) => Some((step.index, op.clone())),
                    StepAction::Finish { .. } => None,
                };
            }
            Message::Feedback(fb) => {
                if let Some((index, op)) = self.pending.take() {
                    if index == fb.step_index && fb.is_ok() && !matches!(op, Operation::ReadData { .. }) {
                        self.dashboard.apply_tool(&op);
                        self.redraws += 1;
                    }
                }
            }
            Message::Suggestion { suggestion } if suggestion.kind == SuggestionKind::Tip => {
                self.toasts.insert(suggestion.id.clone(), now + TOAST_MS);
            }
            Message::Expiry { suggestion_id } => {
                self.toasts.remove(suggestion_id);
            }
            _ => {}
        }
    }

    /// The user touched a toast: it stays until dismissed or expired by the engine.
    pub fn touch(&mut self, suggestion_id: &str) {
        self.toasts.remove(suggestion_id);
    }

    pub fn state(&self) -> &DashboardState {
        self.dashboard.state()
    }

    /// Number of state changes that triggered a full re-render.
    pub fn redraws(&self) -> usize {
        self.redraws
    }

    /// Toasts still on screen at `now`.
    pub fn visible_toasts(&self, now: Millis) -> Vec<&str> {
        self.toasts.iter().filter(|(_, &until)| now < until).map(|(id, _)| id.as_str()).collect()
    }
}

//! Behavioral feature extraction and need detection.
//!
//! Detection runs in two stages. The algorithmic stage (think times,
//! pauses, repetitions) is a pure function of the event window and config.
//! Candidates it produces are then classified by one detector per phase,
//! each prompting the backend with that phase's rows of the pattern catalog.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::backend::{complete_with, FewShot, LlmBackend, PromptRequest, Role, Schema};
use crate::model::{ActionType, InteractionEvent, Millis, Phase, ProactivityConfig, Trigger};
use crate::store::{ContextBundle, Knowledge};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonitorError {
    #[error("events out of order at index {index}: {time} is not after {previous}")]
    Unordered { index: usize, previous: Millis, time: Millis },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PauseCandidate {
    pub event_id: String,
    pub observed_think_time: Millis,
    pub threshold: Millis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    SameElementRepeat,
    FilterToggle,
    ViewPingpong,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RepetitionCandidate {
    pub pattern_kind: PatternKind,
    pub event_ids: Vec<String>,
    pub span: Millis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepetitionParams {
    /// Minimum number of repeated actions.
    pub k: usize,
    /// Maximum time from the first to the last action of one repetition.
    pub window_span: Millis,
}

impl From<&ProactivityConfig> for RepetitionParams {
    fn from(cfg: &ProactivityConfig) -> Self {
        RepetitionParams { k: cfg.repeat_count, window_span: cfg.repeat_window }
    }
}

/// Fills in each event's think time from its predecessor in the list.
pub fn compute_think_times(events: &[InteractionEvent]) -> Result<Vec<InteractionEvent>, MonitorError> {
    let mut out = Vec::with_capacity(events.len());
    let mut prev: Option<Millis> = None;
    for (index, e) in events.iter().enumerate() {
        if let Some(p) = prev {
            if e.click_time <= p {
                return Err(MonitorError::Unordered { index, previous: p, time: e.click_time });
            }
        }
        let mut e = e.clone();
        e.think_time = prev.map(|p| e.click_time - p);
        prev = Some(e.click_time);
        out.push(e);
    }
    Ok(out)
}

pub fn detect_prolonged_pause(window: &[InteractionEvent], cfg: &ProactivityConfig) -> Vec<PauseCandidate> {
    window
        .iter()
        .filter_map(|e| {
            let t = e.think_time?;
            (t >= cfg.think_time_threshold).then(|| PauseCandidate {
                event_id: e.event_id.clone(),
                observed_think_time: t,
                threshold: cfg.think_time_threshold,
            })
        })
        .collect()
}

fn targets_element(a: ActionType) -> bool {
    matches!(a, ActionType::Click | ActionType::Hover | ActionType::Brush | ActionType::Select | ActionType::Toggle)
}

/// Field and value of a filter event, from its `data` payload.
fn filter_setting(e: &InteractionEvent) -> Option<(String, String)> {
    if e.action_type != ActionType::Filter {
        return None;
    }
    let field = match e.data.get("field") {
        Some(Value::String(f)) => f.clone(),
        _ if !e.element.is_empty() => e.element.clone(),
        _ => return None,
    };
    let value = e.data.get("value").map(Value::to_string).unwrap_or_default();
    Some((field, value))
}

pub fn detect_repetition(window: &[InteractionEvent], params: RepetitionParams) -> Vec<RepetitionCandidate> {
    let mut found: Vec<(usize, RepetitionCandidate)> = Vec::new();
    let span_of = |idx: &[usize]| window[*idx.last().unwrap()].click_time - window[idx[0]].click_time;
    let candidate = |kind, idx: &[usize]| RepetitionCandidate {
        pattern_kind: kind,
        event_ids: idx.iter().map(|&i| window[i].event_id.clone()).collect(),
        span: span_of(idx),
    };

    // same (view, element), greedy clusters
    let mut by_target: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
    for (i, e) in window.iter().enumerate() {
        if targets_element(e.action_type) && !e.element.is_empty() {
            by_target.entry((&e.view, &e.element)).or_default().push(i);
        }
    }
    for idx in by_target.values() {
        let mut j = 0;
        while j < idx.len() {
            let start = window[idx[j]].click_time;
            let len = idx[j..].iter().take_while(|&&i| window[i].click_time - start <= params.window_span).count();
            if len >= params.k {
                let cluster = &idx[j..j + len];
                found.push((cluster[0], candidate(PatternKind::SameElementRepeat, cluster)));
                j += len;
            } else {
                j += 1;
            }
        }
    }

    // filter field set A -> B -> A
    let mut by_field: BTreeMap<String, Vec<(usize, String)>> = BTreeMap::new();
    for (i, e) in window.iter().enumerate() {
        if let Some((field, value)) = filter_setting(e) {
            by_field.entry(field).or_default().push((i, value));
        }
    }
    for seq in by_field.values() {
        let mut j = 0;
        while j + 2 < seq.len() {
            let (x, y, z) = (&seq[j], &seq[j + 1], &seq[j + 2]);
            if x.1 == z.1 && x.1 != y.1 && window[z.0].click_time - window[x.0].click_time <= params.window_span {
                let cluster = [x.0, y.0, z.0];
                found.push((x.0, candidate(PatternKind::FilterToggle, &cluster)));
                j += 2;
            } else {
                j += 1;
            }
        }
    }

    // view switches alternating between two views with no select/filter in between
    let mut s = 0;
    let switches: Vec<usize> = (0..window.len()).filter(|&i| window[i].action_type == ActionType::ViewSwitch).collect();
    while s < switches.len() {
        let mut run = vec![switches[s]];
        let start = window[switches[s]].click_time;
        for &next in &switches[s + 1..] {
            let last = *run.last().unwrap();
            let progress =
                window[last + 1..next].iter().any(|e| matches!(e.action_type, ActionType::Select | ActionType::Filter));
            let alternates = window[next].view != window[last].view
                && (run.len() < 2 || window[next].view == window[run[run.len() - 2]].view);
            if progress || !alternates || window[next].click_time - start > params.window_span {
                break;
            }
            run.push(next);
        }
        if run.len() >= params.k.max(2) {
            found.push((run[0], candidate(PatternKind::ViewPingpong, &run)));
            s += run.len();
        } else {
            s += 1;
        }
    }

    found.sort_by_key(|a| (a.0, a.1.pattern_kind));
    found.into_iter().map(|(_, c)| c).collect()
}

/// Output of the algorithmic stage for one new event.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Candidates {
    pub pauses: Vec<PauseCandidate>,
    pub repetitions: Vec<RepetitionCandidate>,
}

impl Candidates {
    pub fn is_empty(&self) -> bool {
        self.pauses.is_empty() && self.repetitions.is_empty()
    }

    pub fn trigger(&self) -> Trigger {
        if self.repetitions.is_empty() {
            Trigger::ProlongedPause
        } else {
            Trigger::Repetition
        }
    }

    pub fn drop_trigger(&mut self, trigger: Trigger) {
        match trigger {
            Trigger::ProlongedPause => self.pauses.clear(),
            Trigger::Repetition => self.repetitions.clear(),
            Trigger::NoteIssue => {}
        }
    }

    /// Event ids cited by any candidate, in window order.
    pub fn evidence(&self, window: &[InteractionEvent]) -> Vec<String> {
        let mut ids: Vec<&str> = self.pauses.iter().map(|p| p.event_id.as_str()).collect();
        for r in &self.repetitions {
            ids.extend(r.event_ids.iter().map(String::as_str));
        }
        window.iter().filter(|e| ids.contains(&e.event_id.as_str())).map(|e| e.event_id.clone()).collect()
    }

    fn render(&self, window: &[InteractionEvent]) -> String {
        let describe = |id: &str| {
            window
                .iter()
                .find(|e| e.event_id == id)
                .map(|e| format!("{} {}/{}", e.action_type.as_str(), e.view, e.element))
                .unwrap_or_default()
        };
        let mut out = String::new();
        for p in &self.pauses {
            out.push_str(&format!(
                "- prolonged pause of {} ms (threshold {}) before {} ({})\n",
                p.observed_think_time,
                p.threshold,
                p.event_id,
                describe(&p.event_id)
            ));
        }
        for r in &self.repetitions {
            let what: Vec<String> = r.event_ids.iter().map(|id| describe(id)).collect();
            out.push_str(&format!(
                "- {} x{} within {} ms: {}\n",
                serde_json::to_value(r.pattern_kind)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
                r.event_ids.len(),
                r.span,
                what.join(", ")
            ));
        }
        out
    }
}

/// Candidates that concern the newest event of the window: a pause right
/// before it, or a repetition ending with it. Earlier events are never
/// re-evaluated, so a config change only affects later detections.
pub fn fresh_candidates(window: &[InteractionEvent], cfg: &ProactivityConfig) -> Candidates {
    let Some(newest) = window.last() else { return Candidates::default() };
    let pauses = detect_prolonged_pause(std::slice::from_ref(newest), cfg);
    let repetitions = detect_repetition(window, cfg.into())
        .into_iter()
        .filter(|r| r.event_ids.last() == Some(&newest.event_id))
        .collect();
    Candidates { pauses, repetitions }
}

/// A classified need, before the gateway assigns it an id.
#[derive(Debug, Clone, PartialEq)]
pub struct HelpDraft {
    pub phase: Phase,
    pub trigger: Trigger,
    pub description: String,
    pub evidence: Vec<String>,
    pub pattern: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
struct Verdict {
    help: bool,
    #[serde(default)]
    description: String,
    #[serde(default)]
    pattern: Option<String>,
}

pub fn detector_request(
    phase: Phase,
    candidates: &Candidates,
    ctx: &ContextBundle,
    knowledge: &Knowledge,
) -> PromptRequest {
    let system = format!(
        "You monitor how an analyst works with a dashboard and decide whether they need {phase} assistance right now.\n\
         Task given to the analyst: {}\n\nDashboard:\n{}\n\
         Compare the observed behavior with the known interaction patterns. Only report a need when the behavior \
         matches a {phase} pattern.",
        knowledge.task_statement, knowledge.system_introduction
    );
    let shots = knowledge
        .patterns_for(phase)
        .map(|row| FewShot {
            input: format!("observed: {}", row.interaction_pattern),
            output: serde_json::json!({"help": true, "description": row.interpretation, "pattern": row.subcategory})
                .to_string(),
        })
        .collect();
    let user = format!("phase: {phase}\ncandidates:\n{}\ncontext:\n{}", candidates.render(&ctx.events), ctx.render());
    PromptRequest::new(Role::Detector, Schema::HelpNeeded, system, user).with_few_shots(shots)
}

/// Asks the phase's detector whether the candidates reflect a need. Backend
/// failures are logged and treated as "no need" so the session never blocks.
pub fn classify_help_needed(
    phase: Phase,
    candidates: &Candidates,
    ctx: &ContextBundle,
    knowledge: &Knowledge,
    backend: &dyn LlmBackend,
) -> Option<HelpDraft> {
    if candidates.is_empty() || phase == Phase::Verification {
        return None;
    }
    let req = detector_request(phase, candidates, ctx, knowledge);
    let verdict = complete_with::<Verdict, _>(backend, &req, |v| {
        if v.help && v.description.trim().is_empty() {
            Err("help=true needs a description".into())
        } else {
            Ok(())
        }
    });
    match verdict {
        Ok(v) if v.help => Some(HelpDraft {
            phase,
            trigger: candidates.trigger(),
            description: v.description,
            evidence: candidates.evidence(&ctx.events),
            pattern: v.pattern,
        }),
        Ok(_) => None,
        Err(e) => {
            tracing::warn!(%phase, error = %e, "detector dropped candidates");
            None
        }
    }
}

/// Runs the behavioral detectors for `phases` concurrently.
pub fn run_detectors(
    phases: &[Phase],
    candidates: &Candidates,
    ctx: &ContextBundle,
    knowledge: &Knowledge,
    backend: &dyn LlmBackend,
) -> Vec<HelpDraft> {
    std::thread::scope(|s| {
        let handles: Vec<_> = phases
            .iter()
            .map(|&phase| s.spawn(move || classify_help_needed(phase, candidates, ctx, knowledge, backend)))
            .collect();
        handles.into_iter().filter_map(|h| h.join().ok().flatten()).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn ev(id: &str, action: ActionType, view: &str, element: &str, t: Millis) -> InteractionEvent {
        let mut e = InteractionEvent::new(action, view, element, t);
        e.event_id = id.into();
        e
    }

    fn annotated(events: Vec<InteractionEvent>) -> Vec<InteractionEvent> {
        compute_think_times(&events).unwrap()
    }

    #[test]
    fn think_times() {
        let evs = annotated(vec![
            ev("a", ActionType::Click, "v", "x", 1000),
            ev("b", ActionType::Click, "v", "x", 4500),
            ev("c", ActionType::Click, "v", "x", 5000),
        ]);
        let tt: Vec<_> = evs.iter().map(|e| e.think_time).collect();
        assert_eq!(tt, vec![None, Some(3500), Some(500)]);
        let bad = vec![ev("a", ActionType::Click, "v", "", 10), ev("b", ActionType::Click, "v", "", 5)];
        assert!(compute_think_times(&bad).is_err());
    }

    #[test]
    fn pause_threshold() {
        let evs = annotated(vec![
            ev("a", ActionType::Click, "v", "x", 0),
            ev("b", ActionType::Click, "v", "x", 3500),
            ev("c", ActionType::Click, "v", "x", 4000),
        ]);
        let cands = detect_prolonged_pause(&evs, &ProactivityConfig::default());
        assert_eq!(cands.len(), 1);
        assert_eq!(cands[0].event_id, "b");
        let calm = annotated(vec![ev("a", ActionType::Click, "v", "x", 0), ev("b", ActionType::Click, "v", "x", 2999)]);
        assert!(detect_prolonged_pause(&calm, &ProactivityConfig::default()).is_empty());
    }

    #[test]
    fn same_element_three_clicks() {
        let evs = annotated(vec![
            ev("a", ActionType::Click, "hexmap", "hex-12", 0),
            ev("b", ActionType::Click, "hexmap", "hex-12", 2000),
            ev("c", ActionType::Click, "hexmap", "hex-12", 4000),
        ]);
        let got = detect_repetition(&evs, RepetitionParams { k: 3, window_span: 10_000 });
        assert_eq!(
            got,
            vec![RepetitionCandidate {
                pattern_kind: PatternKind::SameElementRepeat,
                event_ids: vec!["a".into(), "b".into(), "c".into()],
                span: 4000
            }]
        );
    }

    #[test]
    fn distinct_elements_are_not_repetition() {
        let evs = annotated(vec![
            ev("a", ActionType::Click, "m", "x", 0),
            ev("b", ActionType::Click, "m", "y", 100),
            ev("c", ActionType::Click, "m", "z", 200),
        ]);
        assert!(detect_repetition(&evs, RepetitionParams { k: 3, window_span: 10_000 }).is_empty());
    }

    #[test]
    fn filter_toggle_back_and_forth() {
        let f = |id: &str, v: f64, t| {
            ev(id, ActionType::Filter, "filters", "", t)
                .with_data("field", json!("profit"))
                .with_data("value", json!(v))
        };
        let evs = annotated(vec![f("a", 0.5, 0), f("b", 0.2, 1000), f("c", 0.5, 2000)]);
        let got = detect_repetition(&evs, RepetitionParams { k: 3, window_span: 15_000 });
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].pattern_kind, PatternKind::FilterToggle);
    }

    #[test]
    fn pingpong_needs_no_progress() {
        let sw = |id: &str, v: &str, t| ev(id, ActionType::ViewSwitch, v, "", t);
        let p = RepetitionParams { k: 3, window_span: 15_000 };
        let evs = annotated(vec![sw("a", "map", 0), sw("b", "trend", 1000), sw("c", "map", 2000)]);
        assert_eq!(detect_repetition(&evs, p)[0].pattern_kind, PatternKind::ViewPingpong);
        let evs = annotated(vec![
            sw("a", "map", 0),
            sw("b", "trend", 1000),
            ev("s", ActionType::Select, "trend", "2021-01", 1500),
            sw("c", "map", 2000),
        ]);
        assert!(detect_repetition(&evs, p).is_empty());
    }
}

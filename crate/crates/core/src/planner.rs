//! Intent inference, suggestion wording and plan construction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{complete_with, BackendError, LlmBackend, PromptRequest, Role, Schema};
use crate::model::{AnalyticIntent, HelpNeededEvent, Phase, Plan, Suggestion, SuggestionKind, SuggestionStatus};
use crate::store::{ContextBundle, Knowledge};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanningError {
    #[error("intent could not be inferred: {0}")]
    Unresolved(String),
    #[error("plan references unknown view {0}")]
    UnknownView(String),
    #[error("{0} needs an analytic intent")]
    NotAnalytic(String),
}

impl From<BackendError> for PlanningError {
    fn from(e: BackendError) -> Self {
        PlanningError::Unresolved(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    Compare,
    Trend,
    FilterFocus,
    Extreme,
    Categorize,
    Summarize,
    UnfamiliarInteraction,
    UnfamiliarEncoding,
}

impl Hypothesis {
    pub fn analytic(self) -> Option<AnalyticIntent> {
        Some(match self {
            Hypothesis::Compare => AnalyticIntent::Compare,
            Hypothesis::Trend => AnalyticIntent::Trend,
            Hypothesis::FilterFocus => AnalyticIntent::FilterFocus,
            Hypothesis::Extreme => AnalyticIntent::Extreme,
            Hypothesis::Categorize => AnalyticIntent::Categorize,
            Hypothesis::Summarize => AnalyticIntent::Summarize,
            Hypothesis::UnfamiliarInteraction | Hypothesis::UnfamiliarEncoding => return None,
        })
    }

    pub fn phase(self) -> Phase {
        if self.analytic().is_some() {
            Phase::Exploration
        } else {
            Phase::Onboarding
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Intent {
    pub phase: Phase,
    pub hypothesis: Hypothesis,
    pub rationale: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_data: Option<String>,
    /// What the user seems to be after, phrased as an analysis goal.
    #[serde(default)]
    pub goal: String,
    #[serde(default)]
    pub target_views: Vec<String>,
    /// User-facing wording proposed by the backend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase")]
struct IntentResponse {
    hypothesis: Hypothesis,
    rationale: String,
    #[serde(default)]
    target_data: Option<String>,
    #[serde(default)]
    goal: String,
    #[serde(default)]
    target_views: Vec<String>,
    #[serde(default)]
    message: Option<String>,
}

pub fn intent_request(event: &HelpNeededEvent, ctx: &ContextBundle, knowledge: &Knowledge) -> PromptRequest {
    let guidance = match event.phase {
        Phase::Onboarding => {
            "The user seems unsure how to operate the dashboard. Decide whether the difficulty is with an interaction \
             (unfamiliar_interaction) or with reading an encoding (unfamiliar_encoding), taking the usual workflow and \
             how complex each function is into account. Write one short, actionable tip."
        }
        _ => {
            "The user seems stuck on an analysis. Infer the analytic intent from the data the recent events touched \
             (compare, trend, filter_focus, extreme, categorize or summarize), name the data involved, state a goal, \
             list the views needed, and write a short offer to carry out the analysis."
        }
    };
    let system = format!(
        "You help an analyst who is using a dashboard.\nTask: {}\nDashboard:\n{}\nOperations:\n{}\n{guidance}",
        knowledge.task_statement,
        knowledge.system_introduction,
        knowledge.operations_text()
    );
    let user = format!(
        "help event {} ({}, {}): {}\nevidence: {}\ncontext:\n{}",
        event.id,
        event.phase,
        event.trigger.as_str(),
        event.description,
        event.evidence.join(", "),
        ctx.render()
    );
    PromptRequest::new(Role::Planner, Schema::IntentSuggestion, system, user)
}

/// Interprets a behavioral help event. Verification events never come here.
pub fn infer_intent(
    event: &HelpNeededEvent,
    ctx: &ContextBundle,
    knowledge: &Knowledge,
    backend: &dyn LlmBackend,
) -> Result<Intent, PlanningError> {
    if event.phase == Phase::Verification {
        return Err(PlanningError::Unresolved("verification events are handled by the note verifier".into()));
    }
    let req = intent_request(event, ctx, knowledge);
    let phase = event.phase;
    let resp: IntentResponse = complete_with(backend, &req, |r: &IntentResponse| {
        if r.hypothesis.phase() != phase {
            Err(format!("hypothesis {:?} does not fit phase {phase}", r.hypothesis))
        } else {
            Ok(())
        }
    })?;
    Ok(Intent {
        phase,
        hypothesis: resp.hypothesis,
        rationale: resp.rationale,
        target_data: resp.target_data,
        goal: resp.goal,
        target_views: resp.target_views,
        message: resp.message.filter(|m| !m.trim().is_empty()),
    })
}

/// Orders the plan's views along the knowledge workflow and caps its length.
pub fn build_plan(
    intent: &Intent,
    knowledge: &Knowledge,
    view_ids: &[String],
    max_steps: u32,
) -> Result<Plan, PlanningError> {
    let analytic =
        intent.hypothesis.analytic().ok_or_else(|| PlanningError::NotAnalytic(format!("{:?}", intent.hypothesis)))?;
    let mut views = if !intent.target_views.is_empty() {
        intent.target_views.clone()
    } else if let Some(vs) = knowledge.intent_views.get(&analytic) {
        vs.clone()
    } else {
        knowledge.workflow.clone()
    };
    if let Some(bad) = views.iter().find(|v| !view_ids.contains(v)) {
        return Err(PlanningError::UnknownView(bad.clone()));
    }
    let mut seen = std::collections::HashSet::new();
    views.retain(|v| seen.insert(v.clone()));
    views.sort_by_key(|v| knowledge.workflow_rank(v));
    let goal = if intent.goal.trim().is_empty() {
        format!("{} {}", hypothesis_verb(analytic), intent.target_data.as_deref().unwrap_or("the data in view"))
    } else {
        intent.goal.clone()
    };
    Ok(Plan { goal, target_views: views, hypothesized_intent: analytic, max_steps: max_steps.max(1) })
}

fn hypothesis_verb(intent: AnalyticIntent) -> &'static str {
    match intent {
        AnalyticIntent::Compare => "compare",
        AnalyticIntent::Trend => "trace the trend of",
        AnalyticIntent::FilterFocus => "narrow down",
        AnalyticIntent::Extreme => "find the extremes of",
        AnalyticIntent::Categorize => "group",
        AnalyticIntent::Summarize => "summarize",
    }
}

/// Wraps an intent in a pending suggestion. Exploration intents need their plan.
pub fn generate_suggestion(id: String, event: &HelpNeededEvent, intent: &Intent, plan: Option<Plan>) -> Suggestion {
    let (kind, message) = match intent.phase {
        Phase::Onboarding => {
            (SuggestionKind::Tip, intent.message.clone().unwrap_or_else(|| format!("Tip: {}", intent.rationale)))
        }
        _ => {
            let goal = plan.as_ref().map(|p| p.goal.as_str()).unwrap_or("look into this");
            (
                SuggestionKind::ExplorationOffer,
                intent
                    .message
                    .clone()
                    .unwrap_or_else(|| format!("Looks like this part is taking a while. Want me to {goal}?")),
            )
        }
    };
    Suggestion {
        id,
        source_event: event.id.clone(),
        phase: intent.phase,
        kind,
        message,
        plan: if kind == SuggestionKind::ExplorationOffer { plan } else { None },
        correction: None,
        status: SuggestionStatus::Pending,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{ScriptEntry, ScriptedBackend};
    use crate::model::Tool;
    use crate::model::Trigger;
    use crate::store::{OperationTemplate, PatternRow, ProblemCategory};
    use serde_json::json;

    fn knowledge() -> Knowledge {
        Knowledge {
            name: "k".into(),
            task_statement: "find the incident".into(),
            system_introduction: "hexmap, timeline, messages".into(),
            operation_catalog: vec![OperationTemplate { tool: Tool::ReadData, description: "read".into() }],
            pattern_catalog: vec![PatternRow {
                interaction_pattern: "p".into(),
                interpretation: "i".into(),
                subcategory: "s".into(),
                problem_category: ProblemCategory::DataUnderstanding,
                assistance: "a".into(),
            }],
            pattern_catalog_file: None,
            workflow: vec!["hexmap".into(), "timeline".into(), "messages".into()],
            task_slots: vec![],
            intent_views: Default::default(),
            omission_min_notes: 3,
        }
    }

    fn event(phase: Phase) -> HelpNeededEvent {
        HelpNeededEvent {
            id: "s1.help1".into(),
            session_id: "s1".into(),
            phase,
            trigger: Trigger::ProlongedPause,
            description: "slow hovers".into(),
            evidence: vec!["s1.ev3".into()],
            detected_at: 10,
        }
    }

    fn views() -> Vec<String> {
        vec!["hexmap".into(), "timeline".into(), "messages".into()]
    }

    #[test]
    fn plan_follows_workflow_order() {
        let intent = Intent {
            phase: Phase::Exploration,
            hypothesis: Hypothesis::Summarize,
            rationale: "r".into(),
            target_data: Some("fire messages".into()),
            goal: String::new(),
            target_views: vec!["messages".into(), "hexmap".into(), "timeline".into()],
            message: None,
        };
        let plan = build_plan(&intent, &knowledge(), &views(), 10).unwrap();
        assert_eq!(plan.target_views, views());
        assert_eq!(plan.goal, "summarize fire messages");
        assert_eq!(plan.max_steps, 10);
        let bad = Intent { target_views: vec!["radar".into()], ..intent };
        assert_eq!(build_plan(&bad, &knowledge(), &views(), 10), Err(PlanningError::UnknownView("radar".into())));
    }

    #[test]
    fn backend_failure_leaves_intent_unresolved() {
        let b =
            ScriptedBackend::from_entries(true, vec![ScriptEntry::new(Role::Planner, &[], json!("no idea")).times(2)]);
        let r = infer_intent(&event(Phase::Exploration), &ContextBundle::empty(), &knowledge(), &b);
        assert!(matches!(r, Err(PlanningError::Unresolved(_))));
    }

    #[test]
    fn onboarding_tip() {
        let b = ScriptedBackend::from_entries(
            true,
            vec![ScriptEntry::new(
                Role::Planner,
                &["s1.help1"],
                json!({"hypothesis": "unfamiliar_interaction", "rationale": "no follow-up", "message": "Click the selected hexagon again to clear the selection."}),
            )],
        );
        let ev = event(Phase::Onboarding);
        let intent = infer_intent(&ev, &ContextBundle::empty(), &knowledge(), &b).unwrap();
        assert_eq!(intent.hypothesis, Hypothesis::UnfamiliarInteraction);
        let s = generate_suggestion("s1.sug1".into(), &ev, &intent, None);
        assert_eq!(s.kind, SuggestionKind::Tip);
        assert!(s.check_shape().is_ok());
    }

    #[test]
    fn phase_mismatch_is_rejected() {
        let b = ScriptedBackend::from_entries(
            true,
            vec![ScriptEntry::new(Role::Planner, &[], json!({"hypothesis": "trend", "rationale": "x"}))],
        );
        assert!(infer_intent(&event(Phase::Onboarding), &ContextBundle::empty(), &knowledge(), &b).is_err());
    }
}

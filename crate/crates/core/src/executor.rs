//! ReAct loop: thought, one tool call, feedback, repeat until a finding.
//!
//! [`ReactLoop::advance`] performs exactly one iteration so the gateway
//! can interleave loop steps with user messages (an abort lands between
//! steps). [`run_loop`] drives a loop to completion for batch use.

use serde::{Deserialize, Serialize};

use crate::backend::{complete_with, BackendError, LlmBackend, PromptRequest, Role, Schema};
use crate::model::{Author, Feedback, Finding, Millis, Note, Operation, Plan, ReasoningStep, StepAction};
use crate::sandbox::ToolTarget;
use crate::store::Knowledge;

pub const MAX_CONSECUTIVE_ERRORS: u32 = 3;
/// Longest feedback payload rendering passed back to the reasoner.
pub const PAYLOAD_PROMPT_CHARS: usize = 2400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    Finished,
    StepCap,
    AbortedByUser,
    ErrorExhausted,
}

impl Terminal {
    pub fn as_str(self) -> &'static str {
        match self {
            Terminal::Finished => "finished",
            Terminal::StepCap => "step_cap",
            Terminal::AbortedByUser => "aborted_by_user",
            Terminal::ErrorExhausted => "error_exhausted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExecutionTrace {
    pub plan_id: String,
    pub steps: Vec<ReasoningStep>,
    pub feedbacks: Vec<Feedback>,
    pub findings: Vec<Finding>,
    pub terminal: Option<Terminal>,
    /// Backend failures in order, each already retried once.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub backend_errors: Vec<String>,
}

impl ExecutionTrace {
    pub fn new(plan_id: impl Into<String>) -> Self {
        ExecutionTrace {
            plan_id: plan_id.into(),
            steps: Vec::new(),
            feedbacks: Vec::new(),
            findings: Vec::new(),
            terminal: None,
            backend_errors: Vec::new(),
        }
    }

    pub fn operations(&self) -> impl Iterator<Item = &Operation> {
        self.steps.iter().filter_map(ReasoningStep::operation)
    }

    /// Checks the structural invariants every trace must satisfy.
    pub fn check(&self, max_steps: u32) -> Result<(), String> {
        let tool_steps = self.steps.iter().filter(|s| !s.is_terminal()).count();
        if self.feedbacks.len() != tool_steps {
            return Err(format!("{} feedbacks for {tool_steps} tool steps", self.feedbacks.len()));
        }
        if self.steps.len() > max_steps as usize {
            return Err(format!("{} steps exceeds cap {max_steps}", self.steps.len()));
        }
        if self.steps.is_empty()
            && self.terminal != Some(Terminal::ErrorExhausted)
            && self.terminal != Some(Terminal::AbortedByUser)
        {
            return Err("empty trace".into());
        }
        for (i, s) in self.steps.iter().enumerate() {
            if s.index as usize != i + 1 {
                return Err(format!("step {} has index {}", i + 1, s.index));
            }
            if s.is_terminal() && i + 1 != self.steps.len() {
                return Err("finish step is not last".into());
            }
        }
        for (f, s) in self.feedbacks.iter().zip(self.steps.iter().filter(|s| !s.is_terminal())) {
            if f.step_index != s.index {
                return Err(format!("feedback for step {} follows step {}", f.step_index, s.index));
            }
        }
        if (self.terminal == Some(Terminal::Finished)) != !self.findings.is_empty() {
            return Err("findings must exist exactly when finished".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
struct StepResponse {
    thought: String,
    action: StepAction,
}

/// What one iteration produced, in the order it should be streamed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepEvent {
    pub step: Option<ReasoningStep>,
    pub feedback: Option<Feedback>,
    pub finding: Option<Finding>,
    pub note: Option<Note>,
    pub backend_error: Option<String>,
    pub terminal: Option<Terminal>,
}

#[derive(Debug, Clone)]
pub struct ReactLoop {
    plan: Plan,
    trace: ExecutionTrace,
    consecutive_errors: u32,
}

impl ReactLoop {
    pub fn new(plan_id: impl Into<String>, plan: Plan) -> Self {
        ReactLoop { plan, trace: ExecutionTrace::new(plan_id), consecutive_errors: 0 }
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    pub fn trace(&self) -> &ExecutionTrace {
        &self.trace
    }

    pub fn into_trace(self) -> ExecutionTrace {
        self.trace
    }

    pub fn is_done(&self) -> bool {
        self.trace.terminal.is_some()
    }

    pub fn abort(&mut self) -> bool {
        if self.is_done() {
            return false;
        }
        self.trace.terminal = Some(Terminal::AbortedByUser);
        true
    }

    /// Runs one iteration: asks for the next step and, for a tool step,
    /// executes it against `target`.
    pub fn advance(
        &mut self,
        knowledge: &Knowledge,
        backend: &dyn LlmBackend,
        target: &mut dyn ToolTarget,
        mint_note_id: &mut dyn FnMut() -> String,
        now: Millis,
    ) -> StepEvent {
        let mut out = StepEvent::default();
        if let Some(t) = self.trace.terminal {
            out.terminal = Some(t);
            return out;
        }
        let last_error =
            if self.consecutive_errors > 0 { self.trace.backend_errors.last().map(String::as_str) } else { None };
        let step = match next_step(&self.plan, &self.trace, knowledge, backend, &*target, last_error) {
            Ok(step) => step,
            Err(e) => {
                self.consecutive_errors += 1;
                let text = e.to_string();
                self.trace.backend_errors.push(text.clone());
                out.backend_error = Some(text);
                if self.consecutive_errors >= MAX_CONSECUTIVE_ERRORS {
                    self.trace.terminal = Some(Terminal::ErrorExhausted);
                    out.terminal = self.trace.terminal;
                }
                return out;
            }
        };
        self.consecutive_errors = 0;
        self.trace.steps.push(step.clone());
        match &step.action {
            StepAction::Finish { title, finding } => {
                let views = self.touched_views();
                let note_id = mint_note_id();
                let evidence = target.evidence(&views);
                let f = Finding { title: title.clone(), body: finding.clone(), evidence, note_id: note_id.clone() };
                let note = Note {
                    note_id,
                    author: Author::Agent,
                    text: format!("{title}: {finding}"),
                    claims: None,
                    created_at: now,
                    linked_evidence: views,
                };
                self.trace.findings.push(f.clone());
                self.trace.terminal = Some(Terminal::Finished);
                out.finding = Some(f);
                out.note = Some(note);
            }
            StepAction::Operation(op) => {
                let fb = execute_operation(op, target, step.index);
                self.trace.feedbacks.push(fb.clone());
                out.feedback = Some(fb);
                if self.trace.steps.len() >= self.plan.max_steps as usize {
                    self.trace.terminal = Some(Terminal::StepCap);
                }
            }
        }
        out.step = Some(step);
        out.terminal = self.trace.terminal;
        out
    }

    /// Views the loop operated on successfully, falling back to the plan's views.
    fn touched_views(&self) -> Vec<String> {
        let mut views: Vec<String> = Vec::new();
        for (step, fb) in self.trace.steps.iter().filter(|s| !s.is_terminal()).zip(&self.trace.feedbacks) {
            if let (Some(op), true) = (step.operation(), fb.is_ok()) {
                if !views.iter().any(|v| v == op.view()) {
                    views.push(op.view().to_string());
                }
            }
        }
        if views.is_empty() {
            views = self.plan.target_views.clone();
        }
        views
    }
}

/// Executes one operation. Errors come back in-band as feedback.
pub fn execute_operation(op: &Operation, target: &mut dyn ToolTarget, step_index: u32) -> Feedback {
    let mut fb = target.apply_tool(op);
    fb.step_index = step_index;
    fb
}

fn render_payload(fb: &Feedback) -> String {
    if fb.payload.is_null() {
        return String::new();
    }
    let text = fb.payload.to_string();
    if text.chars().count() <= PAYLOAD_PROMPT_CHARS {
        text
    } else {
        let cut: String = text.chars().take(PAYLOAD_PROMPT_CHARS).collect();
        format!("{cut}... (truncated)")
    }
}

/// Prompt for the next step. `last_error` is the backend failure of the
/// immediately preceding attempt, if any.
pub fn step_request(
    plan: &Plan,
    trace: &ExecutionTrace,
    knowledge: &Knowledge,
    target: &dyn ToolTarget,
    last_error: Option<&str>,
) -> PromptRequest {
    let plan_id = &trace.plan_id;
    let system = format!(
        "You carry out an analysis on a dashboard, one tool call at a time.\nTask context: {}\nDashboard:\n{}Operations:\n{}\
         Each step: write a short thought, then call exactly one tool. When the goal is met, finish with a titled finding \
         that cites the numbers you read.",
        knowledge.task_statement,
        target.describe(),
        knowledge.operations_text()
    );
    let mut user = format!(
        "plan: {plan_id}\ngoal: {}\nintent: {:?}\nviews: {}\n",
        plan.goal,
        plan.hypothesized_intent,
        plan.target_views.join(", ")
    );
    let mut feedbacks = trace.feedbacks.iter();
    for step in &trace.steps {
        user.push_str(&format!("step {}: {}\n", step.index, step.thought));
        if let Some(op) = step.operation() {
            user.push_str(&format!("  action: {}\n", op.describe()));
            if let Some(fb) = feedbacks.next() {
                match &fb.error_detail {
                    Some(err) => user.push_str(&format!("  feedback: error: {err}\n")),
                    None => {
                        user.push_str(&format!("  feedback: ok: {}\n  data: {}\n", fb.state_delta, render_payload(fb)))
                    }
                }
            }
        }
    }
    if let Some(err) = last_error {
        user.push_str(&format!("previous attempt failed: {err}\n"));
    }
    user.push_str(&format!("next step: {} of at most {}\n", trace.steps.len() + 1, plan.max_steps));
    PromptRequest::new(Role::Reasoner, Schema::ReasoningStep, system, user)
}

pub fn next_step(
    plan: &Plan,
    trace: &ExecutionTrace,
    knowledge: &Knowledge,
    backend: &dyn LlmBackend,
    target: &dyn ToolTarget,
    last_error: Option<&str>,
) -> Result<ReasoningStep, BackendError> {
    let req = step_request(plan, trace, knowledge, target, last_error);
    let resp: StepResponse = complete_with(backend, &req, |r: &StepResponse| {
        if r.thought.trim().is_empty() {
            Err("thought is empty".into())
        } else {
            Ok(())
        }
    })?;
    Ok(ReasoningStep { index: trace.steps.len() as u32 + 1, thought: resp.thought, action: resp.action })
}

/// Runs a loop to completion and returns its trace plus the agent notes created.
pub fn run_loop(
    plan_id: &str,
    plan: &Plan,
    knowledge: &Knowledge,
    backend: &dyn LlmBackend,
    target: &mut dyn ToolTarget,
    mint_note_id: &mut dyn FnMut() -> String,
    now: Millis,
) -> (ExecutionTrace, Vec<Note>) {
    let mut lp = ReactLoop::new(plan_id, plan.clone());
    let mut notes = Vec::new();
    while !lp.is_done() {
        if let Some(note) = lp.advance(knowledge, backend, target, mint_note_id, now).note {
            notes.push(note);
        }
    }
    (lp.into_trace(), notes)
}

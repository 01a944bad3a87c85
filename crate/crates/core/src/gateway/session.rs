//! One session's state machine. Every entry point takes the current time
//! explicitly; timers due at or before that time fire first.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use crate::backend::LlmBackend;
use crate::clock::IdMinter;
use crate::executor::{ReactLoop, Terminal};
use crate::model::{
    ConfigUpdate, HelpNeededEvent, InteractionEvent, Millis, Note, Operation, Phase, ProactivityConfig, Suggestion,
    SuggestionKind, SuggestionStatus, Trigger,
};
use crate::monitor::{fresh_candidates, run_detectors};
use crate::planner::{build_plan, generate_suggestion, infer_intent};
use crate::protocol::{Decision, Frame, Message};
use crate::sandbox::{Dashboard, DashboardModel, ToolTarget};
use crate::store::{Knowledge, Memory};
use crate::verifier::review_note;

use super::EngineConfig;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Timer {
    Expire(String),
    LoopStep,
}

struct ActiveLoop {
    suggestion_id: String,
    lp: ReactLoop,
}

pub struct Session {
    id: String,
    cfg: EngineConfig,
    config: ProactivityConfig,
    knowledge: Arc<Knowledge>,
    memory: Memory,
    dashboard: Dashboard,
    ids: IdMinter,
    help_events: Vec<HelpNeededEvent>,
    active: Option<ActiveLoop>,
    timers: BTreeMap<(Millis, u64), Timer>,
    timer_seq: u64,
    last_offered: BTreeMap<Phase, Millis>,
    backlog: VecDeque<(HelpNeededEvent, Suggestion)>,
    reminded: BTreeSet<String>,
    finished_loops: Vec<(String, Terminal)>,
}

impl Session {
    pub fn new(id: String, cfg: EngineConfig, knowledge: Arc<Knowledge>, model: Arc<DashboardModel>) -> Self {
        Session {
            ids: IdMinter::new(id.clone()),
            dashboard: Dashboard::new(model, id.clone()),
            memory: Memory::new(cfg.ring_capacity),
            config: ProactivityConfig::default(),
            id,
            cfg,
            knowledge,
            help_events: Vec::new(),
            active: None,
            timers: BTreeMap::new(),
            timer_seq: 0,
            last_offered: BTreeMap::new(),
            backlog: VecDeque::new(),
            reminded: BTreeSet::new(),
            finished_loops: Vec::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &ProactivityConfig {
        &self.config
    }

    pub fn memory(&self) -> &Memory {
        &self.memory
    }

    pub fn dashboard(&self) -> &Dashboard {
        &self.dashboard
    }

    pub fn help_events(&self) -> &[HelpNeededEvent] {
        &self.help_events
    }

    pub fn loop_active(&self) -> bool {
        self.active.is_some()
    }

    /// Plan ids of completed loops with their terminal state.
    pub fn finished_loops(&self) -> &[(String, Terminal)] {
        &self.finished_loops
    }

    /// Earliest pending timer.
    pub fn next_deadline(&self) -> Option<Millis> {
        self.timers.keys().next().map(|(t, _)| *t)
    }

    fn frame(&self, at: Millis, message: Message) -> Frame {
        Frame::new(self.id.clone(), at, message)
    }

    fn schedule(&mut self, at: Millis, timer: Timer) {
        self.timer_seq += 1;
        self.timers.insert((at, self.timer_seq), timer);
    }

    fn cancel_expiry(&mut self, suggestion_id: &str) {
        self.timers.retain(|_, t| *t != Timer::Expire(suggestion_id.to_string()));
    }

    /// Fires every timer due at or before `now`, in deadline order.
    pub fn advance_to(&mut self, now: Millis, backend: &dyn LlmBackend) -> Vec<Frame> {
        let mut out = Vec::new();
        while let Some(entry) = self.timers.first_entry() {
            let (at, _) = *entry.key();
            if at > now {
                break;
            }
            let timer = entry.remove();
            match timer {
                Timer::Expire(id) => self.expire(&id, at, &mut out),
                Timer::LoopStep => self.step_loop(at, backend, &mut out),
            }
        }
        out
    }

    fn expire(&mut self, id: &str, at: Millis, out: &mut Vec<Frame>) {
        match self.memory.transition_suggestion(id, SuggestionStatus::Expired) {
            Ok(s) => {
                out.push(self.frame(at, Message::Expiry { suggestion_id: id.to_string() }));
                if s.phase == Phase::Verification {
                    self.promote_backlog(at, out);
                }
            }
            Err(e) => tracing::debug!(suggestion = id, error = %e, "expiry timer for settled suggestion"),
        }
    }

    fn step_loop(&mut self, at: Millis, backend: &dyn LlmBackend, out: &mut Vec<Frame>) {
        let Some(active) = self.active.as_mut() else { return };
        let ids = &mut self.ids;
        let mut mint = || ids.mint("note");
        let ev = active.lp.advance(&self.knowledge, backend, &mut self.dashboard, &mut mint, at);
        if let Some(step) = ev.step {
            out.push(Frame::new(self.id.clone(), at, Message::Step(step)));
        }
        if let Some(fb) = ev.feedback {
            out.push(Frame::new(self.id.clone(), at, Message::Feedback(fb)));
            self.memory.record_state(self.dashboard.state(), self.dashboard.version());
        }
        if let Some(err) = ev.backend_error {
            out.push(Frame::new(self.id.clone(), at, Message::error("backend", err)));
        }
        if let (Some(finding), Some(note)) = (ev.finding, ev.note) {
            self.memory.put_note(note.clone());
            out.push(Frame::new(self.id.clone(), at, Message::Finding { finding, note }));
        }
        match ev.terminal {
            None => self.schedule(at + self.cfg.step_interval, Timer::LoopStep),
            Some(t) => self.finish_loop(t, at, out),
        }
    }

    fn finish_loop(&mut self, terminal: Terminal, at: Millis, out: &mut Vec<Frame>) {
        self.timers.retain(|_, t| *t != Timer::LoopStep);
        if let Some(active) = self.active.take() {
            tracing::info!(session = %self.id, plan = %active.suggestion_id, terminal = terminal.as_str(), "loop ended");
            self.finished_loops.push((active.suggestion_id, terminal));
        }
        if terminal != Terminal::Finished && terminal != Terminal::AbortedByUser {
            out.push(self.frame(
                at,
                Message::error(&format!("loop_{}", terminal.as_str()), "the analysis stopped before a finding"),
            ));
        }
    }

    /// Handles one inbound message at `now`. Timers must already be advanced.
    pub fn handle(&mut self, message: Message, now: Millis, backend: &dyn LlmBackend) -> Vec<Frame> {
        let mut out = Vec::new();
        match message {
            Message::Event(ev) => self.on_event(ev, now, backend, &mut out),
            Message::Decision { suggestion_id, decision } => self.on_decision(&suggestion_id, decision, now, &mut out),
            Message::Interact { suggestion_id } => match self.memory.suggestion(&suggestion_id) {
                Some(s) if s.status == SuggestionStatus::Pending => {
                    self.cancel_expiry(&suggestion_id);
                    out.push(self.frame(now, Message::Ack { of: "interact".into(), config: None }));
                }
                Some(s) => out.push(self.frame(
                    now,
                    Message::error("illegal_transition", format!("suggestion {suggestion_id} is {:?}", s.status)),
                )),
                None => out.push(self.frame(now, Message::error("unknown_suggestion", suggestion_id))),
            },
            Message::Note { note } => self.on_note(note, now, backend, &mut out),
            Message::Config(update) => self.on_config(&update, now, &mut out),
            Message::Operation { operation } => self.on_operation(&operation, now, &mut out),
            Message::Abort => match self.active.as_mut() {
                Some(active) => {
                    active.lp.abort();
                    out.push(self.frame(now, Message::Ack { of: "abort".into(), config: None }));
                    self.finish_loop(Terminal::AbortedByUser, now, &mut out);
                }
                None => out.push(self.frame(now, Message::error("no_loop", "no analysis is running"))),
            },
            other => out.push(self.frame(
                now,
                Message::error("unexpected_kind", format!("{} is not accepted from clients", other.kind())),
            )),
        }
        out
    }

    fn on_config(&mut self, update: &ConfigUpdate, now: Millis, out: &mut Vec<Frame>) {
        match self.config.apply(update) {
            Ok(next) => {
                self.config = next;
                out.push(self.frame(now, Message::Ack { of: "config".into(), config: Some(self.config.clone()) }));
            }
            Err(e) => out.push(self.frame(now, Message::error("config", e))),
        }
    }

    fn on_operation(&mut self, op: &Operation, now: Millis, out: &mut Vec<Frame>) {
        let fb = self.dashboard.apply_tool(op);
        self.memory.record_state(self.dashboard.state(), self.dashboard.version());
        out.push(self.frame(now, Message::Feedback(fb)));
    }

    fn on_event(&mut self, mut ev: InteractionEvent, now: Millis, backend: &dyn LlmBackend, out: &mut Vec<Frame>) {
        let id = self.ids.mint("ev");
        ev.event_id = id;
        if let Err(e) = self.memory.append_event(&self.id, ev) {
            out.push(self.frame(now, Message::error("out_of_order", e.to_string())));
            return;
        }
        if self.active.is_some() {
            return;
        }
        let phases: Vec<Phase> = [Phase::Exploration, Phase::Onboarding]
            .into_iter()
            .filter(|p| self.config.is_enabled(*p))
            .filter(|p| self.memory.pending(*p).is_none())
            .filter(|p| self.last_offered.get(p).is_none_or(|t| now - t >= self.config.suggestion_cooldown))
            .collect();
        if phases.is_empty() {
            return;
        }
        let ctx = self.memory.snapshot_context(self.cfg.context_window);
        let candidates = fresh_candidates(&ctx.events, &self.config);
        if candidates.is_empty() {
            return;
        }
        let mut drafts = run_detectors(&phases, &candidates, &ctx, &self.knowledge, backend);
        drafts.sort_by_key(|d| std::cmp::Reverse(d.phase.priority()));
        let Some(draft) = drafts.into_iter().next() else { return };
        let event = HelpNeededEvent {
            id: self.ids.mint("help"),
            session_id: self.id.clone(),
            phase: draft.phase,
            trigger: draft.trigger,
            description: draft.description,
            evidence: draft.evidence,
            detected_at: now,
        };
        self.help_events.push(event.clone());
        out.push(self.frame(now, Message::HelpNeeded(event.clone())));

        let intent = match infer_intent(&event, &ctx, &self.knowledge, backend) {
            Ok(i) => i,
            Err(e) => {
                out.push(self.frame(now, Message::error("planning", format!("I could not work out how to help: {e}"))));
                return;
            }
        };
        let plan = if intent.phase == Phase::Exploration {
            match build_plan(&intent, &self.knowledge, &self.dashboard.view_ids(), self.config.max_react_steps) {
                Ok(p) => Some(p),
                Err(e) => {
                    out.push(
                        self.frame(now, Message::error("planning", format!("I could not plan this analysis: {e}"))),
                    );
                    return;
                }
            }
        } else {
            None
        };
        let suggestion = generate_suggestion(self.ids.mint("sug"), &event, &intent, plan);
        self.last_offered.insert(suggestion.phase, now);
        self.offer(suggestion, now, out);
    }

    fn offer(&mut self, suggestion: Suggestion, now: Millis, out: &mut Vec<Frame>) {
        let ttl = match suggestion.kind {
            SuggestionKind::Tip => self.cfg.tip_display,
            _ => self.config.suggestion_cooldown,
        };
        self.schedule(now + ttl, Timer::Expire(suggestion.id.clone()));
        self.memory.add_suggestion(suggestion.clone());
        out.push(self.frame(now, Message::Suggestion { suggestion }));
    }

    fn on_decision(&mut self, id: &str, decision: Decision, now: Millis, out: &mut Vec<Frame>) {
        let Some(s) = self.memory.suggestion(id).cloned() else {
            out.push(self.frame(now, Message::error("unknown_suggestion", id.to_string())));
            return;
        };
        let starts_loop = decision == Decision::Accept && s.kind == SuggestionKind::ExplorationOffer;
        if starts_loop && self.active.is_some() && s.status == SuggestionStatus::Pending {
            out.push(self.frame(now, Message::error("loop_busy", "another analysis is still running")));
            return;
        }
        let to = match decision {
            Decision::Accept => SuggestionStatus::Accepted,
            Decision::Dismiss => SuggestionStatus::Dismissed,
        };
        if let Err(e) = self.memory.transition_suggestion(id, to) {
            out.push(self.frame(now, Message::error("illegal_transition", e.to_string())));
            return;
        }
        self.cancel_expiry(id);
        out.push(self.frame(now, Message::Ack { of: "decision".into(), config: None }));
        if starts_loop {
            if let Some(plan) = s.plan {
                self.active = Some(ActiveLoop { suggestion_id: s.id.clone(), lp: ReactLoop::new(s.id.clone(), plan) });
                self.schedule(now + self.cfg.step_interval, Timer::LoopStep);
            }
        }
        if s.phase == Phase::Verification {
            self.promote_backlog(now, out);
        }
    }

    fn on_note(&mut self, mut note: Note, now: Millis, backend: &dyn LlmBackend, out: &mut Vec<Frame>) {
        if note.note_id.is_empty() {
            note.note_id = self.ids.mint("note");
        }
        let prior: Vec<Note> = self.memory.notes().to_vec();
        self.memory.put_note(note.clone());
        if !self.config.is_enabled(Phase::Verification) {
            return;
        }
        let model = self.dashboard.shared_model();
        let Some(outcome) = review_note(&note, &prior, &self.knowledge, &model, backend, &mut self.reminded) else {
            out.push(
                self.frame(now, Message::error("review_unavailable", format!("note {} was not checked", note.note_id))),
            );
            return;
        };
        out.push(self.frame(now, Message::Review(outcome.review.clone())));
        for issue in outcome.review.issues {
            let event = HelpNeededEvent {
                id: self.ids.mint("help"),
                session_id: self.id.clone(),
                phase: Phase::Verification,
                trigger: Trigger::NoteIssue,
                description: issue.comment.clone(),
                evidence: vec![note.note_id.clone()],
                detected_at: now,
            };
            let suggestion = Suggestion {
                id: self.ids.mint("sug"),
                source_event: event.id.clone(),
                phase: Phase::Verification,
                kind: SuggestionKind::NoteCorrection,
                message: issue.comment.clone(),
                plan: None,
                correction: Some(crate::model::Correction { note_id: note.note_id.clone(), issue }),
                status: SuggestionStatus::Pending,
            };
            self.backlog.push_back((event, suggestion));
        }
        self.promote_backlog(now, out);
    }

    /// Offers the next queued correction once no verification suggestion is pending.
    fn promote_backlog(&mut self, now: Millis, out: &mut Vec<Frame>) {
        if self.memory.pending(Phase::Verification).is_some() || !self.config.is_enabled(Phase::Verification) {
            return;
        }
        let Some((mut event, suggestion)) = self.backlog.pop_front() else { return };
        event.detected_at = now;
        self.help_events.push(event.clone());
        out.push(self.frame(now, Message::HelpNeeded(event)));
        self.offer(suggestion, now, out);
    }
}

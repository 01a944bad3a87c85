//! Per-run scoring on 0–5 scales.
//!
//! The rubric scorer is mechanical: repeated operations cost path
//! efficiency, numbers in the finding are recomputed on the reference
//! dashboard, and completion is coverage of the task's expected views and
//! fields. The judge scorer asks a backend instead.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{EvalRun, EvalTask, Scorer, Scores};
use crate::backend::{complete_with, LlmBackend, PromptRequest, Role, Schema};
use crate::executor::{ExecutionTrace, Terminal};
use crate::model::Operation;
use crate::sandbox::{DashboardModel, ReferenceDashboard};
use crate::verifier::numbers_agree;

pub const MAX_SCORE: f64 = 5.0;

#[derive(Clone, Copy)]
pub enum ScoreMode<'a> {
    Rubric,
    Judge(&'a dyn LlmBackend),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct JudgeScores {
    pub task_completion: f64,
    pub data_accuracy: f64,
    pub path_efficiency: f64,
}

/// 5 minus the number of operations that exactly repeat an earlier one.
pub fn path_efficiency(trace: &ExecutionTrace) -> f64 {
    let ops: Vec<&Operation> = trace.operations().collect();
    let repeats = ops.iter().enumerate().filter(|(i, op)| ops[..*i].contains(op)).count();
    (MAX_SCORE - repeats as f64).max(0.0)
}

/// A number written in free text.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextNumber {
    pub value: f64,
    pub percent: bool,
}

/// Pulls standalone numbers out of text. Skips digits glued to letters
/// (ids like `s1`), clock times and dates, and bare years.
pub fn extract_numbers(text: &str) -> Vec<TextNumber> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].is_ascii_digit() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len()
            && (chars[i].is_ascii_digit()
                || ((chars[i] == '.' || chars[i] == ',') && chars.get(i + 1).is_some_and(char::is_ascii_digit)))
        {
            i += 1;
        }
        let prev = start.checked_sub(1).map(|p| chars[p]);
        let next = chars.get(i).copied();
        let glued = |c: Option<char>| c.is_some_and(|c| c.is_alphabetic() || c == '_' || c == ':' || c == '/');
        let dashed_before = prev == Some('-') && start >= 2 && chars[start - 2].is_ascii_digit();
        let dashed_after = next == Some('-') && chars.get(i + 1).is_some_and(char::is_ascii_digit);
        if glued(prev) || glued(next) || dashed_before || dashed_after {
            continue;
        }
        let raw: String = chars[start..i].iter().filter(|c| **c != ',').collect();
        let Ok(mut value) = raw.parse::<f64>() else { continue };
        let percent = next == Some('%');
        if !percent && !raw.contains('.') && (1900.0..=2100.0).contains(&value) {
            continue;
        }
        if prev == Some('-') && !dashed_before {
            value = -value;
        }
        out.push(TextNumber { value, percent });
    }
    out
}

/// Every value and group count the trace's successful operations produce
/// when replayed on the reference dashboard.
fn oracle_values(trace: &ExecutionTrace, model: &DashboardModel) -> Vec<f64> {
    let mut reference = ReferenceDashboard::new(model);
    let mut out = Vec::new();
    let tool_steps = trace.steps.iter().filter(|s| !s.is_terminal());
    for (step, fb) in tool_steps.zip(&trace.feedbacks) {
        let (Some(op), true) = (step.operation(), fb.is_ok()) else { continue };
        if let Ok(values) = reference.apply(op) {
            for v in values {
                out.push(v.value);
                out.push(v.count as f64);
            }
        }
    }
    out
}

/// Share of the finding's numbers that match a recomputed value, times 5.
/// Unfinished runs score 0; findings without numbers score 5.
pub fn data_accuracy(trace: &ExecutionTrace, model: &DashboardModel) -> f64 {
    if trace.terminal != Some(Terminal::Finished) {
        return 0.0;
    }
    let numbers: Vec<TextNumber> = trace
        .findings
        .iter()
        .flat_map(|f| extract_numbers(&f.title).into_iter().chain(extract_numbers(&f.body)))
        .collect();
    if numbers.is_empty() {
        return MAX_SCORE;
    }
    let oracle = oracle_values(trace, model);
    let matched = numbers
        .iter()
        .filter(|n| {
            oracle.iter().any(|v| numbers_agree(n.value, *v) || (n.percent && numbers_agree(n.value, v * 100.0)))
        })
        .count();
    MAX_SCORE * matched as f64 / numbers.len() as f64
}

/// Coverage of the task's expected views and fields by successful operations.
pub fn task_completion(task: &EvalTask, trace: &ExecutionTrace, model: &DashboardModel) -> f64 {
    let finished = trace.terminal == Some(Terminal::Finished);
    let expected: BTreeSet<String> = task
        .expected_views
        .iter()
        .map(|v| format!("view:{v}"))
        .chain(task.expected_fields.iter().map(|f| format!("field:{f}")))
        .collect();
    if expected.is_empty() {
        return if finished { MAX_SCORE } else { 0.0 };
    }
    let mut touched = BTreeSet::new();
    let tool_steps = trace.steps.iter().filter(|s| !s.is_terminal());
    for (step, fb) in tool_steps.zip(&trace.feedbacks) {
        let (Some(op), true) = (step.operation(), fb.is_ok()) else { continue };
        touched.insert(format!("view:{}", op.view()));
        for f in op.fields() {
            touched.insert(format!("field:{f}"));
        }
        if let Operation::ReadData { view, params } = op {
            if params.measure.is_none() && params.group_by.is_none() {
                if let Some(spec) = model.view(view) {
                    for f in spec.referenced_fields() {
                        touched.insert(format!("field:{f}"));
                    }
                }
            }
        }
    }
    let covered = expected.intersection(&touched).count();
    let mut score = MAX_SCORE * covered as f64 / expected.len() as f64;
    if !finished {
        score = score.min(MAX_SCORE / 2.0);
    }
    score
}

fn judge_request(task: &EvalTask, trace: &ExecutionTrace) -> PromptRequest {
    let mut user = format!("task {}: {}\n", task.task_id, task.prompt);
    let mut feedbacks = trace.feedbacks.iter();
    for step in &trace.steps {
        user.push_str(&format!("step {}: {}\n", step.index, step.thought));
        if let Some(op) = step.operation() {
            user.push_str(&format!("  action: {}\n", op.describe()));
            if let Some(fb) = feedbacks.next() {
                match &fb.error_detail {
                    Some(e) => user.push_str(&format!("  error: {e}\n")),
                    None => user.push_str(&format!("  data: {}\n", fb.payload)),
                }
            }
        }
    }
    for f in &trace.findings {
        user.push_str(&format!("finding: {}: {}\n", f.title, f.body));
    }
    user.push_str(&format!("terminal: {}\n", trace.terminal.map(Terminal::as_str).unwrap_or("running")));
    PromptRequest::new(
        Role::Judge,
        Schema::JudgeScores,
        "You grade an agent's dashboard analysis on three 0-5 scales: taskCompletion (did it answer the task), \
         dataAccuracy (are the reported numbers the ones it read), pathEfficiency (did it avoid redundant steps).",
        user,
    )
}

fn in_range(x: f64) -> bool {
    (0.0..=MAX_SCORE).contains(&x)
}

/// Scores one run in place. A judge failure leaves the run unscored and flagged.
pub fn score_run(run: &mut EvalRun, task: &EvalTask, mode: ScoreMode<'_>, model: &DashboardModel) {
    match mode {
        ScoreMode::Rubric => {
            run.scores = Some(Scores {
                task_completion: task_completion(task, &run.trace, model),
                data_accuracy: data_accuracy(&run.trace, model),
                path_efficiency: path_efficiency(&run.trace),
            });
            run.scorer = Some(Scorer::Rubric);
            run.flagged = false;
        }
        ScoreMode::Judge(backend) => {
            let req = judge_request(task, &run.trace);
            let judged = complete_with(backend, &req, |s: &JudgeScores| {
                if [s.task_completion, s.data_accuracy, s.path_efficiency].into_iter().all(in_range) {
                    Ok(())
                } else {
                    Err("scores must lie in [0, 5]".into())
                }
            });
            match judged {
                Ok(s) => {
                    run.scores = Some(Scores {
                        task_completion: s.task_completion,
                        data_accuracy: s.data_accuracy,
                        path_efficiency: s.path_efficiency,
                    });
                    run.scorer = Some(Scorer::LlmJudge);
                    run.flagged = false;
                }
                Err(e) => {
                    tracing::warn!(task = %task.task_id, error = %e, "judge failed; run left unscored");
                    run.scores = None;
                    run.scorer = None;
                    run.flagged = true;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nums(s: &str) -> Vec<f64> {
        extract_numbers(s).into_iter().map(|n| n.value).collect()
    }

    #[test]
    fn number_extraction() {
        assert_eq!(nums("West leads with 1,234.5 in sales, 12% more"), vec![1234.5, 12.0]);
        assert_eq!(nums("session s1 at 18:42 on 2019-04-06"), Vec::<f64>::new());
        assert_eq!(nums("in 2019 profit fell by -3.5"), vec![-3.5]);
        assert!(extract_numbers("margin 44.9%")[0].percent);
    }

    #[test]
    fn repeats_cost_efficiency() {
        use crate::model::{ReasoningStep, StepAction};
        let mut t = ExecutionTrace::new("p");
        for i in 0..4 {
            t.steps.push(ReasoningStep {
                index: i + 1,
                thought: "t".into(),
                action: StepAction::Operation(Operation::read_rows("v")),
            });
        }
        assert_eq!(path_efficiency(&t), 2.0);
    }
}

//! Batch evaluation: categorized tasks are injected one by one into a
//! fresh sandbox dashboard, the ReAct loop runs, and each trace is scored
//! by a mechanical rubric or an LLM judge.

mod report;
mod score;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicI64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backend::{complete_with, BackendError, LlmBackend, PromptRequest, Repair, Role, Schema};
use crate::executor::{run_loop, ExecutionTrace};
use crate::model::{AnalyticIntent, Millis, Plan};
use crate::sandbox::{Dashboard, DashboardModel};
use crate::store::Knowledge;

pub use report::{aggregate, mean_std, Report, ReportRow};
pub use score::{data_accuracy, extract_numbers, path_efficiency, score_run, task_completion, JudgeScores, ScoreMode};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("invalid task mix: {0}")]
    Mix(String),
    #[error("no runs to aggregate")]
    Empty,
    #[error("task file: {0}")]
    Tasks(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Comparison,
    Trend,
    Performance,
    Correlation,
    Dimension,
}

impl Category {
    pub const ALL: [Category; 5] =
        [Category::Comparison, Category::Trend, Category::Performance, Category::Correlation, Category::Dimension];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Comparison => "comparison",
            Category::Trend => "trend",
            Category::Performance => "performance",
            Category::Correlation => "correlation",
            Category::Dimension => "dimension",
        }
    }

    pub fn intent(self) -> AnalyticIntent {
        match self {
            Category::Comparison | Category::Correlation => AnalyticIntent::Compare,
            Category::Trend => AnalyticIntent::Trend,
            Category::Performance => AnalyticIntent::Extreme,
            Category::Dimension => AnalyticIntent::FilterFocus,
        }
    }

    pub fn parse(s: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

/// Per-category proportions, in [`Category::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mix(pub [f64; 5]);

impl Mix {
    /// 17 / 20 / 31 / 11 / 21 percent.
    pub const STANDARD: Mix = Mix([0.17, 0.20, 0.31, 0.11, 0.21]);
    pub const UNIFORM: Mix = Mix([0.2; 5]);

    /// Parses `comparison=0.2,trend=0.2,...`; missing categories get 0.
    pub fn parse(s: &str) -> Result<Mix, EvalError> {
        if s == "standard" {
            return Ok(Mix::STANDARD);
        }
        if s == "uniform" {
            return Ok(Mix::UNIFORM);
        }
        let mut p = [0.0; 5];
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) =
                part.split_once('=').ok_or_else(|| EvalError::Mix(format!("expected category=weight, got {part}")))?;
            let c = Category::parse(k.trim()).ok_or_else(|| EvalError::Mix(format!("unknown category {k}")))?;
            p[c as usize] = v.trim().parse().map_err(|_| EvalError::Mix(format!("bad weight {v}")))?;
        }
        Ok(Mix(p))
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.0.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(EvalError::Mix("proportions must be non-negative".into()));
        }
        let sum: f64 = self.0.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(EvalError::Mix(format!("proportions sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// Splits `n` by largest remainder; ties go to the earlier category.
    pub fn apportion(&self, n: usize) -> Result<[usize; 5], EvalError> {
        self.validate()?;
        let exact: Vec<f64> = self.0.iter().map(|p| p * n as f64).collect();
        let mut counts = [0usize; 5];
        for (c, x) in counts.iter_mut().zip(&exact) {
            *c = (x + 1e-9).floor() as usize;
        }
        let mut left = n - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..5).collect();
        order.sort_by(|&a, &b| {
            let fa = exact[a] - counts[a] as f64;
            let fb = exact[b] - counts[b] as f64;
            fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[i] += 1;
            left -= 1;
        }
        Ok(counts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalTask {
    pub task_id: String,
    pub category: Category,
    pub prompt: String,
    #[serde(default)]
    pub expected_views: Vec<String>,
    #[serde(default)]
    pub expected_fields: Vec<String>,
}

impl EvalTask {
    pub fn plan(&self, knowledge: &Knowledge, max_steps: u32) -> Plan {
        let mut views = self.expected_views.clone();
        if views.is_empty() {
            views = knowledge.workflow.clone();
        }
        views.sort_by_key(|v| knowledge.workflow_rank(v));
        Plan { goal: self.prompt.clone(), target_views: views, hypothesized_intent: self.category.intent(), max_steps }
    }
}

pub fn load_tasks(path: &Path) -> Result<Vec<EvalTask>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Tasks(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| EvalError::Tasks(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase")]
struct GeneratedTask {
    category: Category,
    prompt: String,
    #[serde(default)]
    expected_views: Vec<String>,
    #[serde(default)]
    expected_fields: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
struct TaskListResponse {
    tasks: Vec<GeneratedTask>,
}

/// Produces `n` tasks in the given mix. The backend is asked first; if it
/// fails or returns the wrong counts, tasks are drawn from `fixture`
/// (first tasks of each category, in file order).
pub fn generate_tasks(
    n: usize,
    mix: Mix,
    backend: &dyn LlmBackend,
    knowledge: &Knowledge,
    fixture: &[EvalTask],
) -> Result<Vec<EvalTask>, EvalError> {
    let counts = mix.apportion(n)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let wanted: Vec<String> = Category::ALL.iter().zip(counts).map(|(c, k)| format!("{}: {k}", c.as_str())).collect();
    let req = PromptRequest::new(
        Role::TaskGen,
        Schema::TaskList,
        format!(
            "You write realistic analysis tasks for a dashboard.\nDashboard:\n{}\nEach task must be answerable with the dashboard's views.",
            knowledge.system_introduction
        ),
        format!("write {n} tasks with these category counts: {}", wanted.join(", ")),
    );
    let generated = complete_with(backend, &req, |r: &TaskListResponse| {
        let mut got = [0usize; 5];
        for t in &r.tasks {
            got[t.category as usize] += 1;
        }
        if got == counts {
            Ok(())
        } else {
            Err(format!("category counts {got:?}, wanted {counts:?}"))
        }
    });
    match generated {
        Ok(r) => {
            let mut tasks: Vec<EvalTask> = r
                .tasks
                .into_iter()
                .map(|t| EvalTask {
                    task_id: String::new(),
                    category: t.category,
                    prompt: t.prompt,
                    expected_views: t.expected_views,
                    expected_fields: t.expected_fields,
                })
                .collect();
            tasks.sort_by_key(|t| t.category);
            for (i, t) in tasks.iter_mut().enumerate() {
                t.task_id = format!("G{:03}", i + 1);
            }
            Ok(tasks)
        }
        Err(e) => {
            tracing::info!(error = %e, "task generation fell back to the bundled fixture");
            Ok(from_fixture(counts, fixture))
        }
    }
}

fn from_fixture(counts: [usize; 5], fixture: &[EvalTask]) -> Vec<EvalTask> {
    let mut out = Vec::new();
    for (c, k) in Category::ALL.into_iter().zip(counts) {
        let pool: Vec<&EvalTask> = fixture.iter().filter(|t| t.category == c).collect();
        for i in 0..k {
            match pool.get(i) {
                Some(t) => out.push((*t).clone()),
                None => out.push(EvalTask {
                    task_id: format!("{}-{}", c.as_str(), i + 1),
                    category: c,
                    prompt: format!("Explore the dashboard and report one {} insight.", c.as_str()),
                    expected_views: Vec::new(),
                    expected_fields: Vec::new(),
                }),
            }
        }
    }
    out
}

/// How wall time is measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Timing {
    /// Real elapsed time.
    Measured,
    /// Each backend call costs `base_ms` plus a deterministic share of
    /// `jitter_ms` derived from the request fingerprint. Makes reports
    /// reproducible under the scripted backend.
    Simulated { base_ms: Millis, jitter_ms: Millis },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchConfig {
    pub max_steps: u32,
    pub timing: Timing,
    /// Concurrent runs, each on its own dashboard instance.
    pub workers: usize,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig { max_steps: 10, timing: Timing::Simulated { base_ms: 6000, jitter_ms: 8000 }, workers: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scorer {
    LlmJudge,
    Human,
    Rubric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Scores {
    pub task_completion: f64,
    pub data_accuracy: f64,
    pub path_efficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalRun {
    pub task_id: String,
    pub category: Category,
    /// Seconds.
    pub wall_time: f64,
    pub step_count: usize,
    pub trace: ExecutionTrace,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Scores>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scorer: Option<Scorer>,
    /// Set when scoring was attempted and failed.
    #[serde(default)]
    pub flagged: bool,
}

/// Backend wrapper that accumulates simulated latency per run.
struct Metered<'a> {
    inner: &'a dyn LlmBackend,
    base_ms: Millis,
    jitter_ms: Millis,
    elapsed: AtomicI64,
}

impl LlmBackend for Metered<'_> {
    fn raw(&self, req: &PromptRequest, repair: Option<&Repair>) -> Result<String, BackendError> {
        let mut h = Sha256::new();
        h.update(req.fingerprint().as_bytes());
        h.update([u8::from(repair.is_some())]);
        let d = h.finalize();
        let r = u32::from_be_bytes([d[0], d[1], d[2], d[3]]) as Millis;
        let jitter = if self.jitter_ms > 0 { r % self.jitter_ms } else { 0 };
        self.elapsed.fetch_add(self.base_ms + jitter, Ordering::Relaxed);
        self.inner.raw(req, repair)
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}

/// Runs one task on a fresh dashboard.
pub fn run_task(
    task: &EvalTask,
    cfg: &BatchConfig,
    model: &Arc<DashboardModel>,
    knowledge: &Knowledge,
    backend: &dyn LlmBackend,
) -> EvalRun {
    let mut dashboard = Dashboard::new(Arc::clone(model), format!("eval:{}", task.task_id));
    let snapshot = dashboard.snapshot();
    let plan = task.plan(knowledge, cfg.max_steps);
    let mut note_seq = 0;
    let mut mint = || {
        note_seq += 1;
        format!("{}.note{note_seq}", task.task_id)
    };
    let (trace, wall_time) = match cfg.timing {
        Timing::Measured => {
            let start = Instant::now();
            let (trace, _) = run_loop(&task.task_id, &plan, knowledge, backend, &mut dashboard, &mut mint, 0);
            (trace, start.elapsed().as_secs_f64())
        }
        Timing::Simulated { base_ms, jitter_ms } => {
            let metered = Metered { inner: backend, base_ms, jitter_ms, elapsed: AtomicI64::new(0) };
            let (trace, _) = run_loop(&task.task_id, &plan, knowledge, &metered, &mut dashboard, &mut mint, 0);
            (trace, metered.elapsed.load(Ordering::Relaxed) as f64 / 1000.0)
        }
    };
    if let Err(e) = dashboard.restore(&snapshot) {
        tracing::warn!(task = %task.task_id, error = %e, "restore after run failed");
    }
    EvalRun {
        task_id: task.task_id.clone(),
        category: task.category,
        wall_time,
        step_count: trace.steps.len(),
        trace,
        scores: None,
        scorer: None,
        flagged: false,
    }
}

/// Runs every task in isolation. A failing task becomes a run with its
/// terminal state recorded; the batch always completes.
pub fn run_batch(
    tasks: &[EvalTask],
    cfg: &BatchConfig,
    model: &Arc<DashboardModel>,
    knowledge: &Knowledge,
    backend: &dyn LlmBackend,
) -> Vec<EvalRun> {
    if cfg.workers <= 1 {
        return tasks.iter().map(|t| run_task(t, cfg, model, knowledge, backend)).collect();
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<EvalRun>>> = Mutex::new(vec![None; tasks.len()]);
    std::thread::scope(|s| {
        for _ in 0..cfg.workers.min(tasks.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(task) = tasks.get(i) else { break };
                let run = run_task(task, cfg, model, knowledge, backend);
                results.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(run);
            });
        }
    });
    results.into_inner().unwrap_or_else(|e| e.into_inner()).into_iter().flatten().collect()
}

/// Count of runs per category, in [`Category::ALL`] order.
pub fn category_counts<'a>(cats: impl IntoIterator<Item = &'a Category>) -> BTreeMap<Category, usize> {
    let mut m = BTreeMap::new();
    for c in cats {
        *m.entry(*c).or_insert(0) += 1;
    }
    m
}

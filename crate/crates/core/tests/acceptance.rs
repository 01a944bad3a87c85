//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use proactive_agent::backend::{Role, ScriptEntry, ScriptedBackend};
use proactive_agent::eval::{
    aggregate, generate_tasks, load_tasks, mean_std, run_batch, score_run, BatchConfig, Category, Mix, ScoreMode,
};
use proactive_agent::fixtures;
use proactive_agent::gateway::{replay_lines, Engine, TIP_DISPLAY_MS};
use proactive_agent::model::ProactivityConfig;
use proactive_agent::model::{
    ActionType, Bound, ConfigUpdate, InteractionEvent, IssueType, Millis, Note, Operation, Phase, Reducer, StepAction,
    SuggestionStatus,
};
use proactive_agent::monitor::{compute_think_times, detect_prolonged_pause, detect_repetition, RepetitionParams};
use proactive_agent::protocol::{decode_str, Decision, Frame, Message};
use proactive_agent::sandbox::{Dashboard, DashboardModel, QueryResult, ToolTarget};
use proactive_agent::verifier::{review_note, ClaimKind, ClaimValue, Direction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use common::{close, fixtures_dir, oracle_pauses, oracle_repetition, random_window, read_fixture, scripted, Shadow};

const DETECTION_WINDOWS: usize = 1000;
const DETECTION_MAX_EVENTS: usize = 500;
const DETECTION_BUDGET: Duration = Duration::from_secs(5);
const REPLAY_RUNS: usize = 3;
const MAX_STEPS: u32 = 10;
const STEP_BAND: (usize, usize) = (2, 5);
const SANDBOX_SEQUENCES: usize = 500;
const SANDBOX_OPS_PER_SEQUENCE: usize = 12;
/// Group sums vs the ungrouped sum add in different orders.
const CONSERVATION_REL_TOL: f64 = 1e-9;
const STATS_REL_TOL: f64 = 1e-9;
const EVAL_BUDGET: Duration = Duration::from_secs(60);
const STANDARD_COUNTS: [usize; 5] = [17, 20, 31, 11, 21];
/// Corrected numeric answers are rendered with two decimals.
const CORRECTED_NUM_TOL: f64 = 0.005;
const TIP_TOUCH_AT: Millis = 3000;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn backend_of(b: &Arc<ScriptedBackend>) -> Arc<dyn proactive_agent::backend::LlmBackend + Send + Sync> {
    b.clone()
}

// ---------------------------------------------------------------- 1

fn detection_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xD37EC7);
    let mut spent = Duration::ZERO;
    let (mut pauses, mut reps) = (0usize, 0usize);
    for w in 0..DETECTION_WINDOWS {
        let window = compute_think_times(&random_window(&mut rng, DETECTION_MAX_EVENTS)).map_err(|e| e.to_string())?;
        let cfg = ProactivityConfig {
            think_time_threshold: rng.gen_range(500..=10_000),
            repeat_count: rng.gen_range(2..=5),
            repeat_window: rng.gen_range(1000..=20_000),
            ..ProactivityConfig::default()
        };
        let params = RepetitionParams::from(&cfg);
        let start = Instant::now();
        let got_p = detect_prolonged_pause(&window, &cfg);
        let got_r = detect_repetition(&window, params);
        spent += start.elapsed();
        let want_p = oracle_pauses(&window, cfg.think_time_threshold);
        let want_r = oracle_repetition(&window, params.k, params.window_span);
        ensure(got_p == want_p, || format!("window {w}: pauses differ"))?;
        ensure(got_r == want_r, || format!("window {w}: repetitions differ\n got {got_r:?}\nwant {want_r:?}"))?;
        pauses += want_p.len();
        reps += want_r.len();
    }
    ensure(spent < DETECTION_BUDGET, || format!("detection took {spent:?}"))?;
    Ok(format!("{DETECTION_WINDOWS} windows, {pauses} pauses, {reps} repetitions, detectors {spent:.2?}"))
}

// ---------------------------------------------------------------- 2

const SCENARIOS: [&str; 2] = ["fire-summary", "tip-expiry"];

fn run_scenario(name: &str) -> (Engine, String) {
    let engine = Engine::new(
        fixtures::catalog_from_dir(&fixtures_dir()).expect("catalog"),
        backend_of(&scripted(&format!("scenarios/{name}.script.json"))),
    );
    let out = replay_lines(&engine, &read_fixture(&format!("scenarios/{name}.in.jsonl"))).expect("replay");
    let text = out.transcript();
    (engine, text)
}

fn think_time_arithmetic() -> Result<String, String> {
    let mut checked = 0;
    for name in SCENARIOS {
        let (engine, _) = run_scenario(name);
        let clicks: Vec<Millis> = read_fixture(&format!("scenarios/{name}.in.jsonl"))
            .lines()
            .filter_map(|l| match decode_str(l).ok()?.message {
                Message::Event(e) => Some(e.click_time),
                _ => None,
            })
            .collect();
        let stored: Vec<(Millis, Option<Millis>)> = engine
            .with_session("s1", |s| s.memory().recent_events().iter().map(|e| (e.click_time, e.think_time)).collect())
            .map_err(|e| e.to_string())?;
        ensure(stored.len() == clicks.len(), || format!("{name}: {} events stored of {}", stored.len(), clicks.len()))?;
        for (i, (t, think)) in stored.iter().enumerate() {
            let want = if i == 0 { None } else { Some(clicks[i] - clicks[i - 1]) };
            ensure(*t == clicks[i] && *think == want, || {
                format!("{name} event {i}: thinkTime {think:?}, want {want:?}")
            })?;
            checked += 1;
        }
    }
    // the bundled message stream as one long event sequence
    let msgs = fixtures::mc3_messages();
    let mut last = None;
    let events: Vec<InteractionEvent> = msgs
        .iter()
        .filter(|m| {
            let t = m.time.and_utc().timestamp_millis();
            let keep = last != Some(t);
            last = Some(t);
            keep
        })
        .map(|m| InteractionEvent::new(ActionType::Hover, "messages", &m.id, m.time.and_utc().timestamp_millis()))
        .collect();
    let annotated = compute_think_times(&events).map_err(|e| e.to_string())?;
    for w in annotated.windows(2) {
        ensure(w[1].think_time == Some(w[1].click_time - w[0].click_time), || "message stream think time".into())?;
        checked += 1;
    }
    Ok(format!("{checked} think times match click differences"))
}

// ---------------------------------------------------------------- 3

fn fire_summary_deterministic() -> Result<String, String> {
    let outputs: Vec<String> = (0..REPLAY_RUNS).map(|_| run_scenario("fire-summary").1).collect();
    ensure(outputs.iter().all(|o| *o == outputs[0]), || "replays differ".into())?;
    let golden = read_fixture("scenarios/fire-summary.golden.jsonl");
    ensure(outputs[0] == golden, || "replay differs from the golden transcript".into())?;

    let frames: Vec<Frame> = golden.lines().map(|l| decode_str(l).expect("golden decodes")).collect();
    let kinds: Vec<&str> = frames.iter().map(|f| f.message.kind()).collect();
    let pos = |k: &str| kinds.iter().position(|x| *x == k).ok_or_else(|| format!("no {k} frame"));
    let help = pos("help_needed")?;
    let offer = pos("suggestion")?;
    let finding = pos("finding")?;
    let review = pos("review")?;
    let tool_steps =
        frames.iter().filter(|f| matches!(&f.message, Message::Step(s) if s.operation().is_some())).count();
    ensure(help < offer && offer < finding && finding < review, || format!("frame order {kinds:?}"))?;
    ensure(tool_steps == 3, || format!("{tool_steps} tool steps"))?;
    match &frames[offer].message {
        Message::Suggestion { suggestion } => {
            ensure(suggestion.phase == Phase::Exploration && suggestion.plan.is_some(), || {
                "first suggestion is not an exploration offer".into()
            })?
        }
        _ => unreachable!(),
    }
    Ok(format!("{REPLAY_RUNS} runs byte-identical to golden ({} frames, {tool_steps} tool steps)", frames.len()))
}

// ---------------------------------------------------------------- 4

fn react_invariants() -> Result<String, String> {
    // streamed loop of the scenario
    let golden = read_fixture("scenarios/fire-summary.golden.jsonl");
    let frames: Vec<Frame> = golden.lines().map(|l| decode_str(l).unwrap()).collect();
    let mut steps = 0usize;
    let mut expect_feedback: Option<u32> = None;
    let mut finished = false;
    for f in &frames {
        match &f.message {
            Message::Step(s) => {
                ensure(expect_feedback.is_none() && !finished, || format!("step {} out of turn", s.index))?;
                ensure(!s.thought.trim().is_empty(), || "empty thought".into())?;
                steps += 1;
                ensure(s.index as usize == steps, || "step index gap".into())?;
                match &s.action {
                    StepAction::Operation(_) => expect_feedback = Some(s.index),
                    StepAction::Finish { .. } => finished = true,
                }
            }
            Message::Feedback(fb) if expect_feedback.is_some() => {
                ensure(Some(fb.step_index) == expect_feedback, || "feedback for wrong step".into())?;
                expect_feedback = None;
            }
            _ => {}
        }
    }
    ensure(finished && (1..=MAX_STEPS as usize).contains(&steps), || format!("scenario loop: {steps} steps"))?;
    let mut counts = vec![steps];

    // the scripted evaluation batch
    let model = Arc::new(fixtures::superstore_model());
    let knowledge = fixtures::superstore_knowledge();
    let tasks = load_tasks(&fixtures_dir().join("eval/tasks.json")).map_err(|e| e.to_string())?;
    let backend = scripted("eval/script.json");
    let runs = run_batch(&tasks, &BatchConfig::default(), &model, &knowledge, &*backend);
    let calls = backend.calls();
    let mut error_followups = 0;
    for run in &runs {
        run.trace.check(MAX_STEPS).map_err(|e| format!("{}: {e}", run.task_id))?;
        counts.push(run.step_count);
        let tool_steps: Vec<_> = run.trace.steps.iter().filter(|s| !s.is_terminal()).collect();
        for (step, fb) in tool_steps.iter().zip(&run.trace.feedbacks) {
            let Some(err) = &fb.error_detail else { continue };
            let next = step.index + 1;
            let seen = calls.iter().any(|c| {
                c.role == Role::Reasoner
                    && c.user_text.starts_with(&format!("plan: {}\n", run.task_id))
                    && c.user_text.contains(&format!("next step: {next} of"))
                    && c.user_text.contains(&format!("feedback: error: {err}"))
            });
            ensure(seen, || format!("{}: error of step {} missing from next prompt", run.task_id, step.index))?;
            error_followups += 1;
        }
    }
    ensure(error_followups > 0, || "no scripted scenario exercises an error step".into())?;
    let (lo, hi) = (*counts.iter().min().unwrap(), *counts.iter().max().unwrap());
    ensure(lo >= STEP_BAND.0 && hi <= STEP_BAND.1, || format!("step counts span {lo}..={hi}"))?;
    Ok(format!("{} traces valid, steps {lo}..={hi}, {error_followups} error feedbacks carried forward", counts.len()))
}

// ---------------------------------------------------------------- 5

#[derive(serde::Deserialize)]
#[serde(rename_all = "camelCase")]
struct NoteCase {
    note: Note,
    seeded_error: bool,
}

/// What the data says for the note's claim, computed on raw CSV records.
fn oracle_answer(shadow: &Shadow, claim: &proactive_agent::verifier::Claim) -> String {
    let mut s = shadow.clone();
    for (k, v) in &claim.scope {
        s.sets.insert(k.clone(), BTreeSet::from([v.clone()]));
    }
    let col = s.col(&claim.field).unwrap();
    let rows: Vec<&Vec<String>> =
        s.rows.iter().filter(|r| claim.scope.iter().all(|(k, v)| r[s.col(k).unwrap()] == *v)).collect();
    match (claim.kind, &claim.group_by) {
        (ClaimKind::NumericValue, _) => {
            let r = claim.reducer.unwrap_or(Reducer::Sum);
            if r == Reducer::Count {
                return rows.len().to_string();
            }
            format!("{}", s.scalar(&claim.field, r).value.unwrap())
        }
        (ClaimKind::TimePoint, _) => rows.iter().map(|r| r[col].clone()).min().unwrap(),
        (ClaimKind::Extremum, Some(g)) => {
            let groups = s.groups(&claim.field, g, claim.reducer.unwrap_or(Reducer::Sum));
            let pick = groups.iter().map(|(k, v)| (k.clone(), v.value.unwrap()));
            let best = match claim.direction {
                Some(Direction::Min) => pick.min_by(|a, b| a.1.total_cmp(&b.1)),
                _ => pick.max_by(|a, b| a.1.total_cmp(&b.1)),
            };
            best.unwrap().0
        }
        (ClaimKind::Extremum, None) => {
            if s.is_numeric(&claim.field) {
                let xs = rows.iter().map(|r| r[col].parse::<f64>().unwrap());
                let v = match claim.direction {
                    Some(Direction::Min) => xs.fold(f64::INFINITY, f64::min),
                    _ => xs.fold(f64::NEG_INFINITY, f64::max),
                };
                format!("{v}")
            } else {
                let xs = rows.iter().map(|r| r[col].clone());
                match claim.direction {
                    Some(Direction::Min) => xs.min().unwrap(),
                    _ => xs.max().unwrap(),
                }
            }
        }
        (k, _) => panic!("unexpected claim kind {k:?}"),
    }
}

fn answers_match(corrected: &str, oracle: &str) -> bool {
    match (corrected.parse::<f64>(), oracle.parse::<f64>()) {
        (Ok(a), Ok(b)) => (a - b).abs() <= CORRECTED_NUM_TOL,
        _ => corrected == oracle,
    }
}

fn note_verification() -> Result<String, String> {
    let cases: Vec<NoteCase> =
        serde_json::from_str(&read_fixture("notes/verification.json")).map_err(|e| e.to_string())?;
    let model = fixtures::superstore_model();
    let knowledge = fixtures::superstore_knowledge();
    let backend = scripted("notes/script.json");
    let layout: Value = serde_json::from_str(&read_fixture("superstore/layout.json")).unwrap();
    let shadow = Shadow::load(&read_fixture("superstore/orders.csv"), &layout);
    let (mut flagged, mut clean) = (0, 0);
    for case in &cases {
        let id = &case.note.note_id;
        let outcome = review_note(&case.note, &[], &knowledge, &model, &*backend, &mut BTreeSet::new())
            .ok_or_else(|| format!("{id}: review unavailable"))?;
        ensure(outcome.claims.len() == 1, || format!("{id}: {} claims", outcome.claims.len()))?;
        let review = &outcome.review;
        for issue in &review.issues {
            for k in &issue.keywords {
                ensure(case.note.text.contains(k.as_str()), || format!("{id}: keyword {k:?} not in note"))?;
            }
        }
        if case.seeded_error {
            ensure(review.issues.len() == 1, || format!("{id}: {} issues", review.issues.len()))?;
            let issue = &review.issues[0];
            let oracle = oracle_answer(&shadow, &outcome.claims[0]);
            ensure(issue.issue_type == IssueType::FactualError, || format!("{id}: {:?}", issue.issue_type))?;
            ensure(answers_match(&issue.corrected_answer, &oracle), || {
                format!("{id}: corrected {} but data says {oracle}", issue.corrected_answer)
            })?;
            ensure(!issue.keywords.is_empty(), || format!("{id}: no keywords"))?;
            flagged += 1;
        } else {
            ensure(review.clean, || format!("{id}: correct note flagged: {:?}", review.issues))?;
            let claimed = match &outcome.claims[0].claimed_value {
                ClaimValue::Num(x) => format!("{x}"),
                ClaimValue::Text(t) => t.clone(),
                ClaimValue::Range(r) => r.join(" to "),
            };
            let oracle = oracle_answer(&shadow, &outcome.claims[0]);
            ensure(answers_match(&claimed, &oracle), || {
                format!("{id}: fixture note disagrees with data ({claimed} vs {oracle})")
            })?;
            clean += 1;
        }
    }
    ensure(flagged == 10 && clean == 10, || format!("{flagged} seeded / {clean} correct notes"))?;
    Ok(format!("{flagged}/10 seeded errors flagged with oracle corrections, 0/10 false alarms"))
}

// ---------------------------------------------------------------- 6

fn random_op(rng: &mut ChaCha8Rng, shadow: &Shadow) -> Operation {
    const CAT: [&str; 5] = ["region", "segment", "category", "state", "subCategory"];
    const NUM: [&str; 4] = ["sales", "profit", "quantity", "discount"];
    let views: Vec<&String> = shadow.views.keys().collect();
    let any_view = views[rng.gen_range(0..views.len())].as_str();
    match rng.gen_range(0..10) {
        0 | 1 => {
            let field = CAT[rng.gen_range(0..CAT.len())];
            let all: Vec<String> = shadow.values(field).into_iter().collect();
            let k = rng.gen_range(1..=3.min(all.len()));
            let picked: Vec<&str> = (0..k).map(|_| all[rng.gen_range(0..all.len())].as_str()).collect();
            let view = if rng.gen_bool(0.9) { "filters" } else { any_view };
            Operation::filter_values(view, field, &picked)
        }
        2 => {
            let field = NUM[rng.gen_range(0..NUM.len())];
            let (lo, hi) = match field {
                "discount" => (0.0, 0.5),
                "quantity" => (1.0, 8.0),
                "sales" => (0.0, 3000.0),
                _ => (-800.0, 800.0),
            };
            let a: f64 = rng.gen_range(lo..hi);
            let b: f64 = rng.gen_range(lo..hi);
            let (a, b) = if rng.gen_bool(0.9) { (a.min(b), a.max(b)) } else { (a.max(b), a.min(b)) };
            Operation::filter_range("filters", field, a, b)
        }
        3 => {
            let field = if rng.gen_bool(0.8) { CAT[rng.gen_range(0..CAT.len())] } else { "nope" };
            Operation::Filter {
                view: "filters".into(),
                params: proactive_agent::model::FilterParams { field: field.into(), range: None, values: None },
            }
        }
        4 | 5 => {
            let view = if rng.gen_bool(0.5) { "map" } else { "categories" };
            let view = if rng.gen_bool(0.9) { view } else { any_view };
            let key = shadow.views[view].0.clone();
            match key {
                Some(k) if rng.gen_bool(0.85) => {
                    let all: Vec<String> = shadow.values(&k).into_iter().collect();
                    Operation::select(view, &all[rng.gen_range(0..all.len())])
                }
                _ if rng.gen_bool(0.5) => Operation::select(view, "no such element"),
                _ => Operation::Select { view: view.into(), params: Default::default() },
            }
        }
        _ => {
            let view = if rng.gen_bool(0.5) { "map" } else { "categories" };
            let reducer =
                [Reducer::Sum, Reducer::Mean, Reducer::Min, Reducer::Max, Reducer::Count][rng.gen_range(0..5)];
            Operation::read(view, NUM[rng.gen_range(0..NUM.len())], Some(CAT[rng.gen_range(0..CAT.len())]), reducer)
        }
    }
}

fn sandbox_correctness() -> Result<String, String> {
    let model = Arc::new(
        DashboardModel::load(
            &fixtures_dir().join("superstore/orders.csv"),
            &fixtures_dir().join("superstore/layout.json"),
        )
        .map_err(|e| e.to_string())?,
    );
    let layout: Value = serde_json::from_str(&read_fixture("superstore/layout.json")).unwrap();
    let base = Shadow::load(&read_fixture("superstore/orders.csv"), &layout);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5A4DB0);
    let (mut reads, mut rejected) = (0, 0);
    for seq in 0..SANDBOX_SEQUENCES {
        let mut dash = Dashboard::new(Arc::clone(&model), format!("seq{seq}"));
        let mut shadow = base.clone();
        for i in 0..SANDBOX_OPS_PER_SEQUENCE {
            let op = random_op(&mut rng, &shadow);
            let ctx = || format!("sequence {seq} op {i} {op:?}");
            match &op {
                Operation::ReadData { view, params } => {
                    let got = dash.query(view, params).map_err(|e| format!("{}: {e}", ctx()))?;
                    let (m, g, r) =
                        (params.measure.clone().unwrap(), params.group_by.clone().unwrap(), params.reducer.unwrap());
                    let want = shadow.groups(&m, &g, r);
                    let QueryResult::Groups { groups, .. } = &got else { return Err(format!("{}: not groups", ctx())) };
                    ensure(groups.len() == want.len(), || {
                        format!("{}: {} groups vs {}", ctx(), groups.len(), want.len())
                    })?;
                    for gv in groups {
                        let w = want.get(&gv.key).ok_or_else(|| format!("{}: extra group {}", ctx(), gv.key))?;
                        ensure(gv.count == w.count && gv.value.as_f64() == w.value, || {
                            format!(
                                "{}: group {} = {:?}/{} want {:?}/{}",
                                ctx(),
                                gv.key,
                                gv.value,
                                gv.count,
                                w.value,
                                w.count
                            )
                        })?;
                    }
                    // conservation against the ungrouped aggregate
                    let total = dash
                        .query(
                            "kpis",
                            &proactive_agent::model::ReadParams {
                                measure: Some(m.clone()),
                                reducer: Some(Reducer::Sum),
                                ..Default::default()
                            },
                        )
                        .map_err(|e| e.to_string())?;
                    let QueryResult::Scalar { value, count, .. } = total else { return Err("kpi not scalar".into()) };
                    let n: usize = groups.iter().map(|g| g.count).sum();
                    ensure(n == count && n == shadow.matching_rows(), || format!("{}: counts {n} vs {count}", ctx()))?;
                    if r == Reducer::Sum {
                        let s: f64 = groups.iter().filter_map(|g| g.value.as_f64()).sum();
                        let t = value.as_f64().unwrap_or(0.0);
                        ensure(close(s, t, CONSERVATION_REL_TOL), || format!("{}: group sum {s} vs total {t}", ctx()))?;
                    }
                    reads += 1;
                }
                Operation::Select { view, params } => {
                    let ok = shadow.select(view, params.element.as_deref());
                    let fb = dash.apply_tool(&op);
                    ensure(fb.is_ok() == ok, || format!("{}: engine ok={} oracle ok={ok}", ctx(), fb.is_ok()))?;
                    rejected += usize::from(!ok);
                }
                Operation::Filter { view, params } => {
                    let ok = match (&params.range, &params.values) {
                        (Some([lo, hi]), None) => {
                            let (Bound::Num(lo), Bound::Num(hi)) = (lo, hi) else { unreachable!() };
                            shadow.filter_range(view, &params.field, *lo, *hi)
                        }
                        (None, Some(vs)) => shadow.filter_values(view, &params.field, vs),
                        (None, None) => shadow.clear_filter(view, &params.field),
                        _ => false,
                    };
                    let fb = dash.apply_tool(&op);
                    ensure(fb.is_ok() == ok, || format!("{}: engine ok={} oracle ok={ok}", ctx(), fb.is_ok()))?;
                    rejected += usize::from(!ok);
                }
            }
        }
    }
    Ok(format!("{SANDBOX_SEQUENCES} sequences, {reads} grouped reads exact, {rejected} invalid ops rejected by both"))
}

// ---------------------------------------------------------------- 7

fn eval_protocol() -> Result<String, String> {
    let knowledge = fixtures::superstore_knowledge();
    let pool = load_tasks(&fixtures_dir().join("eval/tasks.json")).map_err(|e| e.to_string())?;
    let count =
        |ts: &[proactive_agent::eval::EvalTask]| Category::ALL.map(|c| ts.iter().filter(|t| t.category == c).count());

    // backend path: the generator answers with the requested counts
    let reply = json!({"tasks": pool.iter().map(|t| json!({
        "category": t.category, "prompt": t.prompt, "expectedViews": t.expected_views, "expectedFields": t.expected_fields
    })).collect::<Vec<_>>()});
    let generator =
        ScriptedBackend::from_entries(true, vec![ScriptEntry::new(Role::TaskGen, &["write 100 tasks"], reply)]);
    let generated = generate_tasks(100, Mix::STANDARD, &generator, &knowledge, &[]).map_err(|e| e.to_string())?;
    ensure(count(&generated) == STANDARD_COUNTS, || format!("generated counts {:?}", count(&generated)))?;
    // fallback path: the backend has nothing, tasks come from the bundled pool
    let silent = ScriptedBackend::from_entries(true, Vec::new());
    let fallback = generate_tasks(100, Mix::STANDARD, &silent, &knowledge, &pool).map_err(|e| e.to_string())?;
    ensure(count(&fallback) == STANDARD_COUNTS, || format!("fallback counts {:?}", count(&fallback)))?;

    let model = Arc::new(fixtures::superstore_model());
    let backend = scripted("eval/script.json");
    let start = Instant::now();
    let mut runs = run_batch(&pool, &BatchConfig::default(), &model, &knowledge, &*backend);
    for (r, t) in runs.iter_mut().zip(&pool) {
        score_run(r, t, ScoreMode::Rubric, &model);
    }
    let report = aggregate(&runs).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(runs.len() == 100 && elapsed < EVAL_BUDGET, || format!("{} runs in {elapsed:?}", runs.len()))?;

    // two-pass oracle
    let two_pass = |xs: &[f64]| {
        let n = xs.len() as f64;
        let mut s = 0.0;
        for x in xs {
            s += x;
        }
        let m = s / n;
        let mut ss = 0.0;
        for x in xs {
            ss += (x - m) * (x - m);
        }
        (m, (ss / n).sqrt())
    };
    let rel = |a: f64, b: f64| (a - b).abs() <= STATS_REL_TOL * a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
    for row in &report.rows {
        let these: Vec<_> =
            runs.iter().filter(|r| row.category == "Total" || r.category.as_str() == row.category).collect();
        let (wm, ws) = two_pass(&these.iter().map(|r| r.wall_time).collect::<Vec<_>>());
        let (sm, ss) = two_pass(&these.iter().map(|r| r.step_count as f64).collect::<Vec<_>>());
        let (tc, _) = two_pass(&these.iter().map(|r| r.scores.as_ref().unwrap().task_completion).collect::<Vec<_>>());
        let (da, _) = two_pass(&these.iter().map(|r| r.scores.as_ref().unwrap().data_accuracy).collect::<Vec<_>>());
        let (pe, _) = two_pass(&these.iter().map(|r| r.scores.as_ref().unwrap().path_efficiency).collect::<Vec<_>>());
        let pairs = [
            (row.wall_time_mean, wm),
            (row.wall_time_std, ws),
            (row.steps_mean, sm),
            (row.steps_std, ss),
            (row.task_completion.unwrap(), tc),
            (row.data_accuracy.unwrap(), da),
            (row.path_efficiency.unwrap(), pe),
        ];
        for (got, want) in pairs {
            ensure(rel(got, want), || format!("{}: {got} vs two-pass {want}", row.category))?;
        }
        ensure(row.count == these.len(), || format!("{}: count", row.category))?;
    }
    ensure(mean_std(&[]).is_none(), || "empty mean".into())?;
    ensure(report.to_tsv() == read_fixture("eval/rubric-report.tsv"), || "rubric report differs from golden".into())?;
    Ok(format!("counts {STANDARD_COUNTS:?} on both paths, stats within {STATS_REL_TOL:e}, 100 tasks in {elapsed:.2?}, golden report matches"))
}

// ---------------------------------------------------------------- 8

fn detected_pauses(backend: &ScriptedBackend) -> BTreeSet<String> {
    backend
        .calls()
        .iter()
        .filter(|c| c.role == Role::Detector)
        .flat_map(|c| {
            c.user_text
                .lines()
                .filter(|l| l.starts_with("- prolonged pause"))
                .filter_map(|l| l.split(" before ").nth(1)?.split_whitespace().next().map(str::to_string))
                .collect::<Vec<_>>()
        })
        .collect()
}

fn always_help_script() -> Vec<ScriptEntry> {
    vec![
        ScriptEntry::new(Role::Detector, &[""], json!({"help": true, "description": "stuck", "pattern": "any"})),
        ScriptEntry::new(
            Role::Planner,
            &["(onboarding,"],
            json!({"hypothesis": "unfamiliar_interaction", "rationale": "r", "message": "Try clicking a bar."}),
        ),
        ScriptEntry::new(
            Role::Planner,
            &["(exploration,"],
            json!({"hypothesis": "compare", "rationale": "r", "goal": "compare states", "targetViews": ["map"], "message": "Compare states?"}),
        ),
        ScriptEntry::new(
            Role::Reasoner,
            &[""],
            json!({"thought": "done", "action": {"finish": {"title": "t", "finding": "Nothing to add."}}}),
        ),
        ScriptEntry::new(
            Role::Verifier,
            &[""],
            json!({"claims": [{"kind": "numeric_value", "field": "sales", "claimedValue": 1, "quote": "1", "reducer": "sum"}]}),
        ),
    ]
}

fn config_semantics() -> Result<String, String> {
    // threshold change mid-session
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0F1C);
    let backend = Arc::new(ScriptedBackend::from_entries(false, Vec::new()));
    let engine = Engine::new(fixtures::catalog(), backend.clone());
    engine.handle(Frame::new("", 0, Message::Open { profile: "superstore".into(), dataset: "superstore".into() }), 0);
    let (mut t, n, switch_at) = (1000 as Millis, 60, 30);
    let mut gaps = Vec::new();
    let mut want = BTreeSet::new();
    for i in 0..n {
        if i == switch_at {
            let upd = ConfigUpdate { think_time_threshold: Some(1000), ..Default::default() };
            engine.handle(Frame::new("s1", t, Message::Config(upd)), t);
        }
        let gap = [400, 900, 1000, 1500, 2500, 2999, 3000, 4500][rng.gen_range(0..8)];
        t += gap;
        let e = InteractionEvent::new(ActionType::Hover, "map", format!("state{i}"), t);
        engine.handle(Frame::new("s1", t, Message::Event(e)), t);
        let threshold = if i >= switch_at { 1000 } else { 3000 };
        if i > 0 && gap >= threshold {
            want.insert(format!("s1.ev{}", i + 1));
        }
        gaps.push(gap);
    }
    let got = detected_pauses(&backend);
    ensure(got == want, || format!("detections {got:?}\n want {want:?}"))?;

    // disabled categories never produce suggestions
    let phases = [Phase::Onboarding, Phase::Exploration, Phase::Verification];
    let mut transcripts = 0;
    let mut produced = BTreeMap::<Phase, usize>::new();
    for round in 0..60 {
        let disabled: BTreeSet<Phase> = phases.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
        let disabled = if disabled.is_empty() { BTreeSet::from([phases[round % 3]]) } else { disabled };
        let enabled: BTreeSet<Phase> = phases.iter().copied().filter(|p| !disabled.contains(p)).collect();
        let backend = Arc::new(ScriptedBackend::from_entries(false, always_help_script()));
        let engine = Engine::new(fixtures::catalog(), backend);
        let mut out = engine
            .handle(Frame::new("", 0, Message::Open { profile: "superstore".into(), dataset: "superstore".into() }), 0);
        let cfg_at = rng.gen_range(0..2000);
        out.extend(engine.handle(
            Frame::new("s1", cfg_at, Message::Config(ConfigUpdate { enabled: Some(enabled), ..Default::default() })),
            cfg_at,
        ));
        let mut t: Millis = 2000;
        let mut pending: Vec<String> = Vec::new();
        for j in 0..40 {
            t += rng.gen_range(200..6000);
            let msg = match rng.gen_range(0..10) {
                0 => Message::Note { note: Note::user(format!("n{j}"), "Sales total 1.", t) },
                1 if !pending.is_empty() => {
                    let id = pending.remove(rng.gen_range(0..pending.len()));
                    let decision = if rng.gen_bool(0.5) { Decision::Accept } else { Decision::Dismiss };
                    Message::Decision { suggestion_id: id, decision }
                }
                _ => {
                    let el = ["CA", "TX", "NY"][rng.gen_range(0..3)];
                    Message::Event(InteractionEvent::new(ActionType::Click, "map", el, t))
                }
            };
            let frames = engine.handle(Frame::new("s1", t, msg), t);
            for f in &frames {
                if let Message::Suggestion { suggestion } = &f.message {
                    pending.push(suggestion.id.clone());
                }
            }
            out.extend(frames);
        }
        out.extend(engine.drain());
        for f in &out {
            let phase = match &f.message {
                Message::Suggestion { suggestion } => suggestion.phase,
                Message::HelpNeeded(h) => h.phase,
                _ => continue,
            };
            ensure(!disabled.contains(&phase), || format!("round {round}: {phase} suggestion while disabled"))?;
            *produced.entry(phase).or_default() += 1;
        }
        transcripts += 1;
    }
    ensure(produced.len() == 3, || format!("some category never fired when enabled: {produced:?}"))?;
    Ok(format!(
        "{} pause detections match oracle across the switch; {transcripts} transcripts with disabled categories silent",
        want.len()
    ))
}

// ---------------------------------------------------------------- 9

fn tip_expiry() -> Result<String, String> {
    let transcript: Vec<String> = read_fixture("scenarios/tip-expiry.in.jsonl").lines().map(str::to_string).collect();
    // up to the third click, which raises the tip
    let head = transcript[..4].join("\n");
    let run = |touch: bool| -> Result<(Millis, Vec<Frame>, SuggestionStatus), String> {
        let engine = Engine::new(fixtures::catalog(), backend_of(&scripted("scenarios/tip-expiry.script.json")));
        let out = replay_lines(&engine, &head).map_err(|e| e.to_string())?;
        let shown = out
            .frames
            .iter()
            .find_map(|f| match &f.message {
                Message::Suggestion { suggestion } => Some((f.at, suggestion.id.clone())),
                _ => None,
            })
            .ok_or("no tip")?;
        // replay_lines drains timers at the end, so rebuild on a fresh engine without draining
        let engine = Engine::new(fixtures::catalog(), backend_of(&scripted("scenarios/tip-expiry.script.json")));
        let mut frames = Vec::new();
        for l in &transcript[..4] {
            let f = decode_str(l).map_err(|e| e.to_string())?;
            frames.extend(engine.tick(f.at));
            frames.extend(engine.handle(f.clone(), f.at));
        }
        let (at, id) = shown;
        if touch {
            frames.extend(engine.handle(
                Frame::new("s1", at + TIP_TOUCH_AT, Message::Interact { suggestion_id: id.clone() }),
                at + TIP_TOUCH_AT,
            ));
        }
        let before = engine.tick(at + TIP_DISPLAY_MS - 1);
        ensure(before.iter().all(|f| f.message.kind() != "expiry"), || "expired early".into())?;
        frames.extend(before);
        frames.extend(engine.tick(at + TIP_DISPLAY_MS));
        frames.extend(engine.drain());
        let status = engine
            .with_session("s1", |s| s.memory().suggestion(&id).map(|s| s.status))
            .map_err(|e| e.to_string())?
            .ok_or("suggestion missing")?;
        Ok((at, frames, status))
    };
    let (shown, frames, status) = run(false)?;
    let expiry: Vec<Millis> = frames.iter().filter(|f| f.message.kind() == "expiry").map(|f| f.at).collect();
    ensure(expiry == vec![shown + TIP_DISPLAY_MS], || format!("expiry frames at {expiry:?}, tip shown at {shown}"))?;
    ensure(status == SuggestionStatus::Expired, || format!("status {status:?}"))?;
    let (_, frames, status) = run(true)?;
    ensure(frames.iter().all(|f| f.message.kind() != "expiry"), || "touched tip expired".into())?;
    ensure(status == SuggestionStatus::Pending, || format!("touched tip status {status:?}"))?;
    Ok(format!(
        "tip shown at {shown} expired at {}; touched at +{TIP_TOUCH_AT} it stays pending",
        shown + TIP_DISPLAY_MS
    ))
}

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("detection oracle equivalence", detection_oracle),
        ("thinkTime arithmetic", think_time_arithmetic),
        ("deterministic end-to-end replay", fire_summary_deterministic),
        ("ReAct invariants", react_invariants),
        ("note verification", note_verification),
        ("sandbox query correctness", sandbox_correctness),
        ("eval harness protocol", eval_protocol),
        ("config semantics", config_semantics),
        ("tip expiry", tip_expiry),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        match result {
            Ok(detail) => println!("PASS  {}. {name}: {detail} [{:.2?}]", i + 1, start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {}. {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

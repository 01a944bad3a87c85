//! Oracles and helpers shared by the integration tests. Nothing here calls
//! into the library's query or detection code.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;

use proactive_agent::backend::ScriptedBackend;
use proactive_agent::model::{ActionType, InteractionEvent, Millis, Reducer};
use proactive_agent::monitor::{PatternKind, PauseCandidate, RepetitionCandidate};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn read_fixture(rel: &str) -> String {
    let p = fixtures_dir().join(rel);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

pub fn scripted(rel: &str) -> Arc<ScriptedBackend> {
    Arc::new(ScriptedBackend::load(&fixtures_dir().join(rel)).expect("script loads"))
}

// ------------------------------------------------------------ detection

/// Random window of strictly increasing events with a small vocabulary so
/// repeats happen.
pub fn random_window(rng: &mut ChaCha8Rng, max_len: usize) -> Vec<InteractionEvent> {
    let n = rng.gen_range(0..=max_len);
    let actions = [
        ActionType::Click,
        ActionType::Hover,
        ActionType::Brush,
        ActionType::Filter,
        ActionType::Select,
        ActionType::Scroll,
        ActionType::Toggle,
        ActionType::ViewSwitch,
    ];
    let views = ["map", "trend", "list"];
    let elements = ["a", "b", "c", ""];
    let mut t: Millis = rng.gen_range(0..1000);
    (0..n)
        .map(|i| {
            t += match rng.gen_range(0..10) {
                0..=4 => rng.gen_range(1..1500),
                5..=7 => rng.gen_range(1500..5000),
                _ => rng.gen_range(5000..12_000),
            };
            let action = actions[rng.gen_range(0..actions.len())];
            let view = views[rng.gen_range(0..views.len())];
            let element = elements[rng.gen_range(0..elements.len())];
            let mut e = InteractionEvent::new(action, view, element, t);
            e.event_id = format!("e{i}");
            if action == ActionType::Filter && rng.gen_bool(0.8) {
                let field = ["region", "segment"][rng.gen_range(0..2)];
                let value = ["x", "y", "z"][rng.gen_range(0..3)];
                e = e.with_data("field", json!(field)).with_data("value", json!(value));
            }
            e
        })
        .collect()
}

/// Every event whose gap to its predecessor reaches the threshold.
pub fn oracle_pauses(window: &[InteractionEvent], threshold: Millis) -> Vec<PauseCandidate> {
    let mut out = Vec::new();
    for i in 1..window.len() {
        let gap = window[i].click_time - window[i - 1].click_time;
        if gap >= threshold {
            out.push(PauseCandidate { event_id: window[i].event_id.clone(), observed_think_time: gap, threshold });
        }
    }
    out
}

fn on_element(e: &InteractionEvent) -> bool {
    !e.element.is_empty()
        && matches!(
            e.action_type,
            ActionType::Click | ActionType::Hover | ActionType::Brush | ActionType::Select | ActionType::Toggle
        )
}

fn filter_key(e: &InteractionEvent) -> Option<(String, String)> {
    if e.action_type != ActionType::Filter {
        return None;
    }
    let field = match e.data.get("field") {
        Some(Value::String(s)) => s.clone(),
        _ if !e.element.is_empty() => e.element.clone(),
        _ => return None,
    };
    Some((field, e.data.get("value").map(|v| v.to_string()).unwrap_or_default()))
}

/// Brute-force scan for repeated clicks, filter toggles and view ping-pong.
pub fn oracle_repetition(w: &[InteractionEvent], k: usize, span: Millis) -> Vec<RepetitionCandidate> {
    let mut found: Vec<(usize, PatternKind, Vec<usize>)> = Vec::new();
    let n = w.len();

    let mut consumed = vec![false; n];
    for i in 0..n {
        if consumed[i] || !on_element(&w[i]) {
            continue;
        }
        let members: Vec<usize> = (i..n)
            .filter(|&j| {
                on_element(&w[j])
                    && w[j].view == w[i].view
                    && w[j].element == w[i].element
                    && w[j].click_time - w[i].click_time <= span
            })
            .collect();
        if members.len() >= k {
            for &j in &members {
                consumed[j] = true;
            }
            found.push((i, PatternKind::SameElementRepeat, members));
        }
    }

    let mut earliest_start: BTreeMap<String, usize> = BTreeMap::new();
    for i in 0..n {
        let Some((field, a)) = filter_key(&w[i]) else { continue };
        if earliest_start.get(&field).is_some_and(|&s| i < s) {
            continue;
        }
        let next: Vec<(usize, String)> = (i + 1..n)
            .filter_map(|j| filter_key(&w[j]).filter(|(f, _)| *f == field).map(|(_, v)| (j, v)))
            .take(2)
            .collect();
        if let [(y, b), (z, c)] = next.as_slice() {
            if a == *c && a != *b && w[*z].click_time - w[i].click_time <= span {
                found.push((i, PatternKind::FilterToggle, vec![i, *y, *z]));
                earliest_start.insert(field, *z);
            }
        }
    }

    let switches: Vec<usize> = (0..n).filter(|&i| w[i].action_type == ActionType::ViewSwitch).collect();
    let mut s = 0;
    while s < switches.len() {
        let first = switches[s];
        let mut run = vec![first];
        for &cand in &switches[s + 1..] {
            let last = run[run.len() - 1];
            let interrupted =
                (last + 1..cand).any(|j| matches!(w[j].action_type, ActionType::Select | ActionType::Filter));
            let flips = w[cand].view != w[last].view;
            let returns = run.len() < 2 || w[cand].view == w[run[run.len() - 2]].view;
            if interrupted || !flips || !returns || w[cand].click_time - w[first].click_time > span {
                break;
            }
            run.push(cand);
        }
        if run.len() >= k.max(2) {
            s += run.len();
            found.push((first, PatternKind::ViewPingpong, run));
        } else {
            s += 1;
        }
    }

    found.sort_by_key(|(i, kind, _)| (*i, *kind));
    found
        .into_iter()
        .map(|(_, kind, idx)| RepetitionCandidate {
            pattern_kind: kind,
            span: w[idx[idx.len() - 1]].click_time - w[idx[0]].click_time,
            event_ids: idx.iter().map(|&i| w[i].event_id.clone()).collect(),
        })
        .collect()
}

// --------------------------------------------------------------- tables

/// Full-scan shadow of the superstore dashboard: raw CSV records plus
/// filters and selections, evaluated row by row.
#[derive(Debug, Clone)]
pub struct Shadow {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// view -> (key field, allows select, allows filter)
    pub views: BTreeMap<String, (Option<String>, bool, bool)>,
    pub ranges: BTreeMap<String, (f64, f64)>,
    pub sets: BTreeMap<String, BTreeSet<String>>,
    pub selections: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShadowGroup {
    pub value: Option<f64>,
    pub count: usize,
}

impl Shadow {
    pub fn load(csv_text: &str, layout: &Value) -> Shadow {
        let mut r = csv::Reader::from_reader(csv_text.as_bytes());
        let header = r.headers().unwrap().iter().map(str::to_string).collect();
        let rows = r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect();
        let mut views = BTreeMap::new();
        for v in layout["views"].as_array().unwrap() {
            let tools: Vec<&str> = v["interactions"].as_array().unwrap().iter().map(|t| t.as_str().unwrap()).collect();
            views.insert(
                v["viewId"].as_str().unwrap().to_string(),
                (
                    v["encoding"]["key"].as_str().map(str::to_string),
                    tools.contains(&"select"),
                    tools.contains(&"filter"),
                ),
            );
        }
        Shadow { header, rows, views, ranges: BTreeMap::new(), sets: BTreeMap::new(), selections: BTreeMap::new() }
    }

    pub fn col(&self, field: &str) -> Option<usize> {
        self.header.iter().position(|h| h == field)
    }

    pub fn is_numeric(&self, field: &str) -> bool {
        let c = self.col(field).unwrap();
        self.rows.iter().all(|r| r[c].parse::<f64>().is_ok())
    }

    pub fn values(&self, field: &str) -> BTreeSet<String> {
        let c = self.col(field).unwrap();
        self.rows.iter().map(|r| r[c].clone()).collect()
    }

    fn keep(&self, row: &[String]) -> bool {
        for (f, (lo, hi)) in &self.ranges {
            let x: f64 = row[self.col(f).unwrap()].parse().unwrap();
            if x < *lo || x > *hi {
                return false;
            }
        }
        for (f, set) in &self.sets {
            if !set.contains(&row[self.col(f).unwrap()]) {
                return false;
            }
        }
        for (view, el) in &self.selections {
            let key = self.views[view].0.as_deref().unwrap();
            if row[self.col(key).unwrap()] != *el {
                return false;
            }
        }
        true
    }

    pub fn select(&mut self, view: &str, element: Option<&str>) -> bool {
        let Some((key, can_select, _)) = self.views.get(view).cloned() else { return false };
        if !can_select {
            return false;
        }
        match element {
            None => {
                self.selections.remove(view);
                true
            }
            Some(el) => {
                let c = self.col(key.as_deref().unwrap()).unwrap();
                if !self.rows.iter().any(|r| r[c] == el) {
                    return false;
                }
                self.selections.insert(view.to_string(), el.to_string());
                true
            }
        }
    }

    pub fn filter_range(&mut self, view: &str, field: &str, lo: f64, hi: f64) -> bool {
        if !self.views.get(view).is_some_and(|v| v.2) || self.col(field).is_none() || !self.is_numeric(field) || lo > hi
        {
            return false;
        }
        self.sets.remove(field);
        self.ranges.insert(field.to_string(), (lo, hi));
        true
    }

    pub fn filter_values(&mut self, view: &str, field: &str, values: &[String]) -> bool {
        if !self.views.get(view).is_some_and(|v| v.2)
            || self.col(field).is_none()
            || self.is_numeric(field)
            || values.is_empty()
        {
            return false;
        }
        self.ranges.remove(field);
        self.sets.insert(field.to_string(), values.iter().cloned().collect());
        true
    }

    pub fn clear_filter(&mut self, view: &str, field: &str) -> bool {
        if !self.views.get(view).is_some_and(|v| v.2) || self.col(field).is_none() {
            return false;
        }
        self.ranges.remove(field);
        self.sets.remove(field);
        true
    }

    fn reduce(xs: &[f64], reducer: Reducer) -> Option<f64> {
        if xs.is_empty() {
            return None;
        }
        Some(match reducer {
            Reducer::Sum => xs.iter().fold(0.0, |a, b| a + b),
            Reducer::Mean => xs.iter().fold(0.0, |a, b| a + b) / xs.len() as f64,
            Reducer::Min => xs.iter().copied().fold(f64::INFINITY, f64::min),
            Reducer::Max => xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Reducer::Count => xs.len() as f64,
        })
    }

    /// Groups of the current rows by `group_by`.
    pub fn groups(&self, measure: &str, group_by: &str, reducer: Reducer) -> BTreeMap<String, ShadowGroup> {
        let (m, g) = (self.col(measure).unwrap(), self.col(group_by).unwrap());
        let mut acc: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| self.keep(r)) {
            acc.entry(r[g].clone()).or_default().push(r[m].parse().unwrap());
        }
        acc.into_iter().map(|(k, xs)| (k, ShadowGroup { value: Self::reduce(&xs, reducer), count: xs.len() })).collect()
    }

    pub fn scalar(&self, measure: &str, reducer: Reducer) -> ShadowGroup {
        let m = self.col(measure).unwrap();
        let xs: Vec<f64> = self.rows.iter().filter(|r| self.keep(r)).map(|r| r[m].parse().unwrap()).collect();
        ShadowGroup { value: Self::reduce(&xs, reducer), count: xs.len() }
    }

    pub fn matching_rows(&self) -> usize {
        self.rows.iter().filter(|r| self.keep(r)).count()
    }
}

/// Relative closeness used for cross-order float sums.
pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

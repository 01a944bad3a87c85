//! Row-at-a-time reference evaluator.
//!
//! Keeps its own copy of the interaction state and answers reads by
//! scanning every row cell by cell. It shares no query code with
//! [`Dashboard`](super::Dashboard), so the evaluation rubric can use it to
//! recompute the numbers an agent reported.

use std::collections::BTreeMap;

use super::table::{bucket_label, parse_time, Cell, Table};
use super::{DashboardModel, ViewKind};
use crate::model::{Bound, Operation, Reducer};

#[derive(Debug, Clone, PartialEq)]
enum Pred {
    Range(f64, f64),
    OneOf(Vec<String>),
}

/// One recomputed number: the group key (empty for ungrouped reads) and value.
#[derive(Debug, Clone, PartialEq)]
pub struct RefValue {
    pub key: String,
    pub value: f64,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct ReferenceDashboard<'a> {
    model: &'a DashboardModel,
    filters: BTreeMap<String, Pred>,
    selections: BTreeMap<String, String>,
}

impl<'a> ReferenceDashboard<'a> {
    pub fn new(model: &'a DashboardModel) -> Self {
        ReferenceDashboard { model, filters: BTreeMap::new(), selections: BTreeMap::new() }
    }

    /// Applies an operation. Reads return the recomputed values; state
    /// changes return an empty list. Invalid operations return `Err` and
    /// leave the state untouched.
    pub fn apply(&mut self, op: &Operation) -> Result<Vec<RefValue>, String> {
        let view = self.model.view(op.view()).ok_or_else(|| format!("no view {}", op.view()))?;
        match op {
            Operation::Select { params, .. } => {
                if !view.allows(crate::model::Tool::Select) {
                    return Err("select not allowed".into());
                }
                match &params.element {
                    None => {
                        self.selections.remove(&view.view_id);
                    }
                    Some(el) => {
                        let key = view.encoding.key.as_deref().ok_or("no key")?;
                        let table = &self.model.tables[&view.table];
                        let exists = (0..table.rows).any(|r| cell_key(table, key, r).as_deref() == Some(el.as_str()));
                        if !exists {
                            return Err(format!("no element {el}"));
                        }
                        self.selections.insert(view.view_id.clone(), el.clone());
                    }
                }
                Ok(Vec::new())
            }
            Operation::Filter { params, .. } => {
                if !view.allows(crate::model::Tool::Filter) {
                    return Err("filter not allowed".into());
                }
                let sample = self
                    .model
                    .tables
                    .values()
                    .find_map(|t| t.column(&params.field).map(|c| c.cell(0)))
                    .ok_or_else(|| format!("no field {}", params.field))?;
                let pred = match (&params.range, &params.values) {
                    (None, None) => {
                        self.filters.remove(&params.field);
                        return Ok(Vec::new());
                    }
                    (Some([lo, hi]), None) => {
                        let lo = bound(lo, &sample)?;
                        let hi = bound(hi, &sample)?;
                        if lo > hi || matches!(sample, Cell::Text(_)) {
                            return Err("bad range".into());
                        }
                        Pred::Range(lo, hi)
                    }
                    (None, Some(vs)) if matches!(sample, Cell::Text(_)) && !vs.is_empty() => Pred::OneOf(vs.clone()),
                    _ => return Err("bad filter".into()),
                };
                self.filters.insert(params.field.clone(), pred);
                Ok(Vec::new())
            }
            Operation::ReadData { params, .. } => {
                let table = &self.model.tables[&view.table];
                let explicit = params.reducer.is_some() || params.measure.is_some() || params.group_by.is_some();
                let (measure, group_by, reducer, bucket) = if explicit || view.kind == ViewKind::FilterPanel {
                    (params.measure.clone(), params.group_by.clone(), params.reducer, params.bucket)
                } else {
                    let e = &view.encoding;
                    (e.measure.clone(), e.key.clone(), e.reducer, params.bucket.or(e.bucket))
                };
                let Some(reducer) = reducer else {
                    let n = (0..table.rows).filter(|&r| self.keep(table, r)).count();
                    return Ok(vec![RefValue { key: String::new(), value: n as f64, count: n }]);
                };
                let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
                for r in 0..table.rows {
                    if !self.keep(table, r) {
                        continue;
                    }
                    let key = match &group_by {
                        None => String::new(),
                        Some(g) => {
                            let col = table.column(g).ok_or("no group field")?;
                            match (col.cell(r), bucket) {
                                (Cell::Time(t), Some(b)) => bucket_label(t, b),
                                _ => col.key(r),
                            }
                        }
                    };
                    let x = match &measure {
                        None => 0.0,
                        Some(m) => match table.column(m).ok_or("no measure")?.cell(r) {
                            Cell::Num(x) => x,
                            Cell::Time(t) => t as f64,
                            Cell::Text(_) => 0.0,
                        },
                    };
                    groups.entry(key).or_default().push(x);
                }
                if group_by.is_none() && groups.is_empty() {
                    groups.insert(String::new(), Vec::new());
                }
                Ok(groups
                    .into_iter()
                    .filter_map(|(key, xs)| {
                        let count = xs.len();
                        let value = match reducer {
                            Reducer::Count => count as f64,
                            Reducer::Sum => xs.iter().fold(0.0, |a, b| a + b),
                            Reducer::Mean if count > 0 => xs.iter().fold(0.0, |a, b| a + b) / count as f64,
                            Reducer::Min => xs.iter().copied().reduce(f64::min)?,
                            Reducer::Max => xs.iter().copied().reduce(f64::max)?,
                            Reducer::Mean => return None,
                        };
                        Some(RefValue { key, value, count })
                    })
                    .collect())
            }
        }
    }

    fn keep(&self, table: &Table, row: usize) -> bool {
        for (field, pred) in &self.filters {
            let Some(col) = table.column(field) else { continue };
            let ok = match (pred, col.cell(row)) {
                (Pred::Range(lo, hi), Cell::Num(x)) => *lo <= x && x <= *hi,
                (Pred::Range(lo, hi), Cell::Time(t)) => *lo <= t as f64 && t as f64 <= *hi,
                (Pred::OneOf(vs), Cell::Text(s)) => vs.contains(&s),
                _ => true,
            };
            if !ok {
                return false;
            }
        }
        for (view_id, el) in &self.selections {
            let Some(key) = self.model.view(view_id).and_then(|v| v.encoding.key.as_deref()) else { continue };
            if let Some(k) = cell_key(table, key, row) {
                if &k != el {
                    return false;
                }
            }
        }
        true
    }
}

fn cell_key(table: &Table, field: &str, row: usize) -> Option<String> {
    table.column(field).map(|c| c.key(row))
}

fn bound(b: &Bound, sample: &Cell) -> Result<f64, String> {
    match (b, sample) {
        (Bound::Num(x), _) => Ok(*x),
        (Bound::Text(s), Cell::Time(_)) => parse_time(s).map(|(t, _)| t as f64).ok_or_else(|| "bad time".to_string()),
        (Bound::Text(s), _) => s.parse().map_err(|_| "bad number".to_string()),
    }
}

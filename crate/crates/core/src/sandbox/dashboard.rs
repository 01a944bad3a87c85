use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::table::{
    bucket_label, format_num, format_time, json_num, parse_time, Cell, Column, ColumnData, ColumnType, Table,
};
use super::{DashboardModel, SandboxError, ViewKind, ViewSpec};
use crate::model::{
    Bound, EvidenceRef, Feedback, FilterParams, Operation, Outcome, ReadParams, Reducer, TimeBucket, Tool,
};

/// Anything the ReAct executor can drive with `readData`, `select` and `filter`.
pub trait ToolTarget {
    /// Executes one operation. Failures are reported in-band as an error
    /// feedback; the returned feedback carries step index 0.
    fn apply_tool(&mut self, op: &Operation) -> Feedback;
    fn view_ids(&self) -> Vec<String>;
    /// Prompt-ready description of views, tools and fields.
    fn describe(&self) -> String;
    /// Evidence references for `views` under the current state.
    fn evidence(&self, views: &[String]) -> Vec<EvidenceRef>;
    fn dataset_version(&self) -> u64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum FilterPredicate {
    /// Inclusive numeric range; timestamps are compared in epoch milliseconds.
    Range([f64; 2]),
    Values(BTreeSet<String>),
}

impl FilterPredicate {
    fn to_json(&self, kind: Option<ColumnType>) -> Value {
        match self {
            FilterPredicate::Range([lo, hi]) if kind == Some(ColumnType::Timestamp) => {
                json!({"range": [format_time(*lo as i64, false), format_time(*hi as i64, false)]})
            }
            other => serde_json::to_value(other).unwrap_or(Value::Null),
        }
    }
}

/// Filters and selections. Selections map a view id to one element key.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DashboardState {
    pub active_filters: BTreeMap<String, FilterPredicate>,
    pub selections: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    owner: String,
    state: DashboardState,
}

impl Snapshot {
    pub fn state(&self) -> &DashboardState {
        &self.state
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AggValue {
    Num(f64),
    Time(i64),
    Empty,
}

impl AggValue {
    pub fn to_json(&self) -> Value {
        match self {
            AggValue::Num(x) => json_num(*x),
            AggValue::Time(t) => Value::String(format_time(*t, false)),
            AggValue::Empty => Value::Null,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            AggValue::Num(x) => Some(*x),
            AggValue::Time(t) => Some(*t as f64),
            AggValue::Empty => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupValue {
    pub key: String,
    pub value: AggValue,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryResult {
    Rows {
        columns: Vec<String>,
        rows: Vec<Vec<Cell>>,
        /// Indices of every matching row, before any limit.
        row_ids: Vec<usize>,
    },
    Groups {
        measure: Option<String>,
        group_by: String,
        reducer: Reducer,
        groups: Vec<GroupValue>,
    },
    Scalar {
        measure: Option<String>,
        reducer: Reducer,
        value: AggValue,
        count: usize,
    },
    Domains {
        fields: BTreeMap<String, Value>,
    },
}

/// A dashboard instance: shared model plus this session's interaction state.
#[derive(Debug, Clone)]
pub struct Dashboard {
    model: Arc<DashboardModel>,
    state: DashboardState,
    version: u64,
    owner: String,
}

impl Dashboard {
    pub fn new(model: Arc<DashboardModel>, owner: impl Into<String>) -> Self {
        Dashboard { model, state: DashboardState::default(), version: 0, owner: owner.into() }
    }

    pub fn model(&self) -> &DashboardModel {
        &self.model
    }

    pub fn shared_model(&self) -> Arc<DashboardModel> {
        Arc::clone(&self.model)
    }

    pub fn state(&self) -> &DashboardState {
        &self.state
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn owner(&self) -> &str {
        &self.owner
    }

    fn view(&self, id: &str) -> Result<&ViewSpec, SandboxError> {
        self.model.view(id).ok_or_else(|| SandboxError::UnknownView(id.to_string()))
    }

    /// Rows of `table` that pass every filter and selection applicable to it.
    pub fn row_mask(&self, table: &Table) -> Vec<bool> {
        let mut mask = vec![true; table.rows];
        for (field, pred) in &self.state.active_filters {
            if let Some(col) = table.column(field) {
                apply_predicate(&mut mask, col, pred);
            }
        }
        for (view_id, element) in &self.state.selections {
            let Some(key_field) = self.model.view(view_id).and_then(|v| v.encoding.key.as_deref()) else {
                continue;
            };
            if let Some(col) = table.column(key_field) {
                for (i, m) in mask.iter_mut().enumerate() {
                    if *m && col.key(i) != *element {
                        *m = false;
                    }
                }
            }
        }
        mask
    }

    /// Runs a read under the current state without changing it.
    pub fn query(&self, view_id: &str, params: &ReadParams) -> Result<QueryResult, SandboxError> {
        let view = self.view(view_id)?;
        if !view.allows(Tool::ReadData) {
            return Err(SandboxError::Invalid(format!("view {view_id} does not support readData")));
        }
        let table = self.model.table_of(view);
        let params = effective_params(view, params);
        let mask = self.row_mask(table);

        if params.reducer.is_none() {
            if params.group_by.is_some() || params.measure.is_some() {
                return Err(SandboxError::Invalid("measure/groupBy given without a reducer".into()));
            }
            if view.kind == ViewKind::FilterPanel {
                return Ok(self.domains(view, table));
            }
            return Ok(rows_result(table, &mask, params.limit));
        }
        let reducer = params.reducer.unwrap_or(Reducer::Count);
        let measure = match (&params.measure, reducer) {
            (Some(m), _) => Some(table.column(m).ok_or_else(|| SandboxError::UnknownField(m.clone()))?),
            (None, Reducer::Count) => None,
            (None, r) => return Err(SandboxError::Invalid(format!("reducer {} needs a measure", r.as_str()))),
        };
        if let Some(col) = measure {
            check_reducer(col, reducer)?;
        }
        match &params.group_by {
            None => {
                let mut acc = Acc::default();
                for i in (0..table.rows).filter(|&i| mask[i]) {
                    acc.push(measure, i);
                }
                Ok(QueryResult::Scalar {
                    measure: params.measure.clone(),
                    reducer,
                    value: acc.finish(reducer, measure),
                    count: acc.count,
                })
            }
            Some(g) => {
                let gcol = table.column(g).ok_or_else(|| SandboxError::UnknownField(g.clone()))?;
                let bucket = params.bucket.or(if gcol.date_only { Some(TimeBucket::Day) } else { None });
                let mut groups: BTreeMap<String, Acc> = BTreeMap::new();
                for i in (0..table.rows).filter(|&i| mask[i]) {
                    let key = match (&gcol.data, bucket) {
                        (ColumnData::Timestamp(ts), Some(b)) => bucket_label(ts[i], b),
                        _ => gcol.key(i),
                    };
                    groups.entry(key).or_default().push(measure, i);
                }
                Ok(QueryResult::Groups {
                    measure: params.measure.clone(),
                    group_by: g.clone(),
                    reducer,
                    groups: groups
                        .into_iter()
                        .map(|(key, acc)| GroupValue { value: acc.finish(reducer, measure), count: acc.count, key })
                        .collect(),
                })
            }
        }
    }

    fn domains(&self, view: &ViewSpec, table: &Table) -> QueryResult {
        let mut fields = BTreeMap::new();
        for f in &view.encoding.fields {
            let Some(col) = table.column(f) else { continue };
            let v = match &col.data {
                ColumnData::Numeric(xs) => {
                    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    json!({"min": json_num(lo), "max": json_num(hi)})
                }
                ColumnData::Timestamp(ts) => {
                    let lo = ts.iter().copied().min().unwrap_or(0);
                    let hi = ts.iter().copied().max().unwrap_or(0);
                    json!({"min": format_time(lo, col.date_only), "max": format_time(hi, col.date_only)})
                }
                ColumnData::Categorical(vs) => {
                    let set: BTreeSet<&String> = vs.iter().collect();
                    json!({"values": set})
                }
            };
            let active = self.state.active_filters.get(f).map(|p| p.to_json(Some(col.kind())));
            let mut obj = v;
            if let (Value::Object(m), Some(a)) = (&mut obj, active) {
                m.insert("active".into(), a);
            }
            fields.insert(f.clone(), obj);
        }
        QueryResult::Domains { fields }
    }

    /// JSON payload for a query, including the state it was computed under.
    pub fn payload(&self, view_id: &str, result: &QueryResult) -> Value {
        let table = self.model.view(view_id).map(|v| v.table.clone()).unwrap_or_default();
        let mut obj = Map::new();
        obj.insert("view".into(), Value::String(view_id.to_string()));
        obj.insert("table".into(), Value::String(table.clone()));
        obj.insert("appliedState".into(), self.state_json());
        match result {
            QueryResult::Rows { columns, rows, row_ids } => {
                let date_only: Vec<bool> = self
                    .model
                    .tables
                    .get(&table)
                    .map(|t| columns.iter().map(|c| t.column(c).map(|c| c.date_only).unwrap_or(false)).collect())
                    .unwrap_or_default();
                obj.insert("columns".into(), json!(columns));
                obj.insert(
                    "rows".into(),
                    Value::Array(
                        rows.iter()
                            .map(|r| {
                                Value::Array(
                                    r.iter()
                                        .enumerate()
                                        .map(|(j, c)| c.to_json(date_only.get(j).copied().unwrap_or(false)))
                                        .collect(),
                                )
                            })
                            .collect(),
                    ),
                );
                obj.insert("total".into(), json!(row_ids.len()));
            }
            QueryResult::Groups { measure, group_by, reducer, groups } => {
                obj.insert("measure".into(), json!(measure));
                obj.insert("groupBy".into(), json!(group_by));
                obj.insert("reducer".into(), json!(reducer));
                obj.insert(
                    "groups".into(),
                    Value::Array(
                        groups
                            .iter()
                            .map(|g| json!({"key": g.key, "value": g.value.to_json(), "count": g.count}))
                            .collect(),
                    ),
                );
            }
            QueryResult::Scalar { measure, reducer, value, count } => {
                obj.insert("measure".into(), json!(measure));
                obj.insert("reducer".into(), json!(reducer));
                obj.insert("value".into(), value.to_json());
                obj.insert("count".into(), json!(count));
            }
            QueryResult::Domains { fields } => {
                obj.insert("fields".into(), json!(fields));
            }
        }
        Value::Object(obj)
    }

    pub fn state_json(&self) -> Value {
        let filters: Map<String, Value> =
            self.state.active_filters.iter().map(|(f, p)| (f.clone(), p.to_json(self.model.field_type(f)))).collect();
        json!({"filters": filters, "selections": self.state.selections, "datasetVersion": self.version})
    }

    /// Sets (or with `None`, clears) the selection of a view.
    pub fn select(&mut self, view_id: &str, element: Option<&str>) -> Result<String, SandboxError> {
        let view = self.view(view_id)?;
        if !view.allows(Tool::Select) {
            return Err(SandboxError::Invalid(format!("view {view_id} does not support select")));
        }
        let key_field = view.encoding.key.clone().unwrap_or_default();
        let table = self.model.table_of(view);
        match element {
            Some(el) => {
                let col = table.column(&key_field).ok_or_else(|| SandboxError::UnknownField(key_field.clone()))?;
                if !(0..table.rows).any(|i| col.key(i) == el) {
                    return Err(SandboxError::UnknownElement(el.to_string()));
                }
                self.state.selections.insert(view_id.to_string(), el.to_string());
                self.version += 1;
                Ok(format!(
                    "selected {el} on {view_id}; {key_field} = {el} now scopes all views (datasetVersion {})",
                    self.version
                ))
            }
            None => {
                self.state.selections.remove(view_id);
                self.version += 1;
                Ok(format!("cleared selection on {view_id} (datasetVersion {})", self.version))
            }
        }
    }

    /// Sets, replaces or (with neither range nor values) clears a field filter.
    pub fn filter(&mut self, view_id: &str, params: &FilterParams) -> Result<String, SandboxError> {
        let view = self.view(view_id)?;
        if !view.allows(Tool::Filter) {
            return Err(SandboxError::Invalid(format!("view {view_id} does not support filter")));
        }
        let field = params.field.as_str();
        let kind = self.model.field_type(field).ok_or_else(|| SandboxError::UnknownField(field.to_string()))?;
        let pred = match (&params.range, &params.values) {
            (Some(_), Some(_)) => {
                return Err(SandboxError::Invalid("filter takes either range or values, not both".into()))
            }
            (None, None) => None,
            (Some([lo, hi]), None) => {
                if kind == ColumnType::Categorical {
                    return Err(SandboxError::Invalid(format!("range filter on categorical field {field}")));
                }
                let lo_v = bound_value(lo, kind)?;
                let hi_v = bound_value(hi, kind)?;
                if lo_v > hi_v {
                    return Err(SandboxError::EmptyRange { lo: bound_text(lo), hi: bound_text(hi) });
                }
                Some(FilterPredicate::Range([lo_v, hi_v]))
            }
            (None, Some(values)) => {
                if kind != ColumnType::Categorical {
                    return Err(SandboxError::Invalid(format!("value filter on non-categorical field {field}")));
                }
                if values.is_empty() {
                    return Err(SandboxError::Invalid("empty value set".into()));
                }
                Some(FilterPredicate::Values(values.iter().cloned().collect()))
            }
        };
        let delta = match pred {
            Some(p) => {
                let text = p.to_json(Some(kind)).to_string();
                self.state.active_filters.insert(field.to_string(), p);
                self.version += 1;
                format!("filter {field} set to {text}; all views updated (datasetVersion {})", self.version)
            }
            None => {
                self.state.active_filters.remove(field);
                self.version += 1;
                format!("filter on {field} cleared (datasetVersion {})", self.version)
            }
        };
        Ok(delta)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot { owner: self.owner.clone(), state: self.state.clone() }
    }

    /// Restores a snapshot taken from this dashboard; bumps the version.
    pub fn restore(&mut self, snap: &Snapshot) -> Result<(), SandboxError> {
        if snap.owner != self.owner {
            return Err(SandboxError::ForeignSnapshot { expected: self.owner.clone(), found: snap.owner.clone() });
        }
        self.state = snap.state.clone();
        self.version += 1;
        Ok(())
    }

    fn try_apply(&mut self, op: &Operation) -> Result<(String, Value), SandboxError> {
        match op {
            Operation::ReadData { view, params } => {
                let result = self.query(view, params)?;
                let summary = match &result {
                    QueryResult::Rows { row_ids, rows, .. } => {
                        format!("read {} of {} rows from {view}", rows.len(), row_ids.len())
                    }
                    QueryResult::Groups { groups, .. } => format!("read {} groups from {view}", groups.len()),
                    QueryResult::Scalar { .. } => format!("read aggregate from {view}"),
                    QueryResult::Domains { .. } => format!("read filter domains from {view}"),
                };
                Ok((format!("{summary}; no state change"), self.payload(view, &result)))
            }
            Operation::Select { view, params } => Ok((self.select(view, params.element.as_deref())?, Value::Null)),
            Operation::Filter { view, params } => Ok((self.filter(view, params)?, Value::Null)),
        }
    }
}

impl ToolTarget for Dashboard {
    fn apply_tool(&mut self, op: &Operation) -> Feedback {
        match self.try_apply(op) {
            Ok((state_delta, payload)) => {
                Feedback { step_index: 0, outcome: Outcome::Ok, state_delta, payload, error_detail: None }
            }
            Err(e) => Feedback::error(0, e.to_string()),
        }
    }

    fn view_ids(&self) -> Vec<String> {
        self.model.view_ids()
    }

    fn describe(&self) -> String {
        let mut s = self.model.describe();
        s.push_str(&format!("current state: {}\n", self.state_json()));
        s
    }

    fn evidence(&self, views: &[String]) -> Vec<EvidenceRef> {
        let filters: BTreeMap<String, Value> =
            self.state.active_filters.iter().map(|(f, p)| (f.clone(), p.to_json(self.model.field_type(f)))).collect();
        views
            .iter()
            .filter(|v| self.model.view(v).is_some())
            .map(|v| EvidenceRef {
                view: v.clone(),
                elements: self.state.selections.get(v).cloned().into_iter().collect(),
                filters: filters.clone(),
            })
            .collect()
    }

    fn dataset_version(&self) -> u64 {
        self.version
    }
}

fn effective_params(view: &ViewSpec, params: &ReadParams) -> ReadParams {
    let explicit = params.reducer.is_some() || params.measure.is_some() || params.group_by.is_some();
    if explicit || view.kind == ViewKind::FilterPanel {
        return params.clone();
    }
    let e = &view.encoding;
    match e.reducer {
        Some(r) => ReadParams {
            measure: e.measure.clone(),
            group_by: e.key.clone(),
            reducer: Some(r),
            bucket: params.bucket.or(e.bucket),
            limit: params.limit,
        },
        None => params.clone(),
    }
}

fn check_reducer(col: &Column, reducer: Reducer) -> Result<(), SandboxError> {
    let ok = match col.kind() {
        ColumnType::Numeric => true,
        ColumnType::Timestamp => matches!(reducer, Reducer::Min | Reducer::Max | Reducer::Count),
        ColumnType::Categorical => reducer == Reducer::Count,
    };
    if ok {
        Ok(())
    } else {
        Err(SandboxError::Invalid(format!(
            "reducer {} not applicable to {:?} field {}",
            reducer.as_str(),
            col.kind(),
            col.name
        )))
    }
}

#[derive(Debug, Default)]
struct Acc {
    sum: f64,
    min: Option<f64>,
    max: Option<f64>,
    count: usize,
}

impl Acc {
    fn push(&mut self, measure: Option<&Column>, row: usize) {
        self.count += 1;
        let x = match measure.map(|c| &c.data) {
            Some(ColumnData::Numeric(v)) => v[row],
            Some(ColumnData::Timestamp(v)) => v[row] as f64,
            _ => return,
        };
        self.sum += x;
        self.min = Some(self.min.map_or(x, |m| m.min(x)));
        self.max = Some(self.max.map_or(x, |m| m.max(x)));
    }

    fn finish(&self, reducer: Reducer, measure: Option<&Column>) -> AggValue {
        let is_time = matches!(measure.map(Column::kind), Some(ColumnType::Timestamp));
        let wrap = |x: f64| if is_time { AggValue::Time(x as i64) } else { AggValue::Num(x) };
        match reducer {
            Reducer::Count => AggValue::Num(self.count as f64),
            Reducer::Sum => AggValue::Num(self.sum),
            Reducer::Mean if self.count == 0 => AggValue::Empty,
            Reducer::Mean => AggValue::Num(self.sum / self.count as f64),
            Reducer::Min => self.min.map_or(AggValue::Empty, wrap),
            Reducer::Max => self.max.map_or(AggValue::Empty, wrap),
        }
    }
}

fn rows_result(table: &Table, mask: &[bool], limit: Option<usize>) -> QueryResult {
    let row_ids: Vec<usize> = (0..table.rows).filter(|&i| mask[i]).collect();
    let shown = limit.unwrap_or(usize::MAX).min(row_ids.len());
    let rows = row_ids[..shown].iter().map(|&i| table.columns.iter().map(|c| c.cell(i)).collect()).collect();
    QueryResult::Rows { columns: table.column_names().into_iter().map(str::to_string).collect(), rows, row_ids }
}

fn apply_predicate(mask: &mut [bool], col: &Column, pred: &FilterPredicate) {
    match (pred, &col.data) {
        (FilterPredicate::Range([lo, hi]), ColumnData::Numeric(xs)) => {
            for (m, x) in mask.iter_mut().zip(xs) {
                *m &= *x >= *lo && *x <= *hi;
            }
        }
        (FilterPredicate::Range([lo, hi]), ColumnData::Timestamp(ts)) => {
            for (m, t) in mask.iter_mut().zip(ts) {
                let x = *t as f64;
                *m &= x >= *lo && x <= *hi;
            }
        }
        (FilterPredicate::Values(set), ColumnData::Categorical(vs)) => {
            for (m, v) in mask.iter_mut().zip(vs) {
                *m &= set.contains(v);
            }
        }
        // Type mismatches are rejected when the filter is set.
        _ => {}
    }
}

fn bound_value(b: &Bound, kind: ColumnType) -> Result<f64, SandboxError> {
    match (b, kind) {
        (Bound::Num(x), _) => Ok(*x),
        (Bound::Text(s), ColumnType::Timestamp) => parse_time(s)
            .map(|(t, _)| t as f64)
            .ok_or_else(|| SandboxError::Invalid(format!("bad timestamp bound {s:?}"))),
        (Bound::Text(s), _) => s.parse::<f64>().map_err(|_| SandboxError::Invalid(format!("bad numeric bound {s:?}"))),
    }
}

fn bound_text(b: &Bound) -> String {
    match b {
        Bound::Num(x) => format_num(*x),
        Bound::Text(s) => s.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sandbox::Layout;

    fn model() -> Arc<DashboardModel> {
        let csv = "state,category,sales,profit,orderDate\n\
                   CA,Furniture,100,-20,2021-01-05\n\
                   CA,Technology,50,10,2021-02-05\n\
                   TX,Furniture,30,5,2021-01-20\n\
                   NY,Office Supplies,80,-5,2021-03-01\n";
        let layout: Layout = serde_json::from_value(json!({
            "name": "mini", "table": "orders",
            "views": [
                {"viewId": "map", "kind": "chart", "table": "orders", "encoding": {"key": "state", "measure": "profit", "reducer": "sum"}, "interactions": ["readData", "select"]},
                {"viewId": "trend", "kind": "chart", "table": "orders", "encoding": {"key": "orderDate", "measure": "sales", "reducer": "sum", "bucket": "month"}, "interactions": ["readData", "filter"]},
                {"viewId": "filters", "kind": "filter_panel", "table": "orders", "encoding": {"fields": ["profit", "category"]}, "interactions": ["readData", "filter"]}
            ]
        }))
        .unwrap();
        let table = Table::from_csv("orders", csv.as_bytes(), &BTreeMap::new()).unwrap();
        Arc::new(DashboardModel::from_parts(layout, table).unwrap())
    }

    #[test]
    fn default_encoding_read() {
        let d = Dashboard::new(model(), "s1");
        let r = d.query("map", &ReadParams::default()).unwrap();
        let QueryResult::Groups { groups, .. } = r else { panic!() };
        let keys: Vec<_> = groups.iter().map(|g| (g.key.as_str(), g.value.clone())).collect();
        assert_eq!(keys, vec![("CA", AggValue::Num(-10.0)), ("NY", AggValue::Num(-5.0)), ("TX", AggValue::Num(5.0))]);
    }

    #[test]
    fn month_buckets() {
        let d = Dashboard::new(model(), "s1");
        let QueryResult::Groups { groups, .. } = d.query("trend", &ReadParams::default()).unwrap() else { panic!() };
        let keys: Vec<_> = groups.iter().map(|g| g.key.as_str()).collect();
        assert_eq!(keys, vec!["2021-01", "2021-02", "2021-03"]);
        assert_eq!(groups[0].value, AggValue::Num(130.0));
    }

    #[test]
    fn select_scopes_reads() {
        let mut d = Dashboard::new(model(), "s1");
        let fb = d.apply_tool(&Operation::select("map", "CA"));
        assert!(fb.is_ok(), "{fb:?}");
        assert_eq!(d.version(), 1);
        let QueryResult::Scalar { value, count, .. } = d
            .query(
                "map",
                &ReadParams { measure: Some("profit".into()), reducer: Some(Reducer::Mean), ..Default::default() },
            )
            .unwrap()
        else {
            panic!()
        };
        assert_eq!(count, 2);
        assert_eq!(value, AggValue::Num(-5.0));
    }

    #[test]
    fn unknown_element_and_view() {
        let mut d = Dashboard::new(model(), "s1");
        let fb = d.apply_tool(&Operation::select("map", "ZZ"));
        assert_eq!(fb.outcome, Outcome::Error);
        assert!(fb.error_detail.unwrap().starts_with("element not found"));
        let fb = d.apply_tool(&Operation::read_rows("nope"));
        assert!(fb.error_detail.unwrap().starts_with("view not found"));
        assert_eq!(d.version(), 0);
    }

    #[test]
    fn empty_range_rejected() {
        let mut d = Dashboard::new(model(), "s1");
        let fb = d.apply_tool(&Operation::filter_range("filters", "profit", 1.0, -1.0));
        assert!(fb.error_detail.unwrap().starts_with("empty range"));
        assert!(d.state().active_filters.is_empty());
    }

    #[test]
    fn negative_profit_filter() {
        let mut d = Dashboard::new(model(), "s1");
        assert!(d.apply_tool(&Operation::filter_range("filters", "profit", -100.0, 0.0)).is_ok());
        let QueryResult::Groups { groups, .. } = d
            .query(
                "map",
                &ReadParams {
                    measure: Some("sales".into()),
                    group_by: Some("category".into()),
                    reducer: Some(Reducer::Sum),
                    ..Default::default()
                },
            )
            .unwrap()
        else {
            panic!()
        };
        let got: Vec<_> = groups.iter().map(|g| (g.key.as_str(), g.value.clone())).collect();
        assert_eq!(got, vec![("Furniture", AggValue::Num(100.0)), ("Office Supplies", AggValue::Num(80.0))]);
    }

    #[test]
    fn time_range_filter_with_text_bounds() {
        let mut d = Dashboard::new(model(), "s1");
        let op = Operation::Filter {
            view: "trend".into(),
            params: FilterParams {
                field: "orderDate".into(),
                range: Some([Bound::Text("2021-01-01".into()), Bound::Text("2021-01-31".into())]),
                values: None,
            },
        };
        assert!(d.apply_tool(&op).is_ok());
        let r = d.query("map", &ReadParams { reducer: Some(Reducer::Count), ..Default::default() }).unwrap();
        assert!(matches!(r, QueryResult::Scalar { count: 2, .. }), "{r:?}");
    }

    #[test]
    fn snapshot_restore() {
        let mut d = Dashboard::new(model(), "s1");
        let snap = d.snapshot();
        d.apply_tool(&Operation::select("map", "TX"));
        d.apply_tool(&Operation::filter_values("filters", "category", &["Furniture"]));
        d.restore(&snap).unwrap();
        assert_eq!(d.state(), snap.state());
        assert_eq!(d.version(), 3);
        let other = Dashboard::new(model(), "s2");
        assert!(matches!(d.restore(&other.snapshot()), Err(SandboxError::ForeignSnapshot { .. })));
    }

    #[test]
    fn filter_panel_domains() {
        let d = Dashboard::new(model(), "s1");
        let QueryResult::Domains { fields } = d.query("filters", &ReadParams::default()).unwrap() else { panic!() };
        assert_eq!(fields["profit"], json!({"min": -20, "max": 10}));
    }
}

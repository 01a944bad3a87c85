//! Column-typed in-memory tables loaded from delimited text.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::SandboxError;
use crate::model::{Millis, TimeBucket};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnType {
    Numeric,
    Categorical,
    Timestamp,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
    Timestamp(Vec<Millis>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
    /// Timestamp columns whose source values carried no time of day.
    pub date_only: bool,
}

impl Column {
    pub fn kind(&self) -> ColumnType {
        match self.data {
            ColumnData::Numeric(_) => ColumnType::Numeric,
            ColumnData::Categorical(_) => ColumnType::Categorical,
            ColumnData::Timestamp(_) => ColumnType::Timestamp,
        }
    }

    pub fn len(&self) -> usize {
        match &self.data {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
            ColumnData::Timestamp(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell(&self, row: usize) -> Cell {
        match &self.data {
            ColumnData::Numeric(v) => Cell::Num(v[row]),
            ColumnData::Categorical(v) => Cell::Text(v[row].clone()),
            ColumnData::Timestamp(v) => Cell::Time(v[row]),
        }
    }

    /// String form used as an element key and group key.
    pub fn key(&self, row: usize) -> String {
        match &self.data {
            ColumnData::Numeric(v) => format_num(v[row]),
            ColumnData::Categorical(v) => v[row].clone(),
            ColumnData::Timestamp(v) => format_time(v[row], self.date_only),
        }
    }
}

/// A single value read from a table.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Time(Millis),
}

impl Cell {
    pub fn to_json(&self, date_only: bool) -> Value {
        match self {
            Cell::Num(x) => json_num(*x),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Time(t) => Value::String(format_time(*t, date_only)),
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(x) => write!(f, "{}", format_num(*x)),
            Cell::Text(s) => f.write_str(s),
            Cell::Time(t) => f.write_str(&format_time(*t, false)),
        }
    }
}

/// Integral values become JSON integers so `10` does not render as `10.0`.
pub fn json_num(x: f64) -> Value {
    if x.fract() == 0.0 && x.abs() < 9.0e15 {
        return Value::from(x as i64);
    }
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

pub fn format_num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: usize,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn has(&self, name: &str) -> bool {
        self.column(name).is_some()
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    /// Loads a table from comma-delimited text with a header row. Columns
    /// listed in `declared` are parsed as that type; the rest are inferred.
    pub fn from_csv<R: Read>(
        name: &str,
        reader: R,
        declared: &BTreeMap<String, ColumnType>,
    ) -> Result<Table, SandboxError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| SandboxError::Load(format!("{name}: {e}")))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(SandboxError::Load(format!("{name}: empty file (no header)")));
        }
        let mut raw: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| SandboxError::Load(format!("{name}: record {}: {e}", i + 1)))?;
            if rec.len() != headers.len() {
                return Err(SandboxError::Load(format!(
                    "{name}: record {} has {} fields, expected {}",
                    i + 1,
                    rec.len(),
                    headers.len()
                )));
            }
            for (col, v) in raw.iter_mut().zip(rec.iter()) {
                col.push(v.trim().to_string());
            }
        }
        let rows = raw.first().map(Vec::len).unwrap_or(0);
        if rows == 0 {
            return Err(SandboxError::Load(format!("{name}: no data rows")));
        }
        let mut columns = Vec::with_capacity(headers.len());
        for (header, values) in headers.into_iter().zip(raw) {
            let col = match declared.get(&header) {
                Some(kind) => parse_as(&header, &values, *kind)?,
                None => infer(&header, &values)?,
            };
            columns.push(col);
        }
        Ok(Table { name: name.to_string(), columns, rows })
    }
}

fn parse_as(name: &str, values: &[String], kind: ColumnType) -> Result<Column, SandboxError> {
    let bad = |v: &str| SandboxError::TypeConflict {
        column: name.to_string(),
        detail: format!("value {v:?} is not {kind:?}"),
    };
    let (data, date_only) = match kind {
        ColumnType::Numeric => {
            let nums = values.iter().map(|v| parse_num(v).ok_or_else(|| bad(v))).collect::<Result<_, _>>()?;
            (ColumnData::Numeric(nums), false)
        }
        ColumnType::Timestamp => {
            let mut all_dates = true;
            let mut out = Vec::with_capacity(values.len());
            for v in values {
                let (t, d) = parse_time(v).ok_or_else(|| bad(v))?;
                all_dates &= d;
                out.push(t);
            }
            (ColumnData::Timestamp(out), all_dates)
        }
        ColumnType::Categorical => (ColumnData::Categorical(values.to_vec()), false),
    };
    Ok(Column { name: name.to_string(), data, date_only })
}

fn infer(name: &str, values: &[String]) -> Result<Column, SandboxError> {
    let numeric = values.iter().filter(|v| parse_num(v).is_some()).count();
    if numeric == values.len() {
        return parse_as(name, values, ColumnType::Numeric);
    }
    if numeric > 0 {
        let first_text = values.iter().find(|v| parse_num(v).is_none()).cloned().unwrap_or_default();
        return Err(SandboxError::TypeConflict {
            column: name.to_string(),
            detail: format!("mixes numeric values with text such as {first_text:?}"),
        });
    }
    if values.iter().all(|v| parse_time(v).is_some()) {
        return parse_as(name, values, ColumnType::Timestamp);
    }
    parse_as(name, values, ColumnType::Categorical)
}

fn parse_num(s: &str) -> Option<f64> {
    let x: f64 = s.parse().ok()?;
    x.is_finite().then_some(x)
}

/// Parses the timestamp formats the sandbox accepts. Returns epoch
/// milliseconds (UTC) and whether the value was a bare date.
pub fn parse_time(s: &str) -> Option<(Millis, bool)> {
    let s = s.trim();
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        let dt = d.and_hms_opt(0, 0, 0)?;
        return Some((Utc.from_utc_datetime(&dt).timestamp_millis(), true));
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some((Utc.from_utc_datetime(&dt).timestamp_millis(), false));
        }
    }
    DateTime::parse_from_rfc3339(s).ok().map(|dt| (dt.timestamp_millis(), false))
}

pub fn format_time(t: Millis, date_only: bool) -> String {
    let Some(dt) = Utc.timestamp_millis_opt(t).single() else {
        return t.to_string();
    };
    if date_only {
        dt.format("%Y-%m-%d").to_string()
    } else {
        dt.format("%Y-%m-%d %H:%M:%S").to_string()
    }
}

/// Truncates a timestamp to the start of its bucket and renders the bucket label.
pub fn bucket_label(t: Millis, bucket: TimeBucket) -> String {
    let Some(dt) = Utc.timestamp_millis_opt(t).single() else {
        return t.to_string();
    };
    let fmt = match bucket {
        TimeBucket::Minute => "%Y-%m-%d %H:%M",
        TimeBucket::Hour => "%Y-%m-%d %H:00",
        TimeBucket::Day => "%Y-%m-%d",
        TimeBucket::Month => "%Y-%m",
        TimeBucket::Year => "%Y",
    };
    dt.format(fmt).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<Table, SandboxError> {
        Table::from_csv("t", text.as_bytes(), &BTreeMap::new())
    }

    #[test]
    fn infers_types() {
        let t = load(
            "state,sales,orderDate,at\nCA,10.5,2021-01-02,2014-01-23 18:42:10\nTX,3,2021-02-03,2014-01-23 19:00:00\n",
        )
        .unwrap();
        assert_eq!(t.rows, 2);
        let kinds: Vec<_> = t.columns.iter().map(Column::kind).collect();
        assert_eq!(
            kinds,
            vec![ColumnType::Categorical, ColumnType::Numeric, ColumnType::Timestamp, ColumnType::Timestamp]
        );
        assert!(t.column("orderDate").unwrap().date_only);
        assert_eq!(t.column("at").unwrap().key(0), "2014-01-23 18:42:10");
        assert_eq!(t.column("sales").unwrap().key(1), "3");
    }

    #[test]
    fn empty_file_fails() {
        assert!(matches!(load(""), Err(SandboxError::Load(_))));
        assert!(matches!(load("a,b\n"), Err(SandboxError::Load(_))));
    }

    #[test]
    fn mixed_column_is_named() {
        match load("state,sales\nCA,10\nTX,lots\n") {
            Err(SandboxError::TypeConflict { column, .. }) => assert_eq!(column, "sales"),
            other => panic!("expected conflict, got {other:?}"),
        }
    }

    #[test]
    fn declared_type_overrides_inference() {
        let mut declared = BTreeMap::new();
        declared.insert("code".to_string(), ColumnType::Categorical);
        let t = Table::from_csv("t", "code\n911\nhelp\n".as_bytes(), &declared).unwrap();
        assert_eq!(t.columns[0].kind(), ColumnType::Categorical);
    }

    #[test]
    fn buckets() {
        let (t, _) = parse_time("2014-01-23 18:42:10").unwrap();
        assert_eq!(bucket_label(t, TimeBucket::Minute), "2014-01-23 18:42");
        assert_eq!(bucket_label(t, TimeBucket::Hour), "2014-01-23 18:00");
        assert_eq!(bucket_label(t, TimeBucket::Month), "2014-01");
    }
}

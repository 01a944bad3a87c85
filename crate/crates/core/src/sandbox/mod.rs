//! In-memory reference dashboard.
//!
//! A [`DashboardModel`] is a set of typed tables plus the views declared in
//! a layout file. A [`Dashboard`] wraps a model with mutable interaction
//! state (filters and selections) and implements [`ToolTarget`], the
//! contract the ReAct executor drives.

mod dashboard;
pub mod reference;
mod table;

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dashboard::{
    AggValue, Dashboard, DashboardState, FilterPredicate, GroupValue, QueryResult, Snapshot, ToolTarget,
};
pub use reference::{RefValue, ReferenceDashboard};
pub use table::{
    bucket_label, format_num, format_time, json_num, parse_time, Cell, Column, ColumnData, ColumnType, Table,
};

use crate::model::{Reducer, TimeBucket, Tool};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SandboxError {
    #[error("load error: {0}")]
    Load(String),
    #[error("type conflict in column `{column}`: {detail}")]
    TypeConflict { column: String, detail: String },
    #[error("layout error: {0}")]
    Layout(String),
    #[error("view not found: {0}")]
    UnknownView(String),
    #[error("field not found: {0}")]
    UnknownField(String),
    #[error("element not found: {0}")]
    UnknownElement(String),
    #[error("empty range: {lo} > {hi}")]
    EmptyRange { lo: String, hi: String },
    #[error("invalid operation: {0}")]
    Invalid(String),
    #[error("snapshot belongs to session {found}, not {expected}")]
    ForeignSnapshot { expected: String, found: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewKind {
    Chart,
    FilterPanel,
    Kpi,
}

/// Field mapping of a view. Charts use `key` + `measure` + `reducer`;
/// filter panels list their `fields`; KPI views reduce `measure` to one number.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Encoding {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reducer: Option<Reducer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bucket: Option<TimeBucket>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ViewSpec {
    pub view_id: String,
    pub kind: ViewKind,
    pub table: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub description: String,
    pub encoding: Encoding,
    pub interactions: Vec<Tool>,
}

impl ViewSpec {
    pub fn allows(&self, tool: Tool) -> bool {
        self.interactions.contains(&tool)
    }

    /// Every data field this view's encoding refers to.
    pub fn referenced_fields(&self) -> Vec<&str> {
        let e = &self.encoding;
        e.key.iter().chain(e.measure.iter()).chain(e.fields.iter()).map(String::as_str).collect()
    }
}

/// Layout file: the table name, optional column type declarations and the views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Layout {
    pub name: String,
    pub table: String,
    #[serde(default)]
    pub column_types: BTreeMap<String, ColumnType>,
    pub views: Vec<ViewSpec>,
}

impl Layout {
    pub fn from_path(path: &Path) -> Result<Layout, SandboxError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| SandboxError::Layout(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| SandboxError::Layout(format!("{}: {e}", path.display())))
    }
}

/// Immutable dataset + views. Shared between sessions behind an `Arc`.
#[derive(Debug, Clone, PartialEq)]
pub struct DashboardModel {
    pub name: String,
    pub views: Vec<ViewSpec>,
    pub tables: BTreeMap<String, Arc<Table>>,
}

impl DashboardModel {
    /// Loads a delimited dataset file and its companion layout.
    pub fn load(dataset: &Path, layout: &Path) -> Result<DashboardModel, SandboxError> {
        let layout = Layout::from_path(layout)?;
        let file = File::open(dataset).map_err(|e| SandboxError::Load(format!("{}: {e}", dataset.display())))?;
        let table = Table::from_csv(&layout.table, file, &layout.column_types)?;
        DashboardModel::from_parts(layout, table)
    }

    pub fn from_parts(layout: Layout, table: Table) -> Result<DashboardModel, SandboxError> {
        if table.name != layout.table {
            return Err(SandboxError::Layout(format!("layout expects table {}, got {}", layout.table, table.name)));
        }
        let mut tables = BTreeMap::new();
        tables.insert(table.name.clone(), Arc::new(table));
        let model = DashboardModel { name: layout.name, views: layout.views, tables };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<(), SandboxError> {
        let mut seen = std::collections::HashSet::new();
        for view in &self.views {
            if !seen.insert(view.view_id.as_str()) {
                return Err(SandboxError::Layout(format!("duplicate view id {}", view.view_id)));
            }
            let table = self.tables.get(&view.table).ok_or_else(|| {
                SandboxError::Layout(format!("view {} references unknown table {}", view.view_id, view.table))
            })?;
            for f in view.referenced_fields() {
                if !table.has(f) {
                    return Err(SandboxError::Layout(format!("view {} references unknown field {f}", view.view_id)));
                }
            }
            if view.allows(Tool::Select) && view.encoding.key.is_none() {
                return Err(SandboxError::Layout(format!("view {} allows select but has no key field", view.view_id)));
            }
        }
        Ok(())
    }

    pub fn view(&self, id: &str) -> Option<&ViewSpec> {
        self.views.iter().find(|v| v.view_id == id)
    }

    pub fn view_ids(&self) -> Vec<String> {
        self.views.iter().map(|v| v.view_id.clone()).collect()
    }

    pub fn table_of(&self, view: &ViewSpec) -> &Table {
        // validated on construction
        &self.tables[&view.table]
    }

    /// Column type of a field in any table.
    pub fn field_type(&self, field: &str) -> Option<ColumnType> {
        self.tables.values().find_map(|t| t.column(field).map(Column::kind))
    }

    /// One line per view, for prompts.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        for v in &self.views {
            let tools: Vec<&str> = v.interactions.iter().map(|t| t.as_str()).collect();
            out.push_str(&format!(
                "- {} ({:?}, table {}): {} [tools: {}]\n",
                v.view_id,
                v.kind,
                v.table,
                if v.description.is_empty() { &v.title } else { &v.description },
                tools.join(", ")
            ));
        }
        for t in self.tables.values() {
            let cols: Vec<String> = t.columns.iter().map(|c| format!("{}:{:?}", c.name, c.kind())).collect();
            out.push_str(&format!("table {} ({} rows): {}\n", t.name, t.rows, cols.join(", ")));
        }
        out
    }
}

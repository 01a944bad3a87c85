//! Seeded generators for the bundled fixtures: two datasets with layouts
//! and knowledge profiles, the shared pattern catalog, scripted backend
//! files, replay transcripts, the evaluation task set and the note
//! verification set. Golden outputs are produced by running the pipeline
//! on the generated inputs.
//!
//! Everything is a pure function of the seeds below, so `gen-fixtures`
//! reproduces the committed files byte for byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::backend::{Role, ScriptEntry, ScriptFile, ScriptedBackend};
use crate::eval::{aggregate, run_batch, score_run, BatchConfig, Category, EvalTask, ScoreMode};
use crate::gateway::{replay, Catalog, EngineConfig, GatewayError};
use crate::model::{
    ActionType, AnalyticIntent, Author, Bound, FilterParams, InteractionEvent, Note, Operation, ReadParams, Reducer,
    TimeBucket, Tool,
};
use crate::protocol::{encode, Decision, Frame, Message};
use crate::sandbox::{Dashboard, DashboardModel, Encoding, Layout, QueryResult, Table, ToolTarget, ViewKind, ViewSpec};
use crate::store::{Knowledge, OperationTemplate, PatternRow, ProblemCategory, TaskSlot};
use crate::verifier::{display_num, Claim, ClaimKind, ClaimValue, Direction};

pub const SUPERSTORE_SEED: u64 = 7;
pub const MC3_SEED: u64 = 11;
pub const TASK_SEED: u64 = 23;
pub const SUPERSTORE_ROWS: usize = 1000;

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("io: {0}")]
    Io(String),
    #[error("pipeline: {0}")]
    Pipeline(String),
}

/// One generated file, relative to the fixture root.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureFile {
    pub path: String,
    pub contents: String,
}

/// `crates/core/fixtures` in the source tree.
pub fn default_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn r2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("fixture serializes");
    s.push('\n');
    s
}

fn csv_string(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

fn view(id: &str, kind: ViewKind, title: &str, description: &str, encoding: Encoding, tools: &[Tool]) -> ViewSpec {
    ViewSpec {
        view_id: id.into(),
        kind,
        table: String::new(),
        title: title.into(),
        description: description.into(),
        encoding,
        interactions: tools.to_vec(),
    }
}

fn in_table(table: &str, views: Vec<ViewSpec>) -> Vec<ViewSpec> {
    views.into_iter().map(|v| ViewSpec { table: table.to_string(), ..v }).collect()
}

// ---------------------------------------------------------------- patterns

pub fn patterns() -> Vec<PatternRow> {
    let row = |p: &str, i: &str, s: &str, c: ProblemCategory, a: &str| PatternRow {
        interaction_pattern: p.into(),
        interpretation: i.into(),
        subcategory: s.into(),
        problem_category: c,
        assistance: a.into(),
    };
    use ProblemCategory::*;
    vec![
        row(
            "Hovers over the same mark several times without ever clicking it",
            "Does not realise the mark can be clicked",
            "interaction discovery",
            UnfamiliarFunctionality,
            "Explain that clicking a mark selects it and scopes the other views",
        ),
        row(
            "Clicks an already selected element again and again",
            "Expects a repeated click to do something the control does not do",
            "selection behaviour",
            UnfamiliarFunctionality,
            "Describe what a click does and how to clear a selection",
        ),
        row(
            "Long pause right after a view is opened for the first time",
            "Is working out what the colours, sizes or axes stand for",
            "encoding legibility",
            UnfamiliarFunctionality,
            "Say in one sentence what the view's encoding shows",
        ),
        row(
            "Long pause while reading individual records",
            "Is trying to piece the records together into a picture",
            "record interpretation",
            DataUnderstanding,
            "Offer to read the records and summarise what they say",
        ),
        row(
            "Flips a filter back and forth between two values",
            "Compares two subsets by eye",
            "manual comparison",
            DataUnderstanding,
            "Offer to compare the two subsets side by side",
        ),
        row(
            "Brushes the timeline repeatedly over neighbouring ranges",
            "Is looking for the moment something started",
            "temporal search",
            DataUnderstanding,
            "Offer to locate when the pattern begins",
        ),
        row(
            "Writes a note whose figures differ from the data",
            "Misread or mistyped a value",
            "misreading",
            TaskFailure,
            "Point at the figure and give the value the data supports",
        ),
        row(
            "Writes a note that contradicts an earlier one",
            "Changed interpretation without revisiting earlier notes",
            "inconsistency",
            TaskFailure,
            "Flag the two notes and say which one the data backs",
        ),
    ]
}

fn operation_catalog() -> Vec<OperationTemplate> {
    vec![
        OperationTemplate {
            tool: Tool::ReadData,
            description: "read a view: its default encoding, or explicit measure / groupBy / reducer / bucket / limit"
                .into(),
        },
        OperationTemplate {
            tool: Tool::Select,
            description: "select one element of a view by key; omit element to clear".into(),
        },
        OperationTemplate {
            tool: Tool::Filter,
            description: "restrict a field to a [lo, hi] range or a list of values; give neither to clear".into(),
        },
    ]
}

// -------------------------------------------------------------- superstore

const REGIONS: [(&str, [&str; 3]); 4] = [
    ("West", ["CA", "WA", "OR"]),
    ("East", ["NY", "PA", "MA"]),
    ("Central", ["TX", "IL", "MI"]),
    ("South", ["FL", "GA", "NC"]),
];

/// (category, [(sub-category, unit price range, margin)])
const CATEGORIES: [(&str, [(&str, (f64, f64), f64); 3]); 3] = [
    (
        "Furniture",
        [("Chairs", (60.0, 400.0), 0.10), ("Tables", (120.0, 700.0), -0.04), ("Bookcases", (80.0, 500.0), 0.03)],
    ),
    (
        "Office Supplies",
        [("Binders", (4.0, 60.0), 0.22), ("Paper", (3.0, 30.0), 0.28), ("Storage", (15.0, 200.0), 0.09)],
    ),
    (
        "Technology",
        [("Phones", (50.0, 600.0), 0.16), ("Copiers", (250.0, 1800.0), 0.30), ("Accessories", (15.0, 250.0), 0.20)],
    ),
];

const SEGMENTS: [(&str, u32); 3] = [("Consumer", 5), ("Corporate", 3), ("Home Office", 2)];
const DISCOUNTS: [f64; 8] = [0.0, 0.0, 0.0, 0.1, 0.2, 0.2, 0.3, 0.5];

#[derive(Debug, Clone, PartialEq)]
pub struct Order {
    pub order_id: String,
    pub order_date: NaiveDate,
    pub region: &'static str,
    pub state: &'static str,
    pub segment: &'static str,
    pub category: &'static str,
    pub sub_category: &'static str,
    pub sales: f64,
    pub quantity: u32,
    pub discount: f64,
    pub profit: f64,
}

/// The generated order table, in file order.
pub fn superstore_orders() -> Vec<Order> {
    let mut rng = ChaCha8Rng::seed_from_u64(SUPERSTORE_SEED);
    let start = NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date");
    let mut orders: Vec<Order> = (0..SUPERSTORE_ROWS)
        .map(|_| {
            let (region, states) = REGIONS[rng.gen_range(0..REGIONS.len())];
            let state = states[rng.gen_range(0..3)];
            let segment = SEGMENTS.choose_weighted(&mut rng, |s| s.1).expect("weights").0;
            let (category, subs) = CATEGORIES[rng.gen_range(0..CATEGORIES.len())];
            let (sub_category, (lo, hi), margin) = subs[rng.gen_range(0..3)];
            let quantity = rng.gen_range(1..=8);
            let discount = *DISCOUNTS.choose(&mut rng).expect("non-empty");
            let unit = rng.gen_range(lo..hi);
            let sales = r2(unit * quantity as f64 * (1.0 - discount));
            let noise = rng.gen_range(-0.04..0.04);
            let profit = r2(sales * (margin - discount * 0.9 + noise));
            let order_date = start + Duration::days(rng.gen_range(0..1095));
            Order {
                order_id: String::new(),
                order_date,
                region,
                state,
                segment,
                category,
                sub_category,
                sales,
                quantity,
                discount,
                profit,
            }
        })
        .collect();
    orders.sort_by_key(|o| o.order_date);
    for (i, o) in orders.iter_mut().enumerate() {
        o.order_id = format!("O-{:04}", i + 1);
    }
    orders
}

pub fn superstore_csv() -> String {
    csv_string(
        &[
            "orderId",
            "orderDate",
            "region",
            "state",
            "segment",
            "category",
            "subCategory",
            "sales",
            "quantity",
            "discount",
            "profit",
        ],
        superstore_orders().into_iter().map(|o| {
            vec![
                o.order_id,
                o.order_date.format("%Y-%m-%d").to_string(),
                o.region.into(),
                o.state.into(),
                o.segment.into(),
                o.category.into(),
                o.sub_category.into(),
                format!("{:.2}", o.sales),
                o.quantity.to_string(),
                format!("{}", o.discount),
                format!("{:.2}", o.profit),
            ]
        }),
    )
}

pub fn superstore_layout() -> Layout {
    let enc = |key: Option<&str>,
               measure: Option<&str>,
               reducer: Option<Reducer>,
               bucket: Option<TimeBucket>,
               fields: &[&str]| {
        Encoding {
            key: key.map(str::to_string),
            measure: measure.map(str::to_string),
            reducer,
            bucket,
            fields: fields.iter().map(|s| s.to_string()).collect(),
        }
    };
    Layout {
        name: "superstore".into(),
        table: "orders".into(),
        column_types: BTreeMap::new(),
        views: in_table(
            "orders",
            vec![
                view(
                    "kpis",
                    ViewKind::Kpi,
                    "Total sales",
                    "Headline number: sum of sales under the current filters.",
                    enc(None, Some("sales"), Some(Reducer::Sum), None, &[]),
                    &[Tool::ReadData],
                ),
                view(
                    "map",
                    ViewKind::Chart,
                    "Sales by state",
                    "Choropleth of total sales per state; click a state to scope every view to it.",
                    enc(Some("state"), Some("sales"), Some(Reducer::Sum), None, &[]),
                    &[Tool::ReadData, Tool::Select],
                ),
                view(
                    "categories",
                    ViewKind::Chart,
                    "Profit by category",
                    "Bar chart of total profit per product category; bars are clickable.",
                    enc(Some("category"), Some("profit"), Some(Reducer::Sum), None, &[]),
                    &[Tool::ReadData, Tool::Select],
                ),
                view(
                    "trend",
                    ViewKind::Chart,
                    "Monthly sales",
                    "Line chart of sales per month; brushing sets a date range.",
                    enc(Some("orderDate"), Some("sales"), Some(Reducer::Sum), Some(TimeBucket::Month), &[]),
                    &[Tool::ReadData, Tool::Filter],
                ),
                view(
                    "filters",
                    ViewKind::FilterPanel,
                    "Filters",
                    "Dropdowns for region, segment and category, a discount slider and a date range.",
                    enc(None, None, None, None, &["region", "segment", "category", "discount", "orderDate"]),
                    &[Tool::ReadData, Tool::Filter],
                ),
            ],
        ),
    }
}

fn model_from(csv: &str, layout: Layout) -> DashboardModel {
    let table = Table::from_csv(&layout.table, csv.as_bytes(), &layout.column_types).expect("generated csv loads");
    DashboardModel::from_parts(layout, table).expect("generated layout is valid")
}

pub fn superstore_model() -> DashboardModel {
    model_from(&superstore_csv(), superstore_layout())
}

fn system_introduction(layout: &Layout) -> String {
    layout.views.iter().map(|v| format!("- {} ({}): {}\n", v.view_id, v.title, v.description)).collect()
}

pub fn superstore_knowledge() -> Knowledge {
    let mut intent_views = BTreeMap::new();
    intent_views.insert(AnalyticIntent::Compare, vec!["map".to_string(), "categories".to_string()]);
    intent_views.insert(AnalyticIntent::Trend, vec!["filters".to_string(), "trend".to_string()]);
    intent_views.insert(AnalyticIntent::Extreme, vec!["map".to_string()]);
    intent_views.insert(AnalyticIntent::FilterFocus, vec!["filters".to_string(), "map".to_string()]);
    intent_views.insert(AnalyticIntent::Categorize, vec!["categories".to_string()]);
    intent_views.insert(AnalyticIntent::Summarize, vec!["kpis".to_string(), "map".to_string(), "trend".to_string()]);
    Knowledge {
        name: "superstore".into(),
        task_statement:
            "Work out where the store makes and loses money, which products drive that, and how sales move over time."
                .into(),
        system_introduction: system_introduction(&superstore_layout()),
        operation_catalog: operation_catalog(),
        pattern_catalog: patterns(),
        pattern_catalog_file: None,
        workflow: ["kpis", "filters", "map", "categories", "trend"].map(String::from).to_vec(),
        task_slots: vec![
            TaskSlot {
                name: "regional picture".into(),
                fields: vec!["region".into(), "state".into()],
                prompt: "Your notes do not yet say which regions or states stand out.".into(),
            },
            TaskSlot {
                name: "product mix".into(),
                fields: vec!["category".into(), "subCategory".into()],
                prompt: "Your notes do not yet cover which products make or lose money.".into(),
            },
            TaskSlot {
                name: "trend over time".into(),
                fields: vec!["orderDate".into()],
                prompt: "Your notes do not yet describe how sales change over time.".into(),
            },
        ],
        intent_views,
        omission_min_notes: 3,
    }
}

// --------------------------------------------------------------------- mc3

const PLACES: [&str; 10] = [
    "Dancing Dolphin",
    "Gelato Galore",
    "Abila Hospital",
    "City Park",
    "Harbor Front",
    "Kronos Mall",
    "Old Mill",
    "Station Square",
    "Tulip Street",
    "Westgate",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Message3 {
    pub id: String,
    pub time: NaiveDateTime,
    pub account: String,
    pub location: &'static str,
    pub category: &'static str,
    pub risk: u32,
    pub text: String,
}

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs[rng.gen_range(0..xs.len())]
}

/// Evening message stream with a fire (first report 18:42:10 at Dancing
/// Dolphin) and a shooting (first report 19:43:05 at Gelato Galore).
pub fn mc3_messages() -> Vec<Message3> {
    let mut rng = ChaCha8Rng::seed_from_u64(MC3_SEED);
    let day = NaiveDate::from_ymd_opt(2014, 1, 23).expect("valid date");
    let at = |h: u32, m: u32, s: u32| day.and_hms_opt(h, m, s).expect("valid time");
    let evening_start = at(17, 0, 0);
    let mut out: Vec<Message3> = Vec::new();
    let mut push = |time, location, category, risk, text: String, rng: &mut ChaCha8Rng| {
        out.push(Message3 {
            id: String::new(),
            time,
            account: format!("user{:03}", rng.gen_range(1..120)),
            location,
            category,
            risk,
            text,
        });
    };

    for _ in 0..300 {
        let time = evening_start + Duration::seconds(rng.gen_range(0..(4 * 3600 + 1800)));
        let place = PLACES[rng.gen_range(2..PLACES.len())];
        let roll = rng.gen_range(0..20);
        let (category, text) = if roll < 12 {
            (
                "chatter",
                format!(
                    "{} {place}",
                    pick(
                        &mut rng,
                        &[
                            "Grabbing dinner near",
                            "Anyone else hanging out at",
                            "Quiet night so far at",
                            "Meeting friends at"
                        ]
                    )
                ),
            )
        } else if roll < 17 {
            (
                "traffic",
                format!(
                    "{} {place}",
                    pick(
                        &mut rng,
                        &[
                            "Traffic crawling past",
                            "Bus running late at",
                            "Road works again by",
                            "Parking is impossible at"
                        ]
                    )
                ),
            )
        } else {
            (
                "weather",
                format!(
                    "{} {place}",
                    pick(&mut rng, &["Getting cold out by", "Light rain starting at", "Windy evening around"])
                ),
            )
        };
        let risk = rng.gen_range(0..=3);
        push(time, place, category, risk, text, &mut rng);
    }

    push(at(18, 42, 10), PLACES[0], "fire", 7, format!("Smoke coming out of the roof at {}", PLACES[0]), &mut rng);
    push(
        at(19, 5, 30),
        PLACES[0],
        "fire",
        9,
        format!("Flames through the windows at {}, everyone is out on the street", PLACES[0]),
        &mut rng,
    );
    for _ in 0..24 {
        let time = at(18, 43, 0) + Duration::seconds(rng.gen_range(0..6600));
        let text = format!(
            "{} {}",
            pick(
                &mut rng,
                &["Fire crews arriving at", "Still burning at", "Firefighters on the roof of", "Ash falling around"]
            ),
            PLACES[0]
        );
        let risk = rng.gen_range(6..=8);
        push(time, PLACES[0], "fire", risk, text, &mut rng);
    }

    push(at(19, 43, 5), PLACES[1], "gunfire", 8, format!("Heard what sounded like shots near {}", PLACES[1]), &mut rng);
    for _ in 0..20 {
        let time = at(19, 43, 30) + Duration::seconds(rng.gen_range(0..1500));
        let text = format!(
            "{} {}",
            pick(
                &mut rng,
                &["More shots by", "People running away from", "Stay away from", "Someone is shooting outside"]
            ),
            PLACES[1]
        );
        let risk = rng.gen_range(5..=8);
        push(time, PLACES[1], "gunfire", risk, text, &mut rng);
    }
    for _ in 0..10 {
        let time = at(19, 50, 0) + Duration::seconds(rng.gen_range(0..1800));
        push(
            time,
            PLACES[1],
            "police",
            rng.gen_range(4..=6),
            format!("Police cars blocking the street at {}", PLACES[1]),
            &mut rng,
        );
    }

    out.sort_by(|a, b| a.time.cmp(&b.time).then(a.text.cmp(&b.text)));
    for (i, m) in out.iter_mut().enumerate() {
        m.id = format!("m{:04}", i + 1);
    }
    out
}

pub fn mc3_csv() -> String {
    csv_string(
        &["id", "time", "account", "location", "category", "risk", "message"],
        mc3_messages().into_iter().map(|m| {
            vec![
                m.id,
                m.time.format("%Y-%m-%d %H:%M:%S").to_string(),
                m.account,
                m.location.into(),
                m.category.into(),
                m.risk.to_string(),
                m.text,
            ]
        }),
    )
}

pub fn mc3_layout() -> Layout {
    Layout {
        name: "mc3".into(),
        table: "messages".into(),
        column_types: BTreeMap::new(),
        views: in_table(
            "messages",
            vec![
                view(
                    "hexmap",
                    ViewKind::Chart,
                    "Risk by place",
                    "Hexagon grid of the city; each cell is a place coloured by the highest risk score of its messages. Click a cell to scope the other views.",
                    Encoding {
                        key: Some("location".into()),
                        measure: Some("risk".into()),
                        reducer: Some(Reducer::Max),
                        ..Encoding::default()
                    },
                    &[Tool::ReadData, Tool::Select],
                ),
                view(
                    "timeline",
                    ViewKind::Chart,
                    "Messages over time",
                    "Histogram of message counts per hour; brush to limit the time range.",
                    Encoding {
                        key: Some("time".into()),
                        reducer: Some(Reducer::Count),
                        bucket: Some(TimeBucket::Hour),
                        ..Encoding::default()
                    },
                    &[Tool::ReadData, Tool::Filter],
                ),
                view(
                    "messages",
                    ViewKind::Chart,
                    "Message list",
                    "Scrollable table of the raw messages with time, place, category and text.",
                    Encoding { key: Some("id".into()), ..Encoding::default() },
                    &[Tool::ReadData, Tool::Filter],
                ),
                view(
                    "filters",
                    ViewKind::FilterPanel,
                    "Filters",
                    "Category checkboxes, a risk slider and a time range.",
                    Encoding { fields: vec!["category".into(), "risk".into(), "time".into()], ..Encoding::default() },
                    &[Tool::ReadData, Tool::Filter],
                ),
            ],
        ),
    }
}

pub fn mc3_model() -> DashboardModel {
    model_from(&mc3_csv(), mc3_layout())
}

pub fn mc3_knowledge() -> Knowledge {
    let mut intent_views = BTreeMap::new();
    intent_views
        .insert(AnalyticIntent::Summarize, vec!["hexmap".to_string(), "timeline".to_string(), "messages".to_string()]);
    intent_views.insert(AnalyticIntent::Trend, vec!["timeline".to_string()]);
    intent_views.insert(AnalyticIntent::Extreme, vec!["hexmap".to_string()]);
    Knowledge {
        name: "mc3".into(),
        task_statement: "Use the evening's message stream to reconstruct the incidents in the city: what happened, where, and when it started."
            .into(),
        system_introduction: system_introduction(&mc3_layout()),
        operation_catalog: operation_catalog(),
        pattern_catalog: patterns(),
        pattern_catalog_file: None,
        workflow: ["hexmap", "timeline", "messages"].map(String::from).to_vec(),
        task_slots: vec![
            TaskSlot {
                name: "incident times".into(),
                fields: vec!["time".into()],
                prompt: "Your notes do not yet say when the incidents began.".into(),
            },
            TaskSlot {
                name: "incident places".into(),
                fields: vec!["location".into()],
                prompt: "Your notes do not yet say where the incidents took place.".into(),
            },
            TaskSlot {
                name: "incident types".into(),
                fields: vec!["category".into()],
                prompt: "Your notes do not yet name the kinds of incident.".into(),
            },
        ],
        intent_views,
        omission_min_notes: 3,
    }
}

/// Both datasets and profiles, each under its own name.
pub fn catalog() -> Catalog {
    Catalog::new()
        .with_profile("superstore", superstore_knowledge())
        .with_dataset("superstore", superstore_model())
        .with_profile("mc3", mc3_knowledge())
        .with_dataset("mc3", mc3_model())
}

/// Loads the bundled profiles and datasets from a fixture directory
/// written by [`write_all`].
pub fn catalog_from_dir(dir: &Path) -> Result<Catalog, GatewayError> {
    Catalog::new()
        .load(
            "superstore",
            &dir.join("superstore/knowledge.json"),
            "superstore",
            &dir.join("superstore/orders.csv"),
            &dir.join("superstore/layout.json"),
        )?
        .load(
            "mc3",
            &dir.join("mc3/knowledge.json"),
            "mc3",
            &dir.join("mc3/messages.csv"),
            &dir.join("mc3/layout.json"),
        )
}

/// Knowledge as stored on disk: the pattern catalog lives in a shared file.
fn knowledge_file(k: &Knowledge) -> String {
    let mut on_disk = k.clone();
    on_disk.pattern_catalog.clear();
    on_disk.pattern_catalog_file = Some("../patterns.json".into());
    pretty(&on_disk)
}

// --------------------------------------------------------------- scenarios

fn step(thought: &str, op: Operation) -> Value {
    json!({"thought": thought, "action": {"operation": op}})
}

fn finish(thought: &str, title: &str, finding: &str) -> Value {
    json!({"thought": thought, "action": {"finish": {"title": title, "finding": finding}}})
}

fn reasoner(plan: &str, n: usize, respond: Value) -> ScriptEntry {
    ScriptEntry::new(Role::Reasoner, &[&format!("plan: {plan}\n"), &format!("next step: {n} of")], respond)
}

fn event(action: ActionType, view: &str, element: &str, t: i64) -> Message {
    Message::Event(InteractionEvent::new(action, view, element, t))
}

fn transcript(frames: &[Frame]) -> String {
    frames.iter().map(|f| encode(f) + "\n").collect()
}

/// Pause on the message list, an exploration offer, a four-step analysis
/// of the fire, then a note with a wrong start time.
pub fn fire_summary_transcript() -> String {
    let s = "s1";
    transcript(&[
        Frame::new(s, 0, Message::Open { profile: "mc3".into(), dataset: "mc3".into() }),
        Frame::new(s, 1000, event(ActionType::Hover, "hexmap", "Dancing Dolphin", 1000)),
        Frame::new(s, 1800, event(ActionType::Hover, "hexmap", "Gelato Galore", 1800)),
        Frame::new(s, 2600, event(ActionType::Click, "timeline", "18:00", 2600)),
        Frame::new(s, 7400, event(ActionType::Hover, "messages", "m0154", 7400)),
        Frame::new(s, 9000, Message::Decision { suggestion_id: "s1.sug1".into(), decision: Decision::Accept }),
        Frame::new(
            s,
            20_000,
            Message::Note {
                note: Note {
                    note_id: "n1".into(),
                    author: Author::User,
                    text: "The fire broke out near Dancing Dolphin at 18:45.".into(),
                    claims: None,
                    created_at: 20_000,
                    linked_evidence: Vec::new(),
                },
            },
        ),
    ])
}

pub fn fire_summary_script() -> ScriptFile {
    let plan = "s1.sug1";
    ScriptFile {
        strict: false,
        entries: vec![
            ScriptEntry::new(
                Role::Detector,
                &["phase: exploration", "s1.ev4"],
                json!({
                    "help": true,
                    "description": "Paused for several seconds over the message list after scanning the map and the timeline",
                    "pattern": "Long pause while reading individual records"
                }),
            ),
            ScriptEntry::new(
                Role::Planner,
                &["help event s1.help1"],
                json!({
                    "hypothesis": "summarize",
                    "rationale": "The user moved from the hot spot on the map to the timeline and is now reading messages one by one.",
                    "targetData": "fire reports near Dancing Dolphin",
                    "goal": "summarize the fire reported near Dancing Dolphin",
                    "targetViews": ["messages", "hexmap", "timeline"],
                    "message": "Reading through these messages one by one? I can pull together what the data says about the fire near Dancing Dolphin."
                }),
            ),
            reasoner(plan, 1, step("Start from the hexagon map to see which place carries the highest risk.", Operation::read_rows("hexmap"))),
            reasoner(
                plan,
                2,
                step("Dancing Dolphin has the top risk score; select it so the other views follow.", Operation::select("hexmap", "Dancing Dolphin")),
            ),
            reasoner(
                plan,
                3,
                step(
                    "Find the first message of each category at that place.",
                    Operation::read("messages", "time", Some("category"), Reducer::Min),
                ),
            ),
            reasoner(
                plan,
                4,
                finish(
                    "The first fire report and the peak risk are enough to summarise the incident.",
                    "Fire at Dancing Dolphin",
                    "Dancing Dolphin has the highest risk score on the map (9). The first fire report there was logged at 18:42 and reports kept coming in through the evening.",
                ),
            ),
            ScriptEntry::new(
                Role::Verifier,
                &["Dancing Dolphin at 18:45"],
                json!({"claims": [{
                    "kind": "time_point",
                    "field": "time",
                    "claimedValue": "18:45",
                    "quote": "18:45",
                    "scope": {"category": "fire", "location": "Dancing Dolphin"}
                }]}),
            ),
        ],
    }
}

/// Three clicks on the same state, an onboarding tip nobody touches, and a
/// later hover after the tip has expired.
pub fn tip_expiry_transcript() -> String {
    let s = "s1";
    transcript(&[
        Frame::new(s, 0, Message::Open { profile: "superstore".into(), dataset: "superstore".into() }),
        Frame::new(s, 1000, event(ActionType::Click, "map", "CA", 1000)),
        Frame::new(s, 1600, event(ActionType::Click, "map", "CA", 1600)),
        Frame::new(s, 2200, event(ActionType::Click, "map", "CA", 2200)),
        Frame::new(s, 9000, event(ActionType::Hover, "categories", "Technology", 9000)),
    ])
}

pub fn tip_expiry_script() -> ScriptFile {
    ScriptFile {
        strict: false,
        entries: vec![
            ScriptEntry::new(
                Role::Detector,
                &["phase: onboarding", "s1.ev3"],
                json!({
                    "help": true,
                    "description": "Clicked the same state three times in a row",
                    "pattern": "Clicks an already selected element again and again"
                }),
            ),
            ScriptEntry::new(
                Role::Planner,
                &["help event s1.help1"],
                json!({
                    "hypothesis": "unfamiliar_interaction",
                    "rationale": "Repeated clicks on a selected state suggest the user expects something else to happen.",
                    "message": "Clicking a state selects it and filters the other charts; click it once more to clear the selection."
                }),
            ),
        ],
    }
}

// -------------------------------------------------------------------- eval

struct TaskPlan {
    prompt: String,
    views: Vec<&'static str>,
    fields: Vec<&'static str>,
    steps: Vec<(String, Operation)>,
    /// Builds (title, finding) from the read results, in order.
    finding: Box<dyn Fn(&[QueryResult]) -> (String, String)>,
}

fn groups(r: &QueryResult) -> Vec<(String, f64)> {
    match r {
        QueryResult::Groups { groups, .. } => {
            groups.iter().filter_map(|g| g.value.as_f64().map(|v| (g.key.clone(), v))).collect()
        }
        _ => Vec::new(),
    }
}

fn scalar(r: &QueryResult) -> f64 {
    match r {
        QueryResult::Scalar { value, .. } => value.as_f64().unwrap_or(0.0),
        _ => 0.0,
    }
}

fn top(gs: &[(String, f64)]) -> (String, f64) {
    gs.iter().cloned().fold((String::new(), f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
}

fn bottom(gs: &[(String, f64)]) -> (String, f64) {
    gs.iter().cloned().fold((String::new(), f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
}

fn value_of(gs: &[(String, f64)], key: &str) -> f64 {
    gs.iter().find(|g| g.0 == key).map(|g| g.1).unwrap_or(0.0)
}

fn read(view: &str, measure: &str, group_by: &str, reducer: Reducer) -> Operation {
    Operation::read(view, measure, Some(group_by), reducer)
}

fn year_range(year: i32) -> Operation {
    Operation::Filter {
        view: "filters".into(),
        params: FilterParams {
            field: "orderDate".into(),
            range: Some([Bound::Text(format!("{year}-01-01")), Bound::Text(format!("{year}-12-31"))]),
            values: None,
        },
    }
}

fn task_plan(category: Category, variant: usize, rng: &mut ChaCha8Rng) -> TaskPlan {
    let regions: Vec<&str> = REGIONS.iter().map(|r| r.0).collect();
    let cats: Vec<&str> = CATEGORIES.iter().map(|c| c.0).collect();
    let segs: Vec<&str> = SEGMENTS.iter().map(|s| s.0).collect();
    let s = |t: &str| t.to_string();
    match (category, variant) {
        (Category::Comparison, 0) => {
            let mut rs = regions.clone();
            rs.shuffle(rng);
            let (a, b) = (rs[0], rs[1]);
            TaskPlan {
                prompt: format!("Compare total sales of the {a} and {b} regions."),
                views: vec!["map"],
                fields: vec!["region", "sales"],
                steps: vec![(
                    s("Group sales by region on the map view."),
                    read("map", "sales", "region", Reducer::Sum),
                )],
                finding: Box::new(move |r| {
                    let g = groups(&r[0]);
                    let (x, y) = (value_of(&g, a), value_of(&g, b));
                    let lead = if x >= y { a } else { b };
                    (
                        format!("{lead} sells more"),
                        format!("{a} sold {} and {b} sold {}.", display_num(x), display_num(y)),
                    )
                }),
            }
        }
        (Category::Comparison, 1) => {
            let mut rs = regions.clone();
            rs.shuffle(rng);
            let (a, b) = (rs[0], rs[1]);
            let seg = *segs.choose(rng).expect("segments");
            TaskPlan {
                prompt: format!("Within the {seg} segment, how do the {a} and {b} regions compare on sales?"),
                views: vec!["filters", "map"],
                fields: vec!["segment", "region", "sales"],
                steps: vec![
                    (
                        format!("Limit the data to the {seg} segment."),
                        Operation::filter_values("filters", "segment", &[seg]),
                    ),
                    (s("Now group the remaining sales by region."), read("map", "sales", "region", Reducer::Sum)),
                ],
                finding: Box::new(move |r| {
                    let g = groups(&r[0]);
                    (
                        format!("{seg}: {a} vs {b}"),
                        format!(
                            "In the {seg} segment {a} sold {} against {} in {b}.",
                            display_num(value_of(&g, a)),
                            display_num(value_of(&g, b))
                        ),
                    )
                }),
            }
        }
        (Category::Comparison, _) => {
            let mut rs = regions.clone();
            rs.shuffle(rng);
            let (a, b) = (rs[0], rs[1]);
            TaskPlan {
                prompt: format!("Which of {a} and {b} earns more profit?"),
                views: vec!["filters", "categories"],
                fields: vec!["region", "profit"],
                steps: vec![
                    (format!("Keep only {a} and {b}."), Operation::filter_values("filters", "region", &[a, b])),
                    (s("Sum profit per region."), read("categories", "profit", "region", Reducer::Sum)),
                ],
                finding: Box::new(move |r| {
                    let g = groups(&r[0]);
                    (
                        s("Profit by region"),
                        format!(
                            "{a} earned {} and {b} earned {}.",
                            display_num(value_of(&g, a)),
                            display_num(value_of(&g, b))
                        ),
                    )
                }),
            }
        }
        (Category::Trend, 0) => {
            let year = rng.gen_range(2021..=2023);
            TaskPlan {
                prompt: format!("How did monthly sales develop during {year}?"),
                views: vec!["filters", "trend"],
                fields: vec!["orderDate", "sales"],
                steps: vec![
                    (format!("Restrict the dates to {year}."), year_range(year)),
                    (s("Read the monthly sales line."), Operation::read_rows("trend")),
                ],
                finding: Box::new(move |r| {
                    let (m, v) = top(&groups(&r[0]));
                    let (lm, lv) = bottom(&groups(&r[0]));
                    (
                        s("Monthly sales"),
                        format!(
                            "Sales peaked in {m} at {} and were lowest in {lm} at {}.",
                            display_num(v),
                            display_num(lv)
                        ),
                    )
                }),
            }
        }
        (Category::Trend, 1) => {
            let year = rng.gen_range(2021..=2023);
            let region = *regions.choose(rng).expect("regions");
            TaskPlan {
                prompt: format!("What did the monthly sales trend look like in the {region} region in {year}?"),
                views: vec!["filters", "trend"],
                fields: vec!["region", "orderDate", "sales"],
                steps: vec![
                    (
                        format!("Filter to the {region} region."),
                        Operation::filter_values("filters", "region", &[region]),
                    ),
                    (format!("Restrict the dates to {year}."), year_range(year)),
                    (s("Read the monthly sales line."), Operation::read_rows("trend")),
                ],
                finding: Box::new(move |r| {
                    let (m, v) = top(&groups(&r[0]));
                    (format!("{region} trend"), format!("{region} sales peaked in {m} with {}.", display_num(v)))
                }),
            }
        }
        (Category::Trend, _) => TaskPlan {
            prompt: s("Are yearly sales growing?"),
            views: vec!["trend"],
            fields: vec!["orderDate", "sales"],
            steps: vec![(
                s("Bucket the sales line by year instead of month."),
                Operation::ReadData {
                    view: "trend".into(),
                    params: ReadParams {
                        measure: Some("sales".into()),
                        group_by: Some("orderDate".into()),
                        reducer: Some(Reducer::Sum),
                        bucket: Some(TimeBucket::Year),
                        limit: None,
                    },
                },
            )],
            finding: Box::new(move |r| {
                let g = groups(&r[0]);
                let vals: Vec<String> = g.iter().map(|(k, v)| format!("{k}: {}", display_num(*v))).collect();
                (s("Yearly sales"), format!("Yearly totals are {}.", vals.join("; ")))
            }),
        },
        (Category::Performance, 0) => {
            let region = *regions.choose(rng).expect("regions");
            TaskPlan {
                prompt: format!("Which state is most profitable in the {region} region?"),
                views: vec!["filters", "map"],
                fields: vec!["region", "state", "profit"],
                steps: vec![
                    (format!("Filter to {region}."), Operation::filter_values("filters", "region", &[region])),
                    (s("Sum profit per state."), read("map", "profit", "state", Reducer::Sum)),
                ],
                finding: Box::new(move |r| {
                    let (st, v) = top(&groups(&r[0]));
                    (
                        format!("Top state in {region}"),
                        format!("{st} leads {region} with a profit of {}.", display_num(v)),
                    )
                }),
            }
        }
        (Category::Performance, 1) => TaskPlan {
            prompt: s("Which sub-category loses the most money?"),
            views: vec!["categories"],
            fields: vec!["subCategory", "profit"],
            steps: vec![(s("Sum profit per sub-category."), read("categories", "profit", "subCategory", Reducer::Sum))],
            finding: Box::new(move |r| {
                let (sub, v) = bottom(&groups(&r[0]));
                (s("Biggest loss maker"), format!("{sub} has the lowest total profit, {}.", display_num(v)))
            }),
        },
        (Category::Performance, 2) => {
            let cat = *cats.choose(rng).expect("categories");
            TaskPlan {
                prompt: format!("Which state sells the most {cat}, and how does it compare to total sales?"),
                views: vec!["filters", "map", "kpis"],
                fields: vec!["category", "state", "sales"],
                steps: vec![
                    (format!("Filter to {cat}."), Operation::filter_values("filters", "category", &[cat])),
                    (s("Sum sales per state."), read("map", "sales", "state", Reducer::Sum)),
                    (s("Read the total for comparison."), Operation::read_rows("kpis")),
                ],
                finding: Box::new(move |r| {
                    let (st, v) = top(&groups(&r[0]));
                    let total = scalar(&r[1]);
                    (
                        format!("{cat} leader"),
                        format!(
                            "{st} sells the most {cat} ({}) out of {} in total.",
                            display_num(v),
                            display_num(total)
                        ),
                    )
                }),
            }
        }
        (Category::Performance, _) => TaskPlan {
            prompt: s("In the state with the highest sales, which category earns the most profit?"),
            views: vec!["map", "categories"],
            fields: vec!["state", "sales", "category", "profit"],
            steps: vec![
                (s("Read sales per state from the map."), Operation::read_rows("map")),
                (
                    s("Select the state with the highest sales."),
                    Operation::Select { view: "map".into(), params: Default::default() },
                ),
                (s("Read profit per category for that state."), Operation::read_rows("categories")),
                (s("Read the category chart again to confirm the ranking."), Operation::read_rows("categories")),
            ],
            finding: Box::new(move |r| {
                let (cat, v) = top(&groups(&r[1]));
                (s("Best category in the top state"), format!("There {cat} earns the most profit, {}.", display_num(v)))
            }),
        },
        (Category::Correlation, 0) => TaskPlan {
            prompt: s("Do higher discounts go with lower profit?"),
            views: vec!["categories"],
            fields: vec!["discount", "profit"],
            steps: vec![(
                s("Average profit per discount level."),
                read("categories", "profit", "discount", Reducer::Mean),
            )],
            finding: Box::new(move |r| {
                let g = groups(&r[0]);
                let first = g.first().map(|x| x.1).unwrap_or(0.0);
                let last = g.last().map(|x| x.1).unwrap_or(0.0);
                (
                    s("Discount hurts profit"),
                    format!(
                        "Mean profit falls from {} without discount to {} at the deepest discount.",
                        display_num(first),
                        display_num(last)
                    ),
                )
            }),
        },
        (Category::Correlation, 1) => {
            let cat = *cats.choose(rng).expect("categories");
            TaskPlan {
                prompt: format!("For {cat}, how does discount relate to profit?"),
                views: vec!["filters", "categories"],
                fields: vec!["category", "discount", "profit"],
                steps: vec![
                    (format!("Filter to {cat}."), Operation::filter_values("filters", "category", &[cat])),
                    (s("Average profit per discount level."), read("categories", "profit", "discount", Reducer::Mean)),
                ],
                finding: Box::new(move |r| {
                    let g = groups(&r[0]);
                    let (_, worst) = bottom(&g);
                    (
                        format!("{cat} discounts"),
                        format!("For {cat} the worst discount level averages a profit of {}.", display_num(worst)),
                    )
                }),
            }
        }
        (Category::Correlation, _) => TaskPlan {
            prompt: s("Do discounts at least raise the quantity sold?"),
            views: vec!["categories"],
            fields: vec!["discount", "quantity", "profit"],
            steps: vec![
                (s("Average quantity per discount level."), read("categories", "quantity", "discount", Reducer::Mean)),
                (s("Average profit per discount level."), read("categories", "profit", "discount", Reducer::Mean)),
            ],
            finding: Box::new(move |r| {
                let q = groups(&r[0]);
                let p = groups(&r[1]);
                let (qa, qb) = (q.first().map(|x| x.1).unwrap_or(0.0), q.last().map(|x| x.1).unwrap_or(0.0));
                let pb = p.last().map(|x| x.1).unwrap_or(0.0);
                (
                    s("Quantity flat, profit down"),
                    format!(
                        "Average quantity moves from {} to {} while mean profit drops to {}.",
                        display_num(qa),
                        display_num(qb),
                        display_num(pb)
                    ),
                )
            }),
        },
        (Category::Dimension, 0) => {
            let seg = *segs.choose(rng).expect("segments");
            TaskPlan {
                prompt: format!("Break down {seg} sales by product category."),
                views: vec!["filters", "categories"],
                fields: vec!["segment", "category", "sales"],
                steps: vec![
                    (format!("Filter to the {seg} segment."), Operation::filter_values("filters", "segment", &[seg])),
                    (s("Sum sales per category."), read("categories", "sales", "category", Reducer::Sum)),
                ],
                finding: Box::new(move |r| {
                    let (cat, v) = top(&groups(&r[0]));
                    (
                        format!("{seg} mix"),
                        format!("{seg} customers spend the most on {cat}, {} in total.", display_num(v)),
                    )
                }),
            }
        }
        (Category::Dimension, 1) => {
            let seg = *segs.choose(rng).expect("segments");
            TaskPlan {
                prompt: format!("What do {seg} customers buy most?"),
                views: vec!["filters", "categories"],
                fields: vec!["segment", "category", "sales"],
                steps: vec![
                    (format!("Filter to the {seg} segment."), Operation::filter_values("filters", "segmnt", &[seg])),
                    (
                        s("The field name was wrong; the column is segment."),
                        Operation::filter_values("filters", "segment", &[seg]),
                    ),
                    (s("Sum sales per category."), read("categories", "sales", "category", Reducer::Sum)),
                ],
                finding: Box::new(move |r| {
                    let (cat, v) = top(&groups(&r[0]));
                    (format!("{seg} favourites"), format!("{cat} leads {seg} sales with {}.", display_num(v)))
                }),
            }
        }
        (Category::Dimension, _) => {
            let seg = *segs.choose(rng).expect("segments");
            let region = *regions.choose(rng).expect("regions");
            TaskPlan {
                prompt: format!("How do {seg} sales in the {region} region split across categories, and what share of all sales is that?"),
                views: vec!["filters", "categories", "kpis"],
                fields: vec!["segment", "region", "category", "sales"],
                steps: vec![
                    (format!("Filter to the {seg} segment."), Operation::filter_values("filters", "segment", &[seg])),
                    (format!("Filter to {region}."), Operation::filter_values("filters", "region", &[region])),
                    (s("Sum sales per category."), read("categories", "sales", "category", Reducer::Sum)),
                    (s("Read the filtered total."), Operation::read_rows("kpis")),
                ],
                finding: Box::new(move |r| {
                    let (cat, v) = top(&groups(&r[0]));
                    (format!("{seg} in {region}"), format!("{cat} is the largest at {} of {} in this slice.", display_num(v), display_num(scalar(&r[1]))))
                }),
            }
        }
    }
}

fn variants(c: Category) -> usize {
    match c {
        Category::Comparison | Category::Trend | Category::Correlation | Category::Dimension => 3,
        Category::Performance => 4,
    }
}

/// The 100-task set (17/20/31/11/21) and the reasoner script that solves it.
///
/// Every fifth task misreports one number by 7% so the rubric has
/// something to catch.
pub fn eval_tasks_and_script() -> (Vec<EvalTask>, ScriptFile) {
    let counts = crate::eval::Mix::STANDARD.apportion(100).expect("standard mix is valid");
    let model = Arc::new(superstore_model());
    let mut rng = ChaCha8Rng::seed_from_u64(TASK_SEED);
    let mut tasks = Vec::new();
    let mut entries = Vec::new();
    let mut n = 0;
    for (c, k) in Category::ALL.into_iter().zip(counts) {
        for i in 0..k {
            n += 1;
            let id = format!("T{n:03}");
            let plan = task_plan(c, i % variants(c), &mut rng);
            let mut dash = Dashboard::new(Arc::clone(&model), id.clone());
            let mut reads = Vec::new();
            for (j, (thought, op)) in plan.steps.iter().enumerate() {
                let op = match op {
                    // selecting "the top state" is resolved against the data here
                    Operation::Select { view, params } if params.element.is_none() => {
                        let (top_state, _) = top(&groups(reads.last().expect("a read precedes the select")));
                        Operation::select(view, &top_state)
                    }
                    other => other.clone(),
                };
                if let Operation::ReadData { view, params } = &op {
                    if let Ok(r) = dash.query(view, params) {
                        reads.push(r);
                    }
                }
                dash.apply_tool(&op);
                entries.push(reasoner(&id, j + 1, step(thought, op)));
            }
            let (title, mut body) = (plan.finding)(&reads);
            if n % 5 == 0 {
                body = skew_first_number(&body);
            }
            entries.push(reasoner(&id, plan.steps.len() + 1, finish("That answers the task.", &title, &body)));
            tasks.push(EvalTask {
                task_id: id,
                category: c,
                prompt: plan.prompt,
                expected_views: plan.views.iter().map(|s| s.to_string()).collect(),
                expected_fields: plan.fields.iter().map(|s| s.to_string()).collect(),
            });
        }
    }
    (tasks, ScriptFile { strict: true, entries })
}

/// Multiplies the first decimal number in `text` by 1.07.
fn skew_first_number(text: &str) -> String {
    let Some(n) = crate::eval::extract_numbers(text).into_iter().next() else { return text.to_string() };
    let written = display_num(n.value);
    let skewed = display_num(n.value * 1.07);
    text.replacen(&written, &skewed, 1)
}

// ------------------------------------------------------------------- notes

/// One note of the verification set. `expected` is the corrected answer
/// for notes with a seeded error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NoteCase {
    pub note: Note,
    pub seeded_error: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<String>,
}

fn claim(kind: ClaimKind, field: &str, value: ClaimValue, quote: &str) -> Claim {
    Claim {
        kind,
        field: field.into(),
        claimed_value: value,
        span: [0, 0],
        quote: quote.into(),
        scope: BTreeMap::new(),
        reducer: None,
        group_by: None,
        direction: None,
        at: None,
    }
}

fn scoped(mut c: Claim, scope: &[(&str, &str)], reducer: Option<Reducer>) -> Claim {
    c.scope = scope.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    c.reducer = reducer;
    c
}

fn ranked<F: Fn(&Order) -> &'static str>(
    orders: &[Order],
    key: F,
    value: fn(&Order) -> f64,
) -> Vec<(&'static str, f64)> {
    let mut m: BTreeMap<&'static str, f64> = BTreeMap::new();
    for o in orders {
        *m.entry(key(o)).or_insert(0.0) += value(o);
    }
    let mut v: Vec<_> = m.into_iter().collect();
    v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    v
}

/// Twenty notes on the superstore data: ten correct, ten with one seeded
/// numeric, time or extremum error each. Returns the notes and the
/// extraction script.
pub fn verification_notes() -> (Vec<NoteCase>, ScriptFile) {
    let orders = superstore_orders();
    let sum = |f: &dyn Fn(&Order) -> bool, v: fn(&Order) -> f64| orders.iter().filter(|o| f(o)).map(v).sum::<f64>();
    let fmt_date = |d: NaiveDate| d.format("%Y-%m-%d").to_string();

    let tech_sales = sum(&|o| o.category == "Technology", |o| o.sales);
    let west_profit = sum(&|o| o.region == "West", |o| o.profit);
    let central: Vec<f64> = orders.iter().filter(|o| o.region == "Central").map(|o| o.discount).collect();
    let central_mean = central.iter().sum::<f64>() / central.len() as f64;
    let corporate = orders.iter().filter(|o| o.segment == "Corporate").count() as f64;
    let tx_first = orders.iter().filter(|o| o.state == "TX").map(|o| o.order_date).min().expect("TX orders");
    let furn_last =
        orders.iter().filter(|o| o.category == "Furniture").map(|o| o.order_date).max().expect("furniture orders");
    let by_state = ranked(&orders, |o| o.state, |o| o.sales);
    let mut by_sub = ranked(&orders, |o| o.sub_category, |o| o.profit);
    by_sub.reverse();
    let max_sale = orders.iter().map(|o| o.sales).fold(f64::NEG_INFINITY, f64::max);
    let south_units = sum(&|o| o.region == "South" && o.category == "Office Supplies", |o| o.quantity as f64);

    let num = |x: f64| format!("{x:.2}");
    let int = |x: f64| format!("{x:.0}");
    // (text with {} for the value, claim builder, right value, wrong value)
    type Build = Box<dyn Fn(&str) -> Claim>;
    let cases: Vec<(&str, Build, String, String)> = vec![
        (
            "Technology sales add up to {} over the three years.",
            Box::new(|q| {
                scoped(
                    claim(ClaimKind::NumericValue, "sales", ClaimValue::Num(q.parse().unwrap_or(0.0)), q),
                    &[("category", "Technology")],
                    Some(Reducer::Sum),
                )
            }),
            num(tech_sales),
            num(tech_sales * 1.08),
        ),
        (
            "The West region made {} in profit.",
            Box::new(|q| {
                scoped(
                    claim(ClaimKind::NumericValue, "profit", ClaimValue::Num(q.parse().unwrap_or(0.0)), q),
                    &[("region", "West")],
                    Some(Reducer::Sum),
                )
            }),
            num(west_profit),
            num(west_profit * 0.9),
        ),
        (
            "Central orders get an average discount of {}.",
            Box::new(|q| {
                scoped(
                    claim(ClaimKind::NumericValue, "discount", ClaimValue::Num(q.parse().unwrap_or(0.0)), q),
                    &[("region", "Central")],
                    Some(Reducer::Mean),
                )
            }),
            num(central_mean),
            num(central_mean + 0.05),
        ),
        (
            "Corporate customers placed {} orders.",
            Box::new(|q| {
                scoped(
                    claim(ClaimKind::NumericValue, "sales", ClaimValue::Num(q.parse().unwrap_or(0.0)), q),
                    &[("segment", "Corporate")],
                    Some(Reducer::Count),
                )
            }),
            int(corporate),
            int(corporate + 40.0),
        ),
        (
            "The first Texas order is dated {}.",
            Box::new(|q| {
                scoped(
                    claim(ClaimKind::TimePoint, "orderDate", ClaimValue::Text(q.into()), q),
                    &[("state", "TX")],
                    None,
                )
            }),
            fmt_date(tx_first),
            fmt_date(tx_first + Duration::days(3)),
        ),
        (
            "The most recent Furniture order came in on {}.",
            Box::new(|q| {
                let mut c = scoped(
                    claim(ClaimKind::Extremum, "orderDate", ClaimValue::Text(q.into()), q),
                    &[("category", "Furniture")],
                    None,
                );
                c.direction = Some(Direction::Max);
                c
            }),
            fmt_date(furn_last),
            fmt_date(furn_last - Duration::days(3)),
        ),
        (
            "{} has the highest total sales of any state.",
            Box::new(|q| {
                let mut c = claim(ClaimKind::Extremum, "sales", ClaimValue::Text(q.into()), q);
                c.group_by = Some("state".into());
                c.reducer = Some(Reducer::Sum);
                c.direction = Some(Direction::Max);
                c
            }),
            by_state[0].0.to_string(),
            by_state[1].0.to_string(),
        ),
        (
            "{} is the least profitable sub-category.",
            Box::new(|q| {
                let mut c = claim(ClaimKind::Extremum, "profit", ClaimValue::Text(q.into()), q);
                c.group_by = Some("subCategory".into());
                c.reducer = Some(Reducer::Sum);
                c.direction = Some(Direction::Min);
                c
            }),
            by_sub[0].0.to_string(),
            by_sub[1].0.to_string(),
        ),
        (
            "The biggest single order was worth {}.",
            Box::new(|q| {
                let mut c = claim(ClaimKind::Extremum, "sales", ClaimValue::Num(q.parse().unwrap_or(0.0)), q);
                c.direction = Some(Direction::Max);
                c
            }),
            num(max_sale),
            num(max_sale * 0.9),
        ),
        (
            "The South sold {} units of office supplies.",
            Box::new(|q| {
                scoped(
                    claim(ClaimKind::NumericValue, "quantity", ClaimValue::Num(q.parse().unwrap_or(0.0)), q),
                    &[("region", "South"), ("category", "Office Supplies")],
                    Some(Reducer::Sum),
                )
            }),
            int(south_units),
            int(south_units + 25.0),
        ),
    ];

    let mut notes = Vec::new();
    let mut entries = Vec::new();
    let mut n = 0;
    for wrong in [false, true] {
        for (template, build, right, bad) in &cases {
            n += 1;
            let id = format!("v{n:02}");
            let value = if wrong { bad } else { right };
            let text = template.replace("{}", value);
            let c = build(value);
            entries.push(ScriptEntry::new(Role::Verifier, &[&format!("note {id}:\n")], json!({ "claims": [c] })));
            notes.push(NoteCase {
                note: Note::user(id, text, 1000 * n as i64),
                seeded_error: wrong,
                expected: wrong.then(|| right.clone()),
            });
        }
    }
    (notes, ScriptFile { strict: true, entries })
}

// ------------------------------------------------------------------ output

fn scripted(script: ScriptFile) -> Arc<ScriptedBackend> {
    Arc::new(ScriptedBackend::new(script))
}

/// Replays a transcript against the bundled catalog.
pub fn run_scenario(transcript: &str, script: ScriptFile) -> Result<String, FixtureError> {
    replay(catalog(), scripted(script), EngineConfig::default(), transcript)
        .map(|o| o.transcript())
        .map_err(|e| FixtureError::Pipeline(e.to_string()))
}

/// Runs the task set through the scripted loop and the rubric.
pub fn eval_report(tasks: &[EvalTask], script: ScriptFile) -> Result<crate::eval::Report, FixtureError> {
    let model = Arc::new(superstore_model());
    let knowledge = superstore_knowledge();
    let backend = ScriptedBackend::new(script);
    let mut runs = run_batch(tasks, &BatchConfig::default(), &model, &knowledge, &backend);
    for (run, task) in runs.iter_mut().zip(tasks) {
        score_run(run, task, ScoreMode::Rubric, &model);
    }
    aggregate(&runs).map_err(|e| FixtureError::Pipeline(e.to_string()))
}

/// Every fixture file, in a fixed order.
pub fn generate() -> Result<Vec<FixtureFile>, FixtureError> {
    let f = |path: &str, contents: String| FixtureFile { path: path.to_string(), contents };
    let mut out = vec![
        f("patterns.json", pretty(&patterns())),
        f("superstore/orders.csv", superstore_csv()),
        f("superstore/layout.json", pretty(&superstore_layout())),
        f("superstore/knowledge.json", knowledge_file(&superstore_knowledge())),
        f("mc3/messages.csv", mc3_csv()),
        f("mc3/layout.json", pretty(&mc3_layout())),
        f("mc3/knowledge.json", knowledge_file(&mc3_knowledge())),
    ];
    for (name, transcript, script) in [
        ("fire-summary", fire_summary_transcript(), fire_summary_script()),
        ("tip-expiry", tip_expiry_transcript(), tip_expiry_script()),
    ] {
        let golden = run_scenario(&transcript, script.clone())?;
        out.push(f(&format!("scenarios/{name}.in.jsonl"), transcript));
        out.push(f(&format!("scenarios/{name}.script.json"), pretty(&script)));
        out.push(f(&format!("scenarios/{name}.golden.jsonl"), golden));
    }
    let (tasks, script) = eval_tasks_and_script();
    let report = eval_report(&tasks, script.clone())?;
    out.push(f("eval/tasks.json", pretty(&tasks)));
    out.push(f("eval/script.json", pretty(&script)));
    out.push(f("eval/rubric-report.tsv", report.to_tsv()));
    out.push(f("eval/rubric-report.json", report.to_json() + "\n"));
    let (notes, script) = verification_notes();
    out.push(f("notes/verification.json", pretty(&notes)));
    out.push(f("notes/script.json", pretty(&script)));
    Ok(out)
}

/// Writes every fixture under `dir`, creating directories as needed.
pub fn write_all(dir: &Path) -> Result<Vec<PathBuf>, FixtureError> {
    let mut written = Vec::new();
    for file in generate()? {
        let path = dir.join(&file.path);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| FixtureError::Io(format!("{}: {e}", parent.display())))?;
        }
        std::fs::write(&path, &file.contents).map_err(|e| FixtureError::Io(format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(superstore_csv(), superstore_csv());
        assert_eq!(mc3_messages(), mc3_messages());
        assert_eq!(superstore_orders().len(), SUPERSTORE_ROWS);
    }

    #[test]
    fn incident_anchors() {
        let msgs = mc3_messages();
        let first = |cat: &str| msgs.iter().filter(|m| m.category == cat).map(|m| m.time).min().unwrap();
        assert_eq!(first("fire").format("%H:%M:%S").to_string(), "18:42:10");
        assert_eq!(first("gunfire").format("%H:%M:%S").to_string(), "19:43:05");
        let peak = msgs.iter().max_by_key(|m| m.risk).unwrap();
        assert_eq!((peak.location, peak.risk), ("Dancing Dolphin", 9));
    }

    #[test]
    fn task_counts_follow_mix() {
        let (tasks, _) = eval_tasks_and_script();
        let counts = crate::eval::category_counts(tasks.iter().map(|t| &t.category));
        assert_eq!(counts.values().copied().collect::<Vec<_>>(), vec![17, 20, 31, 11, 21]);
    }
}

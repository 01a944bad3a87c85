//! Note verification.
//!
//! The backend only extracts claims (with the exact quote each one rests
//! on). Every claim is then recomputed from the raw dataset here, so a
//! verdict never depends on model arithmetic.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{NaiveDate, TimeZone, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::backend::{complete_with, BackendError, LlmBackend, PromptRequest, Role, Schema};
use crate::model::{Author, IssueType, Millis, Note, NoteIssue, NoteReview, Reducer};
use crate::sandbox::{format_num, parse_time, Cell, ColumnType, DashboardModel, Table};
use crate::store::Knowledge;

/// Relative tolerance for numeric claims. A claim also passes when it is
/// within half a unit of its own last written decimal place.
pub const NUMERIC_REL_TOL: f64 = 0.005;
/// Half-width of the time window a category assertion is checked against.
pub const CATEGORY_WINDOW_MS: Millis = 5 * 60 * 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimKind {
    NumericValue,
    Extremum,
    TimePoint,
    TimeRange,
    CategoryAssertion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClaimValue {
    Num(f64),
    Text(String),
    Range([String; 2]),
}

impl ClaimValue {
    fn display(&self) -> String {
        match self {
            ClaimValue::Num(x) => format_num(*x),
            ClaimValue::Text(s) => s.clone(),
            ClaimValue::Range([a, b]) => format!("{a} to {b}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Min,
    Max,
}

/// A checkable statement inside a note.
///
/// `scope` restricts the rows (field equals value). For extremum claims
/// with `groupBy`, the claimed value is the winning group key (or its
/// aggregate). Category assertions with `at` are checked against the
/// records within [`CATEGORY_WINDOW_MS`] of that time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Claim {
    pub kind: ClaimKind,
    pub field: String,
    pub claimed_value: ClaimValue,
    /// Character range `[start, end)` of `quote` in the note text.
    #[serde(default)]
    pub span: [usize; 2],
    #[serde(default)]
    pub quote: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub scope: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reducer: Option<Reducer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_by: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<String>,
}

impl Claim {
    /// Two claims with equal signatures talk about the same quantity.
    fn signature(
        &self,
    ) -> (ClaimKind, &str, &BTreeMap<String, String>, Option<Reducer>, Option<&str>, Option<Direction>, Option<&str>)
    {
        (
            self.kind,
            &self.field,
            &self.scope,
            self.reducer,
            self.group_by.as_deref(),
            self.direction,
            self.at.as_deref(),
        )
    }

    /// Places the claim on `text` by locating its quote. Returns `None`
    /// when the quote is empty or not a verbatim substring.
    pub fn anchor(mut self, text: &str) -> Option<Claim> {
        if self.quote.is_empty() {
            return None;
        }
        let byte = text.find(&self.quote)?;
        let start = text[..byte].chars().count();
        self.span = [start, start + self.quote.chars().count()];
        Some(self)
    }

    fn describe(&self) -> String {
        let mut s = match (self.kind, self.reducer) {
            (ClaimKind::NumericValue, r) => format!("{} of {}", r.unwrap_or(Reducer::Sum).as_str(), self.field),
            _ => self.field.clone(),
        };
        if !self.scope.is_empty() {
            let parts: Vec<String> = self.scope.iter().map(|(k, v)| format!("{k} = {v}")).collect();
            s.push_str(&format!(" where {}", parts.join(", ")));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Supported,
    Contradicted { actual: ClaimValue, comment: String },
    Unverifiable(String),
}

/// Claimed time at the precision it was written with.
#[derive(Debug, Clone, Copy, PartialEq)]
enum TimeClaim {
    /// Minutes since midnight.
    OfDay(u32),
    Date(NaiveDate),
    /// Epoch ms truncated to the minute.
    Minute(Millis),
}

fn parse_claim_time(s: &str) -> Option<TimeClaim> {
    let s = s.trim();
    let parts: Vec<&str> = s.split(':').collect();
    if (2..=3).contains(&parts.len()) && parts.iter().all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_digit())) {
        let h: u32 = parts[0].parse().ok()?;
        let m: u32 = parts[1].parse().ok()?;
        return (h < 24 && m < 60).then_some(TimeClaim::OfDay(h * 60 + m));
    }
    let (t, date_only) = parse_time(s)?;
    if date_only {
        Utc.timestamp_millis_opt(t).single().map(|d| TimeClaim::Date(d.date_naive()))
    } else {
        Some(TimeClaim::Minute(t - t.rem_euclid(60_000)))
    }
}

impl TimeClaim {
    fn matches(self, actual: Millis) -> bool {
        let Some(dt) = Utc.timestamp_millis_opt(actual).single() else { return false };
        match self {
            TimeClaim::OfDay(m) => dt.hour() * 60 + dt.minute() == m,
            TimeClaim::Date(d) => dt.date_naive() == d,
            TimeClaim::Minute(t) => actual - actual.rem_euclid(60_000) == t,
        }
    }

    /// Renders `actual` at the same precision as this claim.
    fn render(self, actual: Millis) -> String {
        let Some(dt) = Utc.timestamp_millis_opt(actual).single() else { return actual.to_string() };
        match self {
            TimeClaim::OfDay(_) => dt.format("%H:%M").to_string(),
            TimeClaim::Date(_) => dt.format("%Y-%m-%d").to_string(),
            TimeClaim::Minute(_) => dt.format("%Y-%m-%d %H:%M").to_string(),
        }
    }

    /// Signed distance in ms from `actual` to the claimed time, for
    /// time-of-day claims measured on the same day as `actual`.
    fn distance(self, actual: Millis) -> Option<Millis> {
        match self {
            TimeClaim::OfDay(m) => {
                let day_start = actual - actual.rem_euclid(86_400_000);
                Some(actual - (day_start + m as Millis * 60_000))
            }
            TimeClaim::Minute(t) => Some(actual - t),
            TimeClaim::Date(_) => None,
        }
    }
}

fn decimals(x: f64) -> i32 {
    let s = format!("{x}");
    s.split_once('.').map(|(_, d)| d.len() as i32).unwrap_or(0)
}

pub fn numbers_agree(claimed: f64, actual: f64) -> bool {
    let half_unit = 0.5 * 10f64.powi(-decimals(claimed));
    (claimed - actual).abs() <= (NUMERIC_REL_TOL * actual.abs()).max(half_unit) + 1e-9
}

/// Rounds to two decimals for display in corrections.
pub fn display_num(x: f64) -> String {
    format_num((x * 100.0).round() / 100.0)
}

fn text_eq(a: &str, b: &str) -> bool {
    a.trim().eq_ignore_ascii_case(b.trim())
}

fn reduce(xs: &[f64], reducer: Reducer) -> Option<f64> {
    match reducer {
        Reducer::Count => Some(xs.len() as f64),
        Reducer::Sum => Some(xs.iter().sum()),
        Reducer::Mean => (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64),
        Reducer::Min => xs.iter().copied().reduce(f64::min),
        Reducer::Max => xs.iter().copied().reduce(f64::max),
    }
}

fn num_cell(table: &Table, field: &str, row: usize) -> Option<f64> {
    match table.column(field)?.cell(row) {
        Cell::Num(x) => Some(x),
        Cell::Time(t) => Some(t as f64),
        Cell::Text(_) => None,
    }
}

/// Checks one claim against the full dataset. Ignores dashboard filters
/// and selections, so the verdict does not depend on interaction state.
pub fn check_claim(claim: &Claim, model: &DashboardModel) -> Verdict {
    let Some(table) = model.tables.values().find(|t| t.has(&claim.field)) else {
        return Verdict::Unverifiable(format!("unknown field {}", claim.field));
    };
    for f in claim.scope.keys().chain(claim.group_by.iter()) {
        if !table.has(f) {
            return Verdict::Unverifiable(format!("unknown field {f}"));
        }
    }
    let rows: Vec<usize> = (0..table.rows)
        .filter(|&r| claim.scope.iter().all(|(f, v)| table.column(f).is_some_and(|c| text_eq(&c.key(r), v))))
        .collect();
    if rows.is_empty() {
        return Verdict::Unverifiable(format!("no records match {}", claim.describe()));
    }
    let kind = table.column(&claim.field).map(|c| c.kind());
    match claim.kind {
        ClaimKind::NumericValue => check_numeric(claim, table, &rows),
        ClaimKind::Extremum if claim.group_by.is_some() => check_group_extremum(claim, table, &rows),
        ClaimKind::Extremum if kind == Some(ColumnType::Timestamp) => {
            check_time_point(claim, table, &rows, Direction::Max)
        }
        ClaimKind::Extremum => check_numeric_extremum(claim, table, &rows),
        ClaimKind::TimePoint => check_time_point(claim, table, &rows, Direction::Min),
        ClaimKind::TimeRange => check_time_range(claim, table, &rows),
        ClaimKind::CategoryAssertion => check_category(claim, table, &rows),
    }
}

fn contradicted(actual: ClaimValue, comment: String) -> Verdict {
    Verdict::Contradicted { actual, comment }
}

fn check_numeric(claim: &Claim, table: &Table, rows: &[usize]) -> Verdict {
    let ClaimValue::Num(claimed) = claim.claimed_value else {
        return Verdict::Unverifiable("numeric claim without a number".into());
    };
    let reducer = claim.reducer.unwrap_or(Reducer::Sum);
    let xs: Vec<f64> = rows.iter().filter_map(|&r| num_cell(table, &claim.field, r)).collect();
    if xs.len() != rows.len() && reducer != Reducer::Count {
        return Verdict::Unverifiable(format!("{} is not numeric", claim.field));
    }
    let actual = if reducer == Reducer::Count { Some(rows.len() as f64) } else { reduce(&xs, reducer) };
    let Some(actual) = actual else { return Verdict::Unverifiable("no values".into()) };
    if numbers_agree(claimed, actual) {
        Verdict::Supported
    } else {
        let shown = display_num(actual);
        contradicted(
            ClaimValue::Num(actual),
            format!("The {} comes to {shown} in the data, not {}.", claim.describe(), format_num(claimed)),
        )
    }
}

fn check_numeric_extremum(claim: &Claim, table: &Table, rows: &[usize]) -> Verdict {
    let ClaimValue::Num(claimed) = claim.claimed_value else {
        return Verdict::Unverifiable("extremum claim without a number".into());
    };
    let dir = claim.direction.unwrap_or(Direction::Max);
    let xs: Vec<f64> = rows.iter().filter_map(|&r| num_cell(table, &claim.field, r)).collect();
    let reducer = if dir == Direction::Max { Reducer::Max } else { Reducer::Min };
    let Some(actual) = reduce(&xs, reducer) else { return Verdict::Unverifiable("no values".into()) };
    if numbers_agree(claimed, actual) {
        Verdict::Supported
    } else {
        contradicted(
            ClaimValue::Num(actual),
            format!("The {} {} is {}, not {}.", word(dir), claim.describe(), display_num(actual), format_num(claimed)),
        )
    }
}

fn word(d: Direction) -> &'static str {
    match d {
        Direction::Min => "lowest",
        Direction::Max => "highest",
    }
}

fn check_group_extremum(claim: &Claim, table: &Table, rows: &[usize]) -> Verdict {
    let group_by = claim.group_by.as_deref().unwrap_or_default();
    let reducer = claim.reducer.unwrap_or(Reducer::Sum);
    let dir = claim.direction.unwrap_or(Direction::Max);
    let Some(gcol) = table.column(group_by) else { return Verdict::Unverifiable(format!("unknown field {group_by}")) };
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for &r in rows {
        let Some(x) = num_cell(table, &claim.field, r) else {
            return Verdict::Unverifiable(format!("{} is not numeric", claim.field));
        };
        groups.entry(gcol.key(r)).or_default().push(x);
    }
    let mut best: Option<(String, f64)> = None;
    for (k, xs) in &groups {
        let Some(v) = reduce(xs, reducer) else { continue };
        let better = match &best {
            None => true,
            Some((_, b)) => (dir == Direction::Max && v > *b) || (dir == Direction::Min && v < *b),
        };
        if better {
            best = Some((k.clone(), v));
        }
    }
    let Some((key, value)) = best else { return Verdict::Unverifiable("no groups".into()) };
    let ok = match &claim.claimed_value {
        ClaimValue::Text(t) => text_eq(t, &key),
        ClaimValue::Num(x) => numbers_agree(*x, value),
        ClaimValue::Range(_) => return Verdict::Unverifiable("range given for an extremum".into()),
    };
    if ok {
        return Verdict::Supported;
    }
    let actual = match claim.claimed_value {
        ClaimValue::Num(_) => ClaimValue::Num(value),
        _ => ClaimValue::Text(key.clone()),
    };
    contradicted(
        actual,
        format!(
            "The {group_by} with the {} {} of {} is {key} ({}), not {}.",
            word(dir),
            reducer.as_str(),
            claim.describe(),
            display_num(value),
            claim.claimed_value.display()
        ),
    )
}

fn times(table: &Table, field: &str, rows: &[usize]) -> Option<Vec<Millis>> {
    rows.iter()
        .map(|&r| match table.column(field)?.cell(r) {
            Cell::Time(t) => Some(t),
            _ => None,
        })
        .collect()
}

fn check_time_point(claim: &Claim, table: &Table, rows: &[usize], default_dir: Direction) -> Verdict {
    let ClaimValue::Text(text) = &claim.claimed_value else {
        return Verdict::Unverifiable("time claim without a time".into());
    };
    let Some(tc) = parse_claim_time(text) else { return Verdict::Unverifiable(format!("cannot read time {text:?}")) };
    let Some(ts) = times(table, &claim.field, rows) else {
        return Verdict::Unverifiable(format!("{} is not a timestamp", claim.field));
    };
    let dir = claim.direction.unwrap_or(default_dir);
    let actual = match dir {
        Direction::Min => ts.iter().copied().min(),
        Direction::Max => ts.iter().copied().max(),
    };
    let Some(actual) = actual else { return Verdict::Unverifiable("no values".into()) };
    if tc.matches(actual) {
        return Verdict::Supported;
    }
    let shown = tc.render(actual);
    let which = if dir == Direction::Min { "earliest" } else { "latest" };
    let comment = format!("The {which} {} is {shown}, not {text}.", claim.describe());
    contradicted(ClaimValue::Text(shown), comment)
}

fn check_time_range(claim: &Claim, table: &Table, rows: &[usize]) -> Verdict {
    let ClaimValue::Range([a, b]) = &claim.claimed_value else {
        return Verdict::Unverifiable("time range claim without two bounds".into());
    };
    let (Some(ta), Some(tb)) = (parse_claim_time(a), parse_claim_time(b)) else {
        return Verdict::Unverifiable("cannot read time range".into());
    };
    let Some(ts) = times(table, &claim.field, rows) else {
        return Verdict::Unverifiable(format!("{} is not a timestamp", claim.field));
    };
    let (lo, hi) = (ts.iter().copied().min().unwrap_or(0), ts.iter().copied().max().unwrap_or(0));
    if ta.matches(lo) && tb.matches(hi) {
        return Verdict::Supported;
    }
    let (sa, sb) = (ta.render(lo), tb.render(hi));
    let comment = format!("The records for {} run from {sa} to {sb}, not {a} to {b}.", claim.describe());
    contradicted(ClaimValue::Range([sa, sb]), comment)
}

fn check_category(claim: &Claim, table: &Table, rows: &[usize]) -> Verdict {
    let ClaimValue::Text(claimed) = &claim.claimed_value else {
        return Verdict::Unverifiable("category claim without a category".into());
    };
    let Some(col) = table.column(&claim.field) else { return Verdict::Unverifiable("unknown field".into()) };
    if col.kind() != ColumnType::Categorical {
        return Verdict::Unverifiable(format!("{} is not categorical", claim.field));
    }
    // rows near the anchor time, with their distance to it
    let mut near: Vec<(usize, Millis)> = Vec::new();
    let mut anchor: Option<TimeClaim> = None;
    match &claim.at {
        None => near.extend(rows.iter().map(|&r| (r, 0))),
        Some(at) => {
            let Some(tc) = parse_claim_time(at) else {
                return Verdict::Unverifiable(format!("cannot read time {at:?}"));
            };
            let Some(tcol) = table.columns.iter().find(|c| c.kind() == ColumnType::Timestamp) else {
                return Verdict::Unverifiable("no time column".into());
            };
            anchor = Some(tc);
            for &r in rows {
                let Cell::Time(t) = tcol.cell(r) else { continue };
                if let Some(d) = tc.distance(t) {
                    if d.abs() <= CATEGORY_WINDOW_MS {
                        near.push((r, d));
                    }
                }
            }
        }
    }
    if near.is_empty() {
        return Verdict::Unverifiable("no records near that time".into());
    }
    let mut counts: BTreeMap<String, (usize, Millis)> = BTreeMap::new();
    for &(r, d) in &near {
        let e = counts.entry(col.key(r)).or_insert((0, Millis::MAX));
        e.0 += 1;
        e.1 = e.1.min(d.abs());
    }
    // most frequent category; ties go to the one recorded closest to the anchor
    let (mode, _) = counts
        .iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .map(|(k, v)| (k.clone(), *v))
        .unwrap_or_default();
    if text_eq(&mode, claimed) {
        return Verdict::Supported;
    }
    let comment = match (anchor, table.columns.iter().find(|c| c.kind() == ColumnType::Timestamp)) {
        (Some(tc), Some(tcol)) => {
            let first = near
                .iter()
                .filter(|(r, _)| col.key(*r) == mode)
                .filter_map(|(r, _)| match tcol.cell(*r) {
                    Cell::Time(t) => Some(t),
                    _ => None,
                })
                .min()
                .unwrap_or(0);
            format!(
                "Records around {} describe {mode}, first logged at {}, not {claimed}.",
                claim.at.as_deref().unwrap_or_default(),
                tc.render(first)
            )
        }
        _ => format!("The records for {} point to {mode}, not {claimed}.", claim.describe()),
    };
    contradicted(ClaimValue::Text(mode), comment)
}

fn values_agree(a: &ClaimValue, b: &ClaimValue) -> bool {
    match (a, b) {
        (ClaimValue::Num(x), ClaimValue::Num(y)) => numbers_agree(*x, *y) || numbers_agree(*y, *x),
        (ClaimValue::Text(x), ClaimValue::Text(y)) => match (parse_claim_time(x), parse_claim_time(y)) {
            (Some(p), Some(q)) => p == q,
            _ => text_eq(x, y),
        },
        (ClaimValue::Range([a1, a2]), ClaimValue::Range([b1, b2])) => text_eq(a1, b1) && text_eq(a2, b2),
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
struct ClaimListResponse {
    claims: Vec<Claim>,
}

pub fn extraction_request(note: &Note, knowledge: &Knowledge, model: &DashboardModel) -> PromptRequest {
    let system = format!(
        "You read an analyst's note and list the factual claims in it that can be checked against the data.\n\
         Task: {}\nData and views:\n{}\
         Quote each claim exactly as written. Opinions and plans are not claims.",
        knowledge.task_statement,
        model.describe()
    );
    let user = format!("note {}:\n{}", note.note_id, note.text);
    PromptRequest::new(Role::Verifier, Schema::ClaimList, system, user)
}

/// Asks the backend for the note's claims and anchors each on the text.
/// Claims whose quote does not occur verbatim are discarded.
pub fn extract_claims(
    note: &Note,
    knowledge: &Knowledge,
    model: &DashboardModel,
    backend: &dyn LlmBackend,
) -> Result<Vec<Claim>, BackendError> {
    if note.text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let req = extraction_request(note, knowledge, model);
    let resp: ClaimListResponse = complete_with(backend, &req, |r: &ClaimListResponse| {
        if r.claims.iter().any(|c| c.quote.is_empty()) {
            Err("every claim needs a quote".into())
        } else {
            Ok(())
        }
    })?;
    Ok(resp
        .claims
        .into_iter()
        .filter_map(|c| {
            let quote = c.quote.clone();
            let anchored = c.anchor(&note.text);
            if anchored.is_none() {
                tracing::debug!(note = %note.note_id, %quote, "claim quote not found in note");
            }
            anchored
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReviewOutcome {
    pub review: NoteReview,
    pub claims: Vec<Claim>,
    pub verdicts: Vec<Verdict>,
}

/// Reviews a note whose claims are already known. `prior` holds the
/// session's earlier notes; `reminded` collects task slots already
/// reported as missing so each is raised once per session.
pub fn review_claims(
    note: &Note,
    claims: Vec<Claim>,
    prior: &[Note],
    knowledge: &Knowledge,
    model: &DashboardModel,
    reminded: &mut BTreeSet<String>,
) -> ReviewOutcome {
    let mut issues = Vec::new();
    let verdicts: Vec<Verdict> = claims.iter().map(|c| check_claim(c, model)).collect();
    let earlier: Vec<&Note> = prior.iter().filter(|n| n.author == Author::User && n.note_id != note.note_id).collect();

    for (claim, verdict) in claims.iter().zip(&verdicts) {
        if let Verdict::Contradicted { actual, comment } = verdict {
            let corrected_answer = match actual {
                ClaimValue::Num(x) => display_num(*x),
                other => other.display(),
            };
            issues.push(NoteIssue {
                issue_type: IssueType::FactualError,
                comment: comment.clone(),
                corrected_answer,
                keywords: vec![claim.quote.clone()],
            });
            continue;
        }
        let conflict = earlier.iter().find_map(|n| {
            n.claims
                .iter()
                .flatten()
                .find(|d| d.signature() == claim.signature() && !values_agree(&d.claimed_value, &claim.claimed_value))
                .map(|d| (n, d))
        });
        if let Some((other, d)) = conflict {
            let (comment, corrected_answer) = match verdict {
                Verdict::Supported => (
                    format!(
                        "This disagrees with your earlier note {}, which says \"{}\". The data supports this note, so the earlier one needs revising.",
                        other.note_id, d.quote
                    ),
                    claim.claimed_value.display(),
                ),
                _ => (
                    format!("This disagrees with your earlier note {}, which says \"{}\".", other.note_id, d.quote),
                    d.claimed_value.display(),
                ),
            };
            issues.push(NoteIssue {
                issue_type: IssueType::InternalConflict,
                comment,
                corrected_answer,
                keywords: vec![claim.quote.clone()],
            });
        }
    }

    let user_notes = earlier.len() + usize::from(note.author == Author::User);
    if note.author == Author::User && user_notes >= knowledge.omission_min_notes {
        for slot in &knowledge.task_slots {
            if reminded.contains(&slot.name) {
                continue;
            }
            let covered = earlier
                .iter()
                .flat_map(|n| n.claims.iter().flatten())
                .chain(claims.iter())
                .any(|c| slot.fields.contains(&c.field) || c.scope.keys().any(|k| slot.fields.contains(k)));
            if !covered {
                reminded.insert(slot.name.clone());
                issues.push(NoteIssue {
                    issue_type: IssueType::TaskOmission,
                    comment: slot.prompt.clone(),
                    corrected_answer: format!("Add the {} to your notes.", slot.name),
                    keywords: Vec::new(),
                });
            }
        }
    }

    for issue in &mut issues {
        issue.keywords.retain(|k| !k.is_empty() && note.text.contains(k.as_str()));
    }
    let clean = issues.is_empty();
    ReviewOutcome { review: NoteReview { note_id: note.note_id.clone(), issues, clean }, claims, verdicts }
}

/// Extracts (unless the note already carries claims) and reviews a note.
/// Returns `None` when extraction fails; notes are never blocked on review.
pub fn review_note(
    note: &Note,
    prior: &[Note],
    knowledge: &Knowledge,
    model: &DashboardModel,
    backend: &dyn LlmBackend,
    reminded: &mut BTreeSet<String>,
) -> Option<ReviewOutcome> {
    let claims = match &note.claims {
        Some(cs) => cs.iter().cloned().filter_map(|c| c.anchor(&note.text)).collect(),
        None => match extract_claims(note, knowledge, model, backend) {
            Ok(cs) => cs,
            Err(e) => {
                tracing::warn!(note = %note.note_id, error = %e, "claim extraction failed, review skipped");
                return None;
            }
        },
    };
    Some(review_claims(note, claims, prior, knowledge, model, reminded))
}

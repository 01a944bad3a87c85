//! Per-category aggregation and TSV / JSON rendering.

use serde::{Deserialize, Serialize};

use super::{Category, EvalError, EvalRun, Scorer};

/// Mean and population standard deviation. `None` for an empty slice.
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportRow {
    /// Category name, or `Total`.
    pub category: String,
    pub count: usize,
    pub wall_time_mean: f64,
    pub wall_time_std: f64,
    pub steps_mean: f64,
    pub steps_std: f64,
    /// Scored runs in this row; score means cover only these.
    pub scored: usize,
    pub task_completion: Option<f64>,
    pub data_accuracy: Option<f64>,
    pub path_efficiency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub scorer: Option<Scorer>,
    /// Always `population`.
    pub std: String,
    pub flagged: Vec<String>,
    pub rows: Vec<ReportRow>,
}

fn row(name: &str, runs: &[&EvalRun]) -> ReportRow {
    let walls: Vec<f64> = runs.iter().map(|r| r.wall_time).collect();
    let steps: Vec<f64> = runs.iter().map(|r| r.step_count as f64).collect();
    let scores: Vec<_> = runs.iter().filter_map(|r| r.scores.as_ref()).collect();
    let mean_of =
        |f: &dyn Fn(&super::Scores) -> f64| mean_std(&scores.iter().map(|s| f(s)).collect::<Vec<_>>()).map(|(m, _)| m);
    let (wall_time_mean, wall_time_std) = mean_std(&walls).unwrap_or_default();
    let (steps_mean, steps_std) = mean_std(&steps).unwrap_or_default();
    ReportRow {
        category: name.to_string(),
        count: runs.len(),
        wall_time_mean,
        wall_time_std,
        steps_mean,
        steps_std,
        scored: scores.len(),
        task_completion: mean_of(&|s| s.task_completion),
        data_accuracy: mean_of(&|s| s.data_accuracy),
        path_efficiency: mean_of(&|s| s.path_efficiency),
    }
}

/// One row per category present, in fixed category order, then `Total`.
pub fn aggregate(runs: &[EvalRun]) -> Result<Report, EvalError> {
    if runs.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut rows = Vec::new();
    for c in Category::ALL {
        let these: Vec<&EvalRun> = runs.iter().filter(|r| r.category == c).collect();
        if !these.is_empty() {
            rows.push(row(c.as_str(), &these));
        }
    }
    rows.push(row("Total", &runs.iter().collect::<Vec<_>>()));
    let scorer = runs.iter().find_map(|r| r.scorer);
    let flagged = runs.iter().filter(|r| r.flagged).map(|r| r.task_id.clone()).collect();
    Ok(Report { scorer, std: "population".into(), flagged, rows })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into())
}

impl Report {
    pub fn total(&self) -> &ReportRow {
        self.rows.last().expect("report always has a Total row")
    }

    pub fn to_tsv(&self) -> String {
        let scorer = match self.scorer {
            Some(Scorer::Rubric) => "rubric (mechanical proxy scores)",
            Some(Scorer::LlmJudge) => "llm_judge",
            Some(Scorer::Human) => "human",
            None => "none",
        };
        let mut out = format!("# scorer: {scorer}; std: population\n");
        out.push_str("category\tn\twall_mean_s\twall_std_s\tsteps_mean\tsteps_std\tscored\ttask_completion\tdata_accuracy\tpath_efficiency\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{:.2}\t{:.2}\t{:.2}\t{:.2}\t{}\t{}\t{}\t{}\n",
                r.category,
                r.count,
                r.wall_time_mean,
                r.wall_time_std,
                r.steps_mean,
                r.steps_std,
                r.scored,
                opt(r.task_completion),
                opt(r.data_accuracy),
                opt(r.path_efficiency)
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap();
        assert_eq!(m, 5.0);
        assert_eq!(s, 2.0);
        assert_eq!(mean_std(&[3.0]), Some((3.0, 0.0)));
        assert!(mean_std(&[]).is_none());
    }

    #[test]
    fn empty_batch_rejected() {
        assert_eq!(aggregate(&[]), Err(EvalError::Empty));
    }
}

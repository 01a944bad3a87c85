//! Runs the bundled 100-task batch with the scripted agent and prints the
//! rubric report.

use std::sync::Arc;

use proactive_agent::backend::ScriptedBackend;
use proactive_agent::eval::{aggregate, load_tasks, run_batch, score_run, BatchConfig, ScoreMode};
use proactive_agent::fixtures;

fn main() {
    let dir = fixtures::default_dir().join("eval");
    let tasks = load_tasks(&dir.join("tasks.json")).unwrap();
    let backend = ScriptedBackend::load(&dir.join("script.json")).unwrap();
    let model = Arc::new(fixtures::superstore_model());
    let knowledge = fixtures::superstore_knowledge();

    let mut runs =
        run_batch(&tasks, &BatchConfig { workers: 4, ..BatchConfig::default() }, &model, &knowledge, &backend);
    for (r, t) in runs.iter_mut().zip(&tasks) {
        score_run(r, t, ScoreMode::Rubric, &model);
    }
    for r in runs.iter().filter(|r| r.scores.as_ref().is_some_and(|s| s.data_accuracy < 5.0)).take(5) {
        println!("{} {:?}: data accuracy {:.1}", r.task_id, r.category, r.scores.as_ref().unwrap().data_accuracy);
    }
    println!();
    print!("{}", aggregate(&runs).unwrap().to_tsv());
}

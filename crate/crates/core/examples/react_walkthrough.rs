//! A three-step analysis loop against a scripted reasoner.

use std::sync::Arc;

use proactive_agent::backend::{Role, ScriptEntry, ScriptedBackend};
use proactive_agent::executor::run_loop;
use proactive_agent::fixtures;
use proactive_agent::model::{AnalyticIntent, Plan, StepAction};
use proactive_agent::sandbox::Dashboard;
use serde_json::json;

fn main() {
    let step = |n: u32, thought: &str, action: serde_json::Value| {
        ScriptEntry::new(
            Role::Reasoner,
            &[&format!("next step: {n} of")],
            json!({"thought": thought, "action": action}),
        )
    };
    let backend = ScriptedBackend::from_entries(
        true,
        vec![
            step(
                1,
                "Compare sales across regions first.",
                json!({"operation": {"tool": "readData", "view": "map", "params": {"measure": "sales", "groupBy": "region", "reducer": "sum"}}}),
            ),
            step(
                2,
                "Narrow to the West.",
                json!({"operation": {"tool": "filter", "view": "filters", "params": {"field": "region", "values": ["West"]}}}),
            ),
            step(
                3,
                "Which categories sell there?",
                json!({"operation": {"tool": "readData", "view": "categories", "params": {"measure": "sales", "groupBy": "category", "reducer": "sum"}}}),
            ),
            step(
                4,
                "Enough to write it up.",
                json!({"finish": {"title": "West region mix", "finding": "The West leads on sales; its mix is shown by category."}}),
            ),
        ],
    );
    let plan = Plan {
        goal: "compare regional sales and the product mix in the leading region".into(),
        target_views: vec!["map".into(), "categories".into()],
        hypothesized_intent: AnalyticIntent::Compare,
        max_steps: 10,
    };
    let knowledge = fixtures::superstore_knowledge();
    let mut dash = Dashboard::new(Arc::new(fixtures::superstore_model()), "example");
    let (trace, notes) = run_loop("walkthrough", &plan, &knowledge, &backend, &mut dash, &mut || "n1".into(), 0);

    let mut feedbacks = trace.feedbacks.iter();
    for s in &trace.steps {
        println!("step {}: {}", s.index, s.thought);
        match &s.action {
            StepAction::Operation(op) => {
                let fb = feedbacks.next().unwrap();
                println!("  action   {}", op.describe());
                println!("  feedback {}", fb.error_detail.as_deref().unwrap_or(&fb.state_delta));
            }
            StepAction::Finish { title, finding } => println!("  finish   {title}: {finding}"),
        }
    }
    println!("\nterminal {:?}, trace check {:?}", trace.terminal, trace.check(plan.max_steps));
    for n in notes {
        println!("note {}: {}", n.note_id, n.text);
    }
}

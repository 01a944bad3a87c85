//! Drives the sandboxed superstore dashboard with the three tools.

use std::sync::Arc;

use proactive_agent::fixtures;
use proactive_agent::model::{Operation, Reducer};
use proactive_agent::sandbox::{Dashboard, ToolTarget};

fn main() {
    let model = Arc::new(fixtures::superstore_model());
    let mut dash = Dashboard::new(model, "example");
    println!("{}", dash.describe());

    let ops = [
        Operation::read("map", "sales", Some("region"), Reducer::Sum),
        Operation::filter_values("filters", "segment", &["Corporate"]),
        Operation::filter_range("filters", "discount", 0.0, 0.2),
        Operation::read("categories", "profit", Some("category"), Reducer::Mean),
        Operation::select("map", "CA"),
        Operation::read("trend", "sales", Some("month"), Reducer::Sum),
        // rejected: ranges only apply to numeric fields
        Operation::filter_range("filters", "region", 0.0, 1.0),
    ];
    for op in &ops {
        let fb = dash.apply_tool(op);
        println!("\n> {}", op.describe());
        match &fb.error_detail {
            Some(err) => println!("  error: {err}"),
            None => {
                println!("  {}", fb.state_delta);
                if !fb.payload.is_null() {
                    println!("  {}", fb.payload);
                }
            }
        }
    }
}

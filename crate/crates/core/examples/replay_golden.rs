//! Replays a recorded client transcript and compares the pushed frames
//! with the recorded golden output.
//!
//! cargo run --example replay_golden -- [fire-summary|tip-expiry]

use std::sync::Arc;

use proactive_agent::backend::ScriptedBackend;
use proactive_agent::fixtures;
use proactive_agent::gateway::{replay, EngineConfig};

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "fire-summary".into());
    let dir = fixtures::default_dir();
    let scen = dir.join("scenarios");
    let backend = Arc::new(ScriptedBackend::load(&scen.join(format!("{name}.script.json"))).unwrap());
    let input = std::fs::read_to_string(scen.join(format!("{name}.in.jsonl"))).unwrap();
    let golden = std::fs::read_to_string(scen.join(format!("{name}.golden.jsonl"))).unwrap();

    let out = replay(fixtures::catalog_from_dir(&dir).unwrap(), backend, EngineConfig::default(), &input).unwrap();
    for f in &out.frames {
        println!("{:>6}  {}", f.at, f.message.kind());
    }
    let got = out.transcript();
    if got == golden {
        println!("\n{} frames, identical to golden", out.frames.len());
    } else {
        for (i, (a, b)) in got.lines().zip(golden.lines()).enumerate().filter(|(_, (a, b))| a != b) {
            println!("line {}:\n  got  {a}\n  want {b}", i + 1);
        }
        std::process::exit(1);
    }
}

//! Runs the two behaviour detectors over a short hand-written session.

use proactive_agent::model::{ActionType, InteractionEvent, ProactivityConfig};
use proactive_agent::monitor::{compute_think_times, detect_prolonged_pause, detect_repetition, RepetitionParams};

fn main() {
    let clicks = [
        (ActionType::Click, "map", "CA", 1_000),
        (ActionType::Click, "map", "CA", 1_700),
        (ActionType::Click, "map", "CA", 2_300),
        (ActionType::Hover, "categories", "Technology", 3_100),
        (ActionType::Click, "trend", "2021-03", 9_800),
        (ActionType::Click, "categories", "Furniture", 10_400),
    ];
    let raw: Vec<InteractionEvent> = clicks
        .iter()
        .enumerate()
        .map(|(i, (a, view, el, t))| {
            let mut e = InteractionEvent::new(*a, *view, *el, *t);
            e.event_id = format!("e{}", i + 1);
            e
        })
        .collect();
    let window = compute_think_times(&raw).expect("clicks are increasing");

    let cfg = ProactivityConfig::default();
    for e in &window {
        println!(
            "{:>4} {:>6} ms  {:?} {}/{}  think {:?}",
            e.event_id, e.click_time, e.action_type, e.view, e.element, e.think_time
        );
    }
    println!("\nthreshold {} ms", cfg.think_time_threshold);
    for p in detect_prolonged_pause(&window, &cfg) {
        println!("pause       before {} ({} ms)", p.event_id, p.observed_think_time);
    }
    for r in detect_repetition(&window, RepetitionParams::from(&cfg)) {
        println!("repetition  {:?} over {:?} in {} ms", r.pattern_kind, r.event_ids, r.span);
    }
}

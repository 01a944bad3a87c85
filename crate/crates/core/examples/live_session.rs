//! Drives an engine session by hand: open, interact, change the config,
//! let a tip time out.

use std::sync::Arc;

use proactive_agent::backend::ScriptedBackend;
use proactive_agent::fixtures;
use proactive_agent::gateway::Engine;
use proactive_agent::model::{ActionType, ConfigUpdate, InteractionEvent};
use proactive_agent::protocol::{encode, Frame, Message};

fn main() {
    let script = fixtures::default_dir().join("scenarios/tip-expiry.script.json");
    let engine = Engine::new(fixtures::catalog(), Arc::new(ScriptedBackend::load(&script).unwrap()));
    let show = |frames: Vec<Frame>| frames.iter().for_each(|f| println!("<- {}", encode(f)));

    show(
        engine
            .handle(Frame::new("", 0, Message::Open { profile: "superstore".into(), dataset: "superstore".into() }), 0),
    );
    for t in [1000, 1600, 2200] {
        let e = InteractionEvent::new(ActionType::Click, "map", "CA", t);
        show(engine.handle(Frame::new("s1", t, Message::Event(e)), t));
    }
    let upd = ConfigUpdate { think_time_threshold: Some(5000), ..ConfigUpdate::default() };
    show(engine.handle(Frame::new("s1", 2500, Message::Config(upd)), 2500));

    // nothing touches the tip, so the next timer fires its expiry
    while let Some(t) = engine.next_deadline() {
        if t > 10_000 {
            break;
        }
        show(engine.tick(t));
    }
}

mod common;

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::Arc;
use std::time::Duration;

use proactive_agent::client::{apply_correction, slider_update, ClientMirror, SLIDER_LEVELS, TOAST_MS};
use proactive_agent::clock::FakeClock;
use proactive_agent::fixtures;
use proactive_agent::gateway::{replay_lines, Engine, Server};
use proactive_agent::protocol::{decode_str, encode, encode_line, Frame, Message};

use common::{fixtures_dir, read_fixture, scripted};

fn fire_engine() -> Engine {
    Engine::new(fixtures::catalog_from_dir(&fixtures_dir()).unwrap(), scripted("scenarios/fire-summary.script.json"))
}

#[test]
fn committed_fixtures_match_the_generator() {
    for file in fixtures::generate().unwrap() {
        assert_eq!(read_fixture(&file.path), file.contents, "{} is stale; run `proactive gen-fixtures`", file.path);
    }
}

#[test]
fn golden_frames_reencode_identically() {
    for name in ["fire-summary", "tip-expiry"] {
        for line in read_fixture(&format!("scenarios/{name}.golden.jsonl")).lines() {
            let frame = decode_str(line).unwrap();
            assert!(Message::is_outbound_kind(frame.message.kind()));
            assert_eq!(encode(&frame), line);
        }
    }
}

#[test]
fn mirror_follows_agent_driven_state() {
    let engine = fire_engine();
    let out = replay_lines(&engine, &read_fixture("scenarios/fire-summary.in.jsonl")).unwrap();
    let model = fixtures::catalog_from_dir(&fixtures_dir()).unwrap().dataset("mc3").unwrap();
    let mut mirror = ClientMirror::new(model);
    for f in &out.frames {
        mirror.observe(f, f.at);
    }
    let server_state = engine.with_session("s1", |s| s.dashboard().state().clone()).unwrap();
    assert_eq!(mirror.state(), &server_state);
    assert_eq!(mirror.state().selections.get("hexmap").map(String::as_str), Some("Dancing Dolphin"));
    assert_eq!(mirror.redraws(), 1);
}

#[test]
fn correction_rewrites_the_fire_note() {
    let golden = read_fixture("scenarios/fire-summary.golden.jsonl");
    let review = golden
        .lines()
        .find_map(|l| match decode_str(l).unwrap().message {
            Message::Review(r) => Some(r),
            _ => None,
        })
        .unwrap();
    let fixed = apply_correction("The fire broke out near Dancing Dolphin at 18:45.", &review.issues[0]);
    assert_eq!(fixed, "The fire broke out near Dancing Dolphin at 18:42.");
}

#[test]
fn slider_positions_are_acknowledged_with_effective_config() {
    let engine = fire_engine();
    engine.handle(Frame::new("", 0, Message::Open { profile: "mc3".into(), dataset: "mc3".into() }), 0);
    for (level, (threshold, cooldown)) in SLIDER_LEVELS.iter().enumerate() {
        let out = engine.handle(Frame::new("s1", 100, Message::Config(slider_update(level))), 100);
        match &out[..] {
            [Frame { message: Message::Ack { of, config: Some(cfg) }, .. }] => {
                assert_eq!(of, "config");
                assert_eq!((cfg.think_time_threshold, cfg.suggestion_cooldown), (*threshold, *cooldown));
            }
            other => panic!("level {level}: {other:?}"),
        }
    }
}

#[test]
fn toast_closes_with_the_engine_expiry() {
    let out = read_fixture("scenarios/tip-expiry.golden.jsonl");
    let frames: Vec<Frame> = out.lines().map(|l| decode_str(l).unwrap()).collect();
    let model = Arc::new(fixtures::superstore_model());
    let mut mirror = ClientMirror::new(model);
    let shown = frames.iter().find(|f| f.message.kind() == "suggestion").unwrap().at;
    for f in frames.iter().filter(|f| f.at <= shown) {
        mirror.observe(f, f.at);
    }
    assert_eq!(mirror.visible_toasts(shown).len(), 1);
    assert_eq!(mirror.visible_toasts(shown + TOAST_MS - 1).len(), 1);
    assert!(mirror.visible_toasts(shown + TOAST_MS).is_empty());
    for f in frames.iter().filter(|f| f.at > shown) {
        mirror.observe(f, shown);
    }
    assert!(mirror.visible_toasts(shown).is_empty(), "expiry frame removes the toast");
}

fn read_until(reader: &mut BufReader<TcpStream>, kind: &str) -> Vec<Frame> {
    let mut seen = Vec::new();
    loop {
        let mut line = String::new();
        assert!(reader.read_line(&mut line).unwrap() > 0, "connection closed before {kind}");
        let f = decode_str(line.trim_end()).unwrap();
        let done = f.message.kind() == kind;
        seen.push(f);
        if done {
            return seen;
        }
    }
}

#[test]
fn tcp_session_roundtrip() {
    let clock = FakeClock::new(0);
    let server = Server::bind("127.0.0.1:0", Arc::new(fire_engine()), Arc::new(clock.clone())).unwrap();
    let addr = server.local_addr().unwrap();
    server.spawn();

    let stream = TcpStream::connect(addr).unwrap();
    stream.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
    let mut writer = stream.try_clone().unwrap();
    let mut reader = BufReader::new(stream);

    let input = read_fixture("scenarios/fire-summary.in.jsonl");
    let lines: Vec<&str> = input.lines().collect();
    let mut send = |line: &str| {
        let f = decode_str(line).unwrap();
        clock.set(f.at);
        writer.write_all(&encode_line(&f)).unwrap();
    };
    send(lines[0]);
    let opened = read_until(&mut reader, "ack");
    assert_eq!(opened.last().unwrap().session, "s1");
    for l in &lines[1..5] {
        send(l);
    }
    let frames = read_until(&mut reader, "suggestion");
    assert!(frames.iter().any(|f| f.message.kind() == "help_needed"));

    // another connection cannot drive someone else's session
    let other = TcpStream::connect(addr).unwrap();
    other.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
    let mut ow = other.try_clone().unwrap();
    ow.write_all(&encode_line(&Frame::new("s1", 8000, Message::Abort))).unwrap();
    let mut or = BufReader::new(other);
    match &read_until(&mut or, "error").last().unwrap().message {
        Message::Error { code, .. } => assert_eq!(code, "not_owner"),
        _ => unreachable!(),
    }
    ow.write_all(b"{not json\n").unwrap();
    assert_eq!(read_until(&mut or, "error").len(), 1);
}

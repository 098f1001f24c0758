use std::net::{TcpListener, TcpStream};
use std::thread;

use serde_json::Value;
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{connect, Message, WebSocket};

use depthtube::camera::Camera;
use depthtube::geometry::generate_synthetic_bundle;
use depthtube::runtime::serve::serve_on;
use depthtube::runtime::{Engine, EngineConfig};
use depthtube::stylemap::MappingSpec;

type Client = WebSocket<MaybeTlsStream<TcpStream>>;

/// Starts a server for `sessions` clients and returns its address.
fn start(tubes: usize, sessions: usize) -> (String, thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = format!("ws://{}", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let ds = generate_synthetic_bundle(tubes, 10, 21).unwrap();
        let b = ds.bounds();
        let cam = Camera::framing(b.center(), b.diagonal() * 0.5, 30.0, 64, 48).unwrap();
        let config = EngineConfig {
            workers: 2,
            ..EngineConfig::default()
        };
        let mut engine = Engine::new(&ds, cam, MappingSpec::default(), config).unwrap();
        serve_on(&listener, &mut engine, Some(sessions)).unwrap();
    });
    (addr, handle)
}

/// Reads one binary frame and its stats message.
fn next_frame(ws: &mut Client) -> (u32, u32, u32, usize, Value) {
    let bin = match ws.read().unwrap() {
        Message::Binary(b) => b,
        other => panic!("expected frame, got {other:?}"),
    };
    let u = |i: usize| u32::from_le_bytes(bin[i..i + 4].try_into().unwrap());
    let stats = next_json(ws);
    assert_eq!(stats["type"], "stats");
    (u(0), u(4), u(8), bin.len() - 12, stats)
}

fn next_json(ws: &mut Client) -> Value {
    match ws.read().unwrap() {
        Message::Text(t) => serde_json::from_str(t.as_str()).unwrap(),
        other => panic!("expected text, got {other:?}"),
    }
}

fn send(ws: &mut Client, body: &str) {
    ws.send(Message::text(body.to_string())).unwrap();
}

#[test]
fn steering_session() {
    let (addr, server) = start(100, 1);
    let (mut ws, _) = connect(&addr).unwrap();

    let (id, w, h, len, stats) = next_frame(&mut ws);
    assert_eq!((id, w, h, len), (1, 64, 48, 64 * 48 * 4));
    assert_eq!(stats["frameId"], 1);
    assert_eq!(stats["workers"], 2);
    assert_eq!(stats["sortRounds"], 1);
    assert!(stats["sortMs"].as_f64().unwrap() <= stats["frameMs"].as_f64().unwrap());

    let mut last = id;
    for _ in 0..5 {
        send(&mut ws, r#"{"type":"rotate","dx":0.05,"dy":0.01}"#);
        let (id, ..) = next_frame(&mut ws);
        assert!(id > last);
        last = id;
    }

    send(&mut ws, r#"{"type":"mapping","map":"size,color","radius":[0.002,0.01]}"#);
    let (_, _, _, _, stats) = next_frame(&mut ws);
    assert_eq!(stats["sortRounds"], 2);
    send(&mut ws, r#"{"type":"mapping","map":["color"]}"#);
    assert_eq!(next_frame(&mut ws).4["sortRounds"], 1);

    send(&mut ws, r#"{"type":"resize","w":32,"h":20}"#);
    let (_, w, h, len, _) = next_frame(&mut ws);
    assert_eq!((w, h, len), (32, 20, 32 * 20 * 4));

    // Bad input: error reply, session continues.
    for bad in [
        "not json",
        r#"{"type":"spin"}"#,
        r#"{"type":"mapping","radius":[0.5,0.1]}"#,
        r#"{"type":"resize","w":0,"h":10}"#,
    ] {
        send(&mut ws, bad);
        let reply = next_json(&mut ws);
        assert_eq!(reply["type"], "error", "{bad}");
        assert!(reply["message"].as_str().is_some_and(|m| !m.is_empty()));
    }
    send(&mut ws, r#"{"type":"rotate","dx":0.0,"dy":0.0}"#);
    assert!(next_frame(&mut ws).0 > last);

    ws.close(None).unwrap();
    while ws.read().is_ok() {}
    server.join().unwrap();
}

#[test]
fn rotation_flood_is_coalesced() {
    let (addr, server) = start(100, 1);
    let (mut ws, _) = connect(&addr).unwrap();
    let (first, ..) = next_frame(&mut ws);
    for _ in 0..100 {
        send(&mut ws, r#"{"type":"rotate","dx":0.01,"dy":0.0}"#);
    }
    send(&mut ws, r#"{"type":"mapping","map":"size,color"}"#);
    // Frames keep arriving in order until the mapping change shows up.
    let mut last = first;
    let mut frames = 0;
    loop {
        let (id, _, _, _, stats) = next_frame(&mut ws);
        assert!(id > last);
        last = id;
        frames += 1;
        if stats["sortRounds"] == 2 {
            break;
        }
    }
    assert!((1..=101).contains(&frames));
    ws.close(None).unwrap();
    while ws.read().is_ok() {}
    server.join().unwrap();
}

#[test]
fn sessions_are_served_in_turn() {
    let (addr, server) = start(10, 2);
    for _ in 0..2 {
        let (mut ws, _) = connect(&addr).unwrap();
        let (id, ..) = next_frame(&mut ws);
        assert!(id >= 1);
        ws.close(None).unwrap();
        while ws.read().is_ok() {}
    }
    server.join().unwrap();
}

use std::net::{TcpListener, UdpSocket};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use jamloop_core::clock::SystemClock;
use jamloop_core::generator::StubGenerator;
use jamloop_core::osc::{AppMessage, OscSender, TransportStats};
use jamloop_core::runtime::Runtime;
use jamloop_core::{Emission, EngineOptions, Looper, Mode};
use jamloop_daemon::app::App;
use jamloop_daemon::config::EngineConfig;
use jamloop_daemon::ws::{Opcode, WsClient, WsServer};
use serde_json::{json, Value};

const WAIT: Duration = Duration::from_secs(3);

fn runtime() -> Runtime {
    let sink = |_: &Emission, _: f64| {};
    Runtime::spawn(
        Looper::new(EngineOptions::default()),
        Arc::new(SystemClock::new()),
        Box::new(sink),
        Arc::new(StubGenerator),
    )
    .unwrap()
}

fn server(rt: &Runtime) -> WsServer {
    WsServer::spawn(TcpListener::bind("127.0.0.1:0").unwrap(), rt.handle()).unwrap()
}

fn client(s: &WsServer) -> WsClient {
    let c = WsClient::connect(s.local_addr()).unwrap();
    c.set_read_timeout(Some(WAIT)).unwrap();
    c
}

/// Reads snapshots until one satisfies `pred`.
fn snapshot_where(c: &mut WsClient, pred: impl Fn(&Value) -> bool) -> Value {
    let deadline = Instant::now() + WAIT;
    while Instant::now() < deadline {
        let v = c.recv_json().unwrap();
        if v["type"] == "snapshot" && pred(&v["state"]) {
            return v;
        }
    }
    panic!("no matching snapshot");
}

#[test]
fn new_client_gets_a_snapshot_straight_away() {
    let rt = runtime();
    let s = server(&rt);
    let mut c = client(&s);
    let v = c.recv_json().unwrap();
    assert_eq!(v["v"], 1);
    assert_eq!(v["type"], "snapshot");
    assert_eq!(v["state"]["playing"], false);
    assert_eq!(v["state"]["mode"], "free");
    assert_eq!(v["state"]["sequence_length"], 16);
}

#[test]
fn commands_are_acknowledged_or_rejected() {
    let rt = runtime();
    let s = server(&rt);
    let mut c = client(&s);
    c.send_json(&json!({"v":1, "cmd":"play", "id": 7})).unwrap();
    let r = c.recv_reply().unwrap();
    assert_eq!((r["type"].as_str(), r["id"].as_i64(), r["cmd"].as_str()), (Some("ack"), Some(7), Some("play")));

    c.send_json(&json!({"v":1, "cmd":"spec", "bars":2, "numerator":4, "denominator":4})).unwrap();
    let r = c.recv_reply().unwrap();
    assert_eq!(r["type"], "error");
    assert!(r["message"].as_str().unwrap().contains("playback"));

    c.send_json(&json!({"v":1, "cmd":"mode", "mode":"improv"})).unwrap();
    assert_eq!(c.recv_reply().unwrap()["type"], "ack");
    let snap = snapshot_where(&mut c, |s| s["mode"] == "improv");
    assert_eq!(snap["state"]["improv"]["phase"], "accumulating");
    assert_eq!(snap["state"]["improv"]["threshold"], 16);
}

#[test]
fn malformed_input_keeps_the_connection() {
    let rt = runtime();
    let s = server(&rt);
    let mut c = client(&s);
    for bad in ["not json", r#"{"cmd":"play"}"#, r#"{"v":1,"cmd":"warp"}"#, r#"{"v":1,"cmd":"qpm","qpm":"fast"}"#] {
        c.send_text(bad).unwrap();
        let r = c.recv_reply().unwrap();
        assert_eq!(r["type"], "error", "{bad}");
        assert!(!r["message"].as_str().unwrap().is_empty());
    }
    c.send_raw(Opcode::Binary, &[1, 2, 3]).unwrap();
    assert_eq!(c.recv_reply().unwrap()["type"], "error");
    c.send_raw(Opcode::Ping, b"hi").unwrap();
    assert_eq!(c.recv().unwrap(), jamloop_daemon::ws::Message::Pong(b"hi".to_vec()));
    c.send_json(&json!({"v":1, "cmd":"play"})).unwrap();
    assert_eq!(c.recv_reply().unwrap()["type"], "ack");
}

#[test]
fn two_clients_receive_identical_snapshots() {
    let rt = runtime();
    let s = server(&rt);
    let mut a = client(&s);
    let mut b = client(&s);
    // Wait until both are registered so they share the broadcast stream.
    let deadline = Instant::now() + WAIT;
    while s.client_count() < 2 && Instant::now() < deadline {
        thread::sleep(Duration::from_millis(5));
    }
    rt.handle().send(jamloop_core::ControlCommand::Play.into());
    let seqs = |c: &mut WsClient| {
        let mut out = Vec::new();
        while out.len() < 8 {
            let v = c.recv_json().unwrap();
            out.push(v.to_string());
        }
        out
    };
    let sa = seqs(&mut a);
    let sb = seqs(&mut b);
    let common: Vec<&String> = sa.iter().filter(|m| sb.contains(m)).collect();
    assert!(common.len() >= 6, "only {} shared messages", common.len());
    for m in common {
        let v: Value = serde_json::from_str(m).unwrap();
        assert_eq!(v["type"], "snapshot");
    }
}

#[test]
fn broadcasts_are_rate_limited() {
    let rt = runtime();
    let s = server(&rt);
    let mut c = client(&s);
    rt.handle().send(jamloop_core::ControlCommand::Play.into());
    let start = Instant::now();
    let mut times = Vec::new();
    while start.elapsed() < Duration::from_millis(600) {
        let v = c.recv_json().unwrap();
        if v["type"] == "snapshot" {
            times.push(Instant::now());
        }
    }
    assert!(times.len() >= 4, "{} snapshots", times.len());
    // Playhead moves every 62.5 ms at 120 qpm, so changes are continuous;
    // the cap allows at most one broadcast per 50 ms plus the initial one.
    assert!(times.len() as u128 <= 600 / 50 + 2, "{} snapshots in 600 ms", times.len());
}

#[test]
fn client_disconnect_leaves_the_engine_running() {
    let rt = runtime();
    let s = server(&rt);
    let mut c = client(&s);
    c.send_json(&json!({"v":1, "cmd":"play"})).unwrap();
    assert_eq!(c.recv_reply().unwrap()["type"], "ack");
    c.close().unwrap();
    let mut abrupt = client(&s);
    abrupt.recv_json().unwrap();
    drop(abrupt);
    thread::sleep(Duration::from_millis(200));
    let (_, snap) = rt.handle().snapshot();
    assert!(snap.playing);
    let before = snap.playhead;
    thread::sleep(Duration::from_millis(200));
    assert_ne!(rt.handle().snapshot().1.playhead, before);
    let deadline = Instant::now() + WAIT;
    while s.client_count() > 0 && Instant::now() < deadline {
        thread::sleep(Duration::from_millis(10));
    }
    assert_eq!(s.client_count(), 0);
}

#[test]
fn ws_and_osc_cc_reach_the_same_engine() {
    let config = EngineConfig {
        osc_listen: "127.0.0.1:0".parse().unwrap(),
        osc_send: UdpSocket::bind("127.0.0.1:0").unwrap().local_addr().unwrap(),
        ws_port: 0,
        ..Default::default()
    };
    let app = App::start(&config).unwrap();
    let mut ws = WsClient::connect(app.ws_addr().unwrap()).unwrap();
    ws.set_read_timeout(Some(WAIT)).unwrap();
    let osc = OscSender::bind(app.osc_addr(), Arc::new(TransportStats::default())).unwrap();

    osc.send(&AppMessage::Cc { controller: 41, value: 127 }).unwrap();
    snapshot_where(&mut ws, |s| s["playing"] == true);
    ws.send_json(&json!({"v":1, "cmd":"mode", "mode":"bass"})).unwrap();
    snapshot_where(&mut ws, |s| s["mode"] == "bass");
    osc.send(&AppMessage::Cc { controller: 35, value: 127 }).unwrap();
    snapshot_where(&mut ws, |s| s["mode"] == "free");
    ws.send_json(&json!({"v":1, "cmd":"stop"})).unwrap();
    let snap = snapshot_where(&mut ws, |s| s["playing"] == false);
    assert_eq!(snap["state"]["mode"], Value::from(Mode::Free.name()));
    app.shutdown();
}

use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use gamecon_core::metrics::evaluate_script;
use gamecon_core::{Action, GameId, GeneratorKind, GeneratorSpec, MetricReport};
use gamecon_service::{serve_listener, CreatedSession, FrameMessage, ServerMessage, ServiceConfig};
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;

async fn start(config: ServiceConfig) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(serve_listener(listener, config));
    format!("127.0.0.1:{}", addr.port())
}

async fn create(client: &reqwest::Client, base: &str, spec: Value) -> reqwest::Response {
    client.post(format!("http://{base}/sessions")).json(&spec).send().await.unwrap()
}

async fn created(client: &reqwest::Client, base: &str, spec: Value) -> CreatedSession {
    let r = create(client, base, spec).await;
    assert_eq!(r.status(), 201);
    r.json().await.unwrap()
}

#[tokio::test]
async fn http_steps_match_the_library() {
    let base = start(ServiceConfig::default()).await;
    let client = reqwest::Client::new();
    let spec = GeneratorSpec { game: GameId::Traveler, seed: 4, kind: GeneratorKind::NumericJitter { p: 0.3 } };
    let s = created(&client, &base, serde_json::to_value(&spec).unwrap()).await;
    assert_eq!((s.width, s.height), (96, 96));
    assert_eq!(s.initial.step, 0);
    let script: Vec<Action> =
        (0..40).map(|i| if i % 5 == 4 { Action::Left } else { Action::Right }).collect();
    for a in &script {
        let r = client
            .post(format!("http://{base}/sessions/{}/step", s.id))
            .json(&json!({ "action": a.to_string() }))
            .send()
            .await
            .unwrap();
        assert_eq!(r.status(), 200);
    }
    let report: MetricReport =
        client.get(format!("http://{base}/sessions/{}/report", s.id)).send().await.unwrap().json().await.unwrap();
    assert_eq!(report, evaluate_script(&spec, &script).unwrap());

    let map = client.get(format!("http://{base}/sessions/{}/map", s.id)).send().await.unwrap();
    assert_eq!(map.status(), 200);
    assert_eq!(map.headers()["content-type"], "image/png");
    let png = map.bytes().await.unwrap();
    assert_eq!(&png[1..4], b"PNG");

    let del = client.delete(format!("http://{base}/sessions/{}", s.id)).send().await.unwrap();
    assert_eq!(del.status(), 204);
    let gone = client.get(format!("http://{base}/sessions/{}/report", s.id)).send().await.unwrap();
    assert_eq!(gone.status(), 404);
}

#[tokio::test]
async fn status_codes() {
    let base = start(ServiceConfig::default()).await;
    let client = reqwest::Client::new();

    let unknown = client.get(format!("http://{base}/sessions/nope/report")).send().await.unwrap();
    assert_eq!(unknown.status(), 404);

    let bad_p = create(&client, &base, json!({"game":"traveler","seed":1,"kind":"numeric_jitter","p":2.0})).await;
    assert_eq!(bad_p.status(), 400);
    let pong_reshuffle =
        create(&client, &base, json!({"game":"pong","seed":1,"kind":"spatial_reshuffle","q":0.5})).await;
    assert_eq!(pong_reshuffle.status(), 400);
    let garbage = client
        .post(format!("http://{base}/sessions"))
        .header("content-type", "application/json")
        .body("{")
        .send()
        .await
        .unwrap();
    assert_eq!(garbage.status(), 400);

    let pong = created(&client, &base, json!({"game":"pong","seed":1,"kind":"reference"})).await;
    let map = client.get(format!("http://{base}/sessions/{}/map", pong.id)).send().await.unwrap();
    assert_eq!(map.status(), 404);

    let t = created(&client, &base, json!({"game":"traveler","seed":1,"kind":"reference"})).await;
    let illegal = client
        .post(format!("http://{base}/sessions/{}/step", t.id))
        .json(&json!({"action":"up"}))
        .send()
        .await
        .unwrap();
    assert_eq!(illegal.status(), 400);
    let unknown_action = client
        .post(format!("http://{base}/sessions/{}/step", t.id))
        .json(&json!({"action":"jump"}))
        .send()
        .await
        .unwrap();
    assert_eq!(unknown_action.status(), 400);
}

async fn recv(ws: &mut (impl StreamExt<Item = Result<Message, tokio_tungstenite::tungstenite::Error>> + Unpin)) -> ServerMessage {
    loop {
        match ws.next().await.unwrap().unwrap() {
            Message::Text(t) => return serde_json::from_str(t.as_str()).unwrap(),
            _ => continue,
        }
    }
}

fn frame(msg: ServerMessage) -> FrameMessage {
    match msg {
        ServerMessage::Frame(f) => f,
        other => panic!("expected a frame, got {other:?}"),
    }
}

#[tokio::test]
async fn websocket_stream() {
    let base = start(ServiceConfig::default()).await;
    let client = reqwest::Client::new();
    let s = created(&client, &base, json!({"game":"traveler","seed":9,"kind":"reference"})).await;
    let (mut ws, _) =
        tokio_tungstenite::connect_async(format!("ws://{base}/sessions/{}/stream", s.id)).await.unwrap();
    let hello = frame(recv(&mut ws).await);
    assert_eq!(hello, s.initial);

    for i in 0..20 {
        ws.send(Message::text(json!({"type":"action","action":"right"}).to_string())).await.unwrap();
        let f = frame(recv(&mut ws).await);
        assert_eq!(f.step, i + 1);
        assert_eq!(f.player_x, Some(4 * (i as i64 + 1)));
        assert_eq!(f.score, f.rendered_score);
        assert_eq!(f.numcon_running, 1.0);
        assert!(!f.ambiguous_match);
    }
    for _ in 0..20 {
        ws.send(Message::text(json!({"type":"action","action":"left"}).to_string())).await.unwrap();
        let f = frame(recv(&mut ws).await);
        assert_eq!(f.spacon_running, Some(99.0));
    }

    ws.send(Message::text(json!({"type":"action","action":"up"}).to_string())).await.unwrap();
    assert!(matches!(recv(&mut ws).await, ServerMessage::Error { .. }));
    ws.send(Message::text("not json")).await.unwrap();
    assert!(matches!(recv(&mut ws).await, ServerMessage::Error { .. }));

    ws.send(Message::text(json!({"type":"set_corruption","p":null,"q":1.0}).to_string())).await.unwrap();
    match recv(&mut ws).await {
        ServerMessage::CorruptionSet { generator } => {
            assert_eq!(generator.kind, GeneratorKind::SpatialReshuffle { q: 1.0 })
        }
        other => panic!("unexpected {other:?}"),
    }
    let mut last = None;
    for a in ["right", "left"] {
        for _ in 0..20 {
            ws.send(Message::text(json!({"type":"action","action":a}).to_string())).await.unwrap();
            last = frame(recv(&mut ws).await).spacon_running;
        }
    }
    assert!(last.unwrap() < 99.0);
}

#[tokio::test]
async fn stream_reports_the_end_of_a_game() {
    let base = start(ServiceConfig::default()).await;
    let client = reqwest::Client::new();
    let s = created(&client, &base, json!({"game":"pong","seed":3,"kind":"reference"})).await;
    let (mut ws, _) =
        tokio_tungstenite::connect_async(format!("ws://{base}/sessions/{}/stream", s.id)).await.unwrap();
    frame(recv(&mut ws).await);
    // Paddles that never move miss eventually; the tail then runs out.
    let mut ended = false;
    for _ in 0..2000 {
        ws.send(Message::text(json!({"type":"action","action":"stay/stay"}).to_string())).await.unwrap();
        match recv(&mut ws).await {
            ServerMessage::Frame(f) => assert!(f.spacon_running.is_none() && f.player_x.is_none()),
            ServerMessage::Ended { report, .. } => {
                assert_eq!(report.spacon, None);
                ended = true;
                break;
            }
            other => panic!("unexpected {other:?}"),
        }
    }
    assert!(ended);
}

#[tokio::test]
async fn idle_sessions_are_evicted() {
    let config = ServiceConfig { idle_timeout: Duration::from_millis(200), sweep_interval: Duration::from_millis(50) };
    let base = start(config).await;
    let client = reqwest::Client::new();
    let s = created(&client, &base, json!({"game":"pacman","seed":2,"kind":"reference"})).await;
    let url = format!("http://{base}/sessions/{}/report", s.id);
    assert_eq!(client.get(&url).send().await.unwrap().status(), 200);
    tokio::time::sleep(Duration::from_millis(600)).await;
    assert_eq!(client.get(&url).send().await.unwrap().status(), 404);
}

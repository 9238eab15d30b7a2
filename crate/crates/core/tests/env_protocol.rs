use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};

use aidc_grid::policies::{MlpPolicy, PolicyWeights};
use aidc_grid::scenario::Scenario;
use aidc_grid::sim::{
    run_episode, serve_stream, serve_tcp, ClientMessage, EnvServer, ServerMessage, SimContext, WireObservation,
};
use serde_json::{json, Value};

fn server(names: &[&str], window: Option<usize>) -> EnvServer {
    EnvServer::new(names.iter().map(|n| Scenario::builtin(n).unwrap()).collect(), window)
}

fn error_code(msg: &ServerMessage) -> &str {
    match msg {
        ServerMessage::Error { code, .. } => code,
        other => panic!("expected an error, got {other:?}"),
    }
}

fn reference_weights() -> PolicyWeights {
    let doc: Value = serde_json::from_str(include_str!("fixtures/mlp_reference.json")).unwrap();
    PolicyWeights::from_json(&doc["weights"].to_string()).unwrap()
}

#[test]
fn reset_returns_the_first_observation() {
    let mut s = server(&["generous"], None);
    let reply = s.handle_line(r#"{"type":"reset","scenario_id":"generous","seed":1}"#);
    let ServerMessage::Obs(obs) = reply else {
        panic!("{reply:?}")
    };
    assert_eq!(obs.t, 1);
    assert_eq!(obs.features[6], 1.0);
    assert_eq!(obs.features[7], 1.0);
}

#[test]
fn full_request_on_a_generous_grid_is_granted() {
    let mut s = server(&["generous"], None);
    s.handle_line(r#"{"type":"reset","scenario_id":"generous","seed":1}"#);
    let reply = s.handle_line(r#"{"type":"act","action":[1,1,1,0,0]}"#);
    let ServerMessage::Step { obs, reward, done, info } = reply else {
        panic!("{reply:?}")
    };
    assert_eq!(obs.t, 2);
    assert_eq!(info.kappa, 0.0);
    assert_eq!(info.p_acc, info.p_req);
    assert!(!done);
    assert!(reward.is_finite() && reward <= 0.0);
}

#[test]
fn protocol_errors_are_reported_and_recoverable() {
    let mut s = server(&["generous"], Some(4));
    assert_eq!(error_code(&s.handle_line(r#"{"type":"act","action":[1,1,1,0,0]}"#)), "no_episode");
    assert_eq!(error_code(&s.handle_line("not json")), "bad_message");
    assert_eq!(error_code(&s.handle_line(r#"{"type":"reset","seed":1}"#)), "bad_message");
    assert_eq!(error_code(&s.handle_line(r#"{"type":"jump"}"#)), "bad_message");
    assert_eq!(
        error_code(&s.handle_line(r#"{"type":"reset","scenario_id":"mars","seed":1}"#)),
        "unknown_scenario"
    );

    let reply = s.handle_line(r#"{"type":"reset","scenario_id":"generous","seed":1,"note":"extra"}"#);
    assert!(matches!(reply, ServerMessage::Obs(_)), "unknown fields are ignored");
    assert_eq!(error_code(&s.handle_line(r#"{"type":"act","action":[1,1,1]}"#)), "bad_action_dim");
    assert_eq!(error_code(&s.handle_line(r#"{"type":"act","action":[1,1,1.5,0,0]}"#)), "bad_action");
    // The episode is intact after a malformed request.
    for i in 0..4 {
        let reply = s.handle_line(r#"{"type":"act","action":[1,1,1,0,0]}"#);
        let ServerMessage::Step { done, .. } = reply else {
            panic!("{reply:?}")
        };
        assert_eq!(done, i == 3);
    }
    assert_eq!(error_code(&s.handle_line(r#"{"type":"act","action":[1,1,1,0,0]}"#)), "episode_done");
}

#[test]
fn window_start_depends_only_on_the_seed() {
    let mut s = server(&["stress"], Some(8));
    let mut first = |seed: u64| match s.handle(ClientMessage::Reset {
        scenario_id: "stress".into(),
        seed,
    }) {
        ServerMessage::Obs(o) => o.features,
        other => panic!("{other:?}"),
    };
    let a = first(5);
    let b = first(6);
    let c = first(5);
    assert_eq!(a, c);
    assert_ne!(a, b);
}

#[test]
fn wire_episode_equals_the_in_process_loop() {
    let weights = reference_weights();
    let ctx = SimContext::prepare(Scenario::builtin("stress").unwrap()).unwrap();
    let local = run_episode(&ctx, &mut MlpPolicy::new(weights.clone()).unwrap());
    assert!(local.completed(), "{:?}", local.abort);

    let mut s = server(&["stress"], None);
    let mut reply = s.handle(ClientMessage::Reset {
        scenario_id: "stress".into(),
        seed: 0,
    });
    let mut rewards = Vec::new();
    loop {
        let obs: WireObservation = match reply {
            ServerMessage::Obs(o) => o,
            ServerMessage::Step { done: true, reward, .. } => {
                rewards.push(reward);
                break;
            }
            ServerMessage::Step { obs, reward, .. } => {
                rewards.push(reward);
                obs
            }
            other => panic!("{other:?}"),
        };
        let action = weights.forward(&obs.features).to_vec();
        reply = s.handle(ClientMessage::Act { action });
    }
    let remote = s.steps().unwrap();
    assert_eq!(remote.len(), local.steps.len());
    for (r, l) in remote.iter().zip(&local.steps) {
        assert_eq!(r, l);
    }
    let local_rewards: Vec<f64> = local.steps.iter().map(|r| r.reward.total).collect();
    assert_eq!(rewards, local_rewards);
}

fn lines_of(output: &[u8]) -> Vec<Value> {
    output
        .split(|b| *b == b'\n')
        .filter(|l| !l.is_empty())
        .map(|l| serde_json::from_slice(l).unwrap())
        .collect()
}

#[test]
fn stream_session_answers_one_line_per_request() {
    let mut s = server(&["generous"], Some(2));
    let input = [
        json!({"type": "reset", "scenario_id": "generous", "seed": 3}).to_string(),
        String::new(),
        json!({"type": "act", "action": [1, 1, 0.5, 0, 0]}).to_string(),
        json!({"type": "act", "action": [1, 1, 0.5, 0, 0]}).to_string(),
        json!({"type": "act", "action": [1, 1, 0.5, 0, 0]}).to_string(),
    ]
    .join("\n");
    let mut out = Vec::new();
    serve_stream(&mut s, input.as_bytes(), &mut out).unwrap();
    let replies = lines_of(&out);
    assert_eq!(replies.len(), 4);
    assert_eq!(replies[0]["type"], "obs");
    assert_eq!(replies[0]["features"].as_array().unwrap().len(), 13);
    assert_eq!(replies[1]["type"], "step");
    assert_eq!(replies[1]["info"]["kappa"], 0.0);
    assert_eq!(replies[2]["done"], true);
    assert_eq!(replies[3]["type"], "error");
    assert_eq!(replies[3]["code"], "episode_done");
    assert!(s.steps().is_none(), "session end drops the episode");
}

#[test]
fn tcp_session() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = std::thread::spawn(move || {
        let mut s = server(&["generous"], Some(3));
        serve_tcp(&mut s, listener, Some(1)).unwrap();
    });
    let mut stream = TcpStream::connect(addr).unwrap();
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut ask = |msg: Value| -> Value {
        writeln!(stream, "{msg}").unwrap();
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        serde_json::from_str(&line).unwrap()
    };
    assert_eq!(ask(json!({"type": "reset", "scenario_id": "generous", "seed": 9}))["t"], 1);
    let step = ask(json!({"type": "act", "action": [0.5, 0.5, 0.5, 0, 0]}));
    assert_eq!(step["type"], "step");
    assert_eq!(step["obs"]["t"], 2);
    stream.shutdown(std::net::Shutdown::Write).unwrap();
    handle.join().unwrap();
}

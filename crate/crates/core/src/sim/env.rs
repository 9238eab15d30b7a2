//! Line-delimited JSON environment protocol for external trainers.
//!
//! `{"type":"reset","scenario_id":..,"seed":..}` answers `obs`;
//! `{"type":"act","action":[5 numbers]}` answers `step`. Malformed requests
//! answer `error` and leave the episode intact; a failed step discards it.
//! One client at a time.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;

use crate::plant::PlanningAction;
use crate::policies::{Observation, ACTION_DIM, OBS_DIM};
use crate::scenario::Scenario;

use super::{Episode, SimContext, StepRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Reset { scenario_id: String, seed: u64 },
    Act { action: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireObservation {
    pub t: usize,
    pub features: [f64; OBS_DIM],
}

impl From<&Observation> for WireObservation {
    fn from(o: &Observation) -> Self {
        Self {
            t: o.t,
            features: o.features,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvInfo {
    pub p_req: f64,
    pub p_acc: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Obs(WireObservation),
    Step {
        obs: WireObservation,
        reward: f64,
        done: bool,
        info: EnvInfo,
    },
    Error {
        code: String,
        detail: String,
    },
}

impl ServerMessage {
    fn error(code: &str, detail: impl Into<String>) -> Self {
        Self::Error {
            code: code.into(),
            detail: detail.into(),
        }
    }
}

/// Registered scenarios plus the current session's episode.
pub struct EnvServer {
    scenarios: BTreeMap<String, Scenario>,
    /// Episode length in steps; `None` uses each scenario's full trace.
    window: Option<usize>,
    contexts: HashMap<(String, usize), SimContext>,
    episode: Option<Episode<'static>>,
}

impl EnvServer {
    pub fn new(scenarios: Vec<Scenario>, window: Option<usize>) -> Self {
        Self {
            scenarios: scenarios.into_iter().map(|s| (s.name.clone(), s)).collect(),
            window,
            contexts: HashMap::new(),
            episode: None,
        }
    }

    pub fn scenario_ids(&self) -> Vec<&str> {
        self.scenarios.keys().map(String::as_str).collect()
    }

    /// Steps of the current (or just finished) episode.
    pub fn steps(&self) -> Option<&[StepRecord]> {
        self.episode.as_ref().map(|e| e.steps())
    }

    /// Drops the current episode, as on transport loss.
    pub fn end_session(&mut self) {
        self.episode = None;
    }

    pub fn handle_line(&mut self, line: &str) -> ServerMessage {
        match serde_json::from_str::<ClientMessage>(line) {
            Ok(msg) => self.handle(msg),
            Err(e) => ServerMessage::error("bad_message", e.to_string()),
        }
    }

    pub fn handle(&mut self, msg: ClientMessage) -> ServerMessage {
        match msg {
            ClientMessage::Reset { scenario_id, seed } => self.reset(&scenario_id, seed),
            ClientMessage::Act { action } => self.act(&action),
        }
    }

    fn reset(&mut self, id: &str, seed: u64) -> ServerMessage {
        let Some(scenario) = self.scenarios.get(id) else {
            return ServerMessage::error(
                "unknown_scenario",
                format!("`{id}`; registered: {}", self.scenario_ids().join(", ")),
            );
        };
        let len = scenario.horizon();
        let window = self.window.unwrap_or(len).min(len);
        let start = if window < len {
            ChaCha8Rng::seed_from_u64(seed).random_range(0..=len - window)
        } else {
            0
        };
        let key = (id.to_string(), start);
        if !self.contexts.contains_key(&key) {
            let s = scenario.with_trace(scenario.trace.window(start, window));
            match SimContext::prepare(s) {
                Ok(ctx) => {
                    self.contexts.insert(key.clone(), ctx);
                }
                Err(e) => return ServerMessage::error("scenario_failed", e.to_string()),
            }
        }
        let ep = Episode::owned(self.contexts[&key].clone());
        let obs = ep.observation();
        self.episode = Some(ep);
        ServerMessage::Obs((&obs).into())
    }

    fn act(&mut self, action: &[f64]) -> ServerMessage {
        let Some(ep) = self.episode.as_mut() else {
            return ServerMessage::error("no_episode", "send reset first");
        };
        if ep.done() {
            return ServerMessage::error("episode_done", "send reset to start a new episode");
        }
        if action.len() != ACTION_DIM {
            return ServerMessage::error(
                "bad_action_dim",
                format!("expected {ACTION_DIM} values, got {}", action.len()),
            );
        }
        let a = PlanningAction::from_array(action.try_into().expect("length checked"));
        if let Err(e) = a.validate() {
            return ServerMessage::error("bad_action", e.to_string());
        }
        let (reward, info) = match ep.step(a) {
            Ok(r) => (
                r.reward.total,
                EnvInfo {
                    p_req: r.p_req,
                    p_acc: r.p_acc,
                    kappa: r.kappa,
                },
            ),
            Err(e) => {
                let code = if e.is_infeasible() { "infeasible" } else { "step_failed" };
                self.episode = None;
                return ServerMessage::error(code, e.to_string());
            }
        };
        ServerMessage::Step {
            obs: (&ep.observation()).into(),
            reward,
            done: ep.done(),
            info,
        }
    }
}

/// Serves one session over a line stream until EOF.
pub fn serve_stream<R: BufRead, W: Write>(
    server: &mut EnvServer,
    input: R,
    mut output: W,
) -> std::io::Result<()> {
    for line in input.lines() {
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                server.end_session();
                return Err(e);
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        let reply = server.handle_line(&line);
        let text = serde_json::to_string(&reply).expect("reply serializes");
        if let Err(e) = writeln!(output, "{text}").and_then(|_| output.flush()) {
            server.end_session();
            return Err(e);
        }
    }
    server.end_session();
    Ok(())
}

/// Accepts clients one after another; `max_sessions` bounds the loop.
pub fn serve_tcp(
    server: &mut EnvServer,
    listener: TcpListener,
    max_sessions: Option<usize>,
) -> std::io::Result<()> {
    let mut served = 0;
    for stream in listener.incoming() {
        let stream = stream?;
        let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
        log::info!("env session from {peer}");
        let reader = BufReader::new(stream.try_clone()?);
        if let Err(e) = serve_stream(server, reader, stream) {
            log::warn!("env session {peer} ended: {e}");
        }
        served += 1;
        if max_sessions.is_some_and(|m| served >= m) {
            break;
        }
    }
    Ok(())
}

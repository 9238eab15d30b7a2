//! Planning policies and the observation they see.

mod mlp;

pub use mlp::{mlp_policy_eval, Activation, DenseLayer, MlpPolicy, PolicyWeights, Squash, WEIGHTS_VERSION};

use crate::plant::{AidcState, PlanningAction};
use crate::scenario::{AidcConfig, ExogenousTrace, FeatureScales, HeuristicConfig};

pub const OBS_DIM: usize = 13;
pub const ACTION_DIM: usize = 5;

/// Feature order of observations, weights files and the wire protocol.
pub const FEATURE_NAMES: [&str; OBS_DIM] = [
    "e_bess",
    "s_1a_prev",
    "s_1b_prev",
    "s_2_prev",
    "r_1a",
    "r_1b",
    "eta_1a",
    "eta_1b",
    "p_acc_prev",
    "kappa_prev",
    "price",
    "demand",
    "d_inf",
];

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("weights shape: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("feature order does not match the observation contract")]
    FeatureOrder,
    #[error("unsupported weights version {0}")]
    Version(u32),
    #[error("{path}: {message}")]
    Load { path: String, message: String },
    #[error("unknown policy `{0}` (expected fixed-buffer, heuristic or mlp:PATH)")]
    Unknown(String),
}

/// Raw features plus their normalized counterparts, both in [`FEATURE_NAMES`] order.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Observation {
    /// One-based step.
    pub t: usize,
    pub raw: [f64; OBS_DIM],
    pub features: [f64; OBS_DIM],
}

impl Observation {
    pub fn e_bess(&self) -> f64 {
        self.raw[0]
    }
    pub fn urgency(&self) -> [f64; 2] {
        [self.raw[6], self.raw[7]]
    }
    pub fn demand(&self) -> f64 {
        self.raw[11]
    }
    pub fn d_inf(&self) -> f64 {
        self.raw[12]
    }
}

/// Exchange quantities of the previous step (zero before the first step).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PreviousExchange {
    pub p_acc: f64,
    pub kappa: f64,
}

/// `R_k T / (target_k (T - t + 1))` for one-based `t`; 1 on the uniform pace.
pub fn urgency(remaining: f64, target: f64, t: usize, horizon: usize) -> f64 {
    if target <= 0.0 || t > horizon {
        return 0.0;
    }
    remaining * horizon as f64 / (target * (horizon - t + 1) as f64)
}

/// Observation at one-based step `t`.
pub fn build_observation(
    state: &AidcState,
    prev: PreviousExchange,
    trace: &ExogenousTrace,
    t: usize,
    scales: &FeatureScales,
) -> Observation {
    let horizon = trace.horizon();
    let i = t - 1;
    let eta = [0, 1].map(|k| urgency(state.remaining[k], state.target[k], t, horizon));
    let raw = [
        state.e_bess,
        state.s_prev[0],
        state.s_prev[1],
        state.s_prev[2],
        state.remaining[0],
        state.remaining[1],
        eta[0],
        eta[1],
        prev.p_acc,
        prev.kappa,
        trace.price[i],
        trace.demand[i],
        trace.inference[i],
    ];
    let work = |k: usize| {
        let d = state.target[k] * scales.work_fraction;
        if d > 0.0 {
            raw[4 + k] / d
        } else {
            0.0
        }
    };
    let features = [
        raw[0] / scales.energy_mwh,
        raw[1],
        raw[2],
        raw[3],
        work(0),
        work(1),
        raw[6],
        raw[7],
        raw[8] / scales.power_mw,
        raw[9] / scales.power_mw,
        raw[10] / scales.price_aud_mwh,
        raw[11] / scales.demand_mw,
        raw[12],
    ];
    Observation { t, raw, features }
}

/// Requested PCC import for a planning action. The inference target is
/// clipped to `d_inf` first.
pub fn action_to_request(action: &PlanningAction, cfg: &AidcConfig, d_inf: f64) -> f64 {
    let targets = [action.s_1a, action.s_1b, action.s_2.min(d_inf)];
    let it: f64 = cfg
        .clusters()
        .iter()
        .zip(targets)
        .map(|(c, s)| c.p_idle_mw() + (c.p_peak_mw - c.p_idle_mw()) * s)
        .sum();
    let p = cfg.it_multiplier() * it
        + (action.phi_ch - action.phi_dis) * cfg.bess.p_max_mw / cfg.eta_ipcs;
    assert!(p >= 0.0, "request must be nonnegative, got {p}");
    p
}

pub trait PlanningPolicy: Send {
    fn name(&self) -> String;

    /// Called at the start of every episode with its trace.
    fn reset(&mut self, _trace: &ExogenousTrace) {}

    fn act(&mut self, obs: &Observation, cfg: &AidcConfig) -> Result<PlanningAction, PolicyError>;
}

/// Static conservative margin: every target at `level`, battery idle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedBuffer {
    pub level: f64,
}

impl Default for FixedBuffer {
    fn default() -> Self {
        Self { level: 0.85 }
    }
}

pub fn fixed_buffer_policy(level: f64) -> PlanningAction {
    PlanningAction::new(level, level, level, 0.0, 0.0)
}

impl PlanningPolicy for FixedBuffer {
    fn name(&self) -> String {
        "fixed-buffer".into()
    }

    fn act(&mut self, _obs: &Observation, _cfg: &AidcConfig) -> Result<PlanningAction, PolicyError> {
        Ok(fixed_buffer_policy(self.level))
    }
}

/// Linear-interpolated percentile (`p` in `[0,100]`).
pub fn percentile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of an empty series");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = (p / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// The demand-threshold rule table.
pub fn heuristic_policy(
    obs: &Observation,
    cfg: &AidcConfig,
    rule: &HeuristicConfig,
    peak_threshold: f64,
) -> PlanningAction {
    let soc = obs.e_bess() / cfg.bess.e_max_mwh;
    let d_inf = obs.d_inf();
    if obs.demand() >= peak_threshold {
        let eta = obs.urgency();
        let bump = |base: f64, e: f64| {
            if e > rule.urgency_trigger {
                (base + rule.urgency_bump).min(1.0)
            } else {
                base
            }
        };
        let dis = if soc > rule.discharge_above_soc {
            rule.discharge_fraction
        } else {
            0.0
        };
        PlanningAction::new(
            bump(rule.peak_frontier, eta[0]),
            bump(rule.peak_batch, eta[1]),
            d_inf,
            0.0,
            dis,
        )
    } else {
        let ch = if soc < rule.charge_below_soc {
            rule.charge_fraction
        } else {
            0.0
        };
        PlanningAction::new(1.0, 1.0, d_inf, ch, 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct Heuristic {
    pub rule: HeuristicConfig,
    threshold: f64,
    history: Vec<f64>,
}

impl Heuristic {
    pub fn new(rule: HeuristicConfig) -> Self {
        Self {
            rule,
            threshold: f64::INFINITY,
            history: Vec::new(),
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

impl PlanningPolicy for Heuristic {
    fn name(&self) -> String {
        "heuristic".into()
    }

    fn reset(&mut self, trace: &ExogenousTrace) {
        self.history.clear();
        self.threshold = percentile(&trace.demand, self.rule.peak_percentile);
    }

    fn act(&mut self, obs: &Observation, cfg: &AidcConfig) -> Result<PlanningAction, PolicyError> {
        let threshold = match self.rule.trailing_window {
            Some(w) => {
                self.history.push(obs.demand());
                let start = self.history.len().saturating_sub(w.max(1));
                percentile(&self.history[start..], self.rule.peak_percentile)
            }
            None => self.threshold,
        };
        Ok(heuristic_policy(obs, cfg, &self.rule, threshold))
    }
}

/// Replays a fixed action sequence, holding the last action afterwards.
#[derive(Debug, Clone)]
pub struct Scripted {
    pub actions: Vec<PlanningAction>,
}

impl PlanningPolicy for Scripted {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn act(&mut self, obs: &Observation, _cfg: &AidcConfig) -> Result<PlanningAction, PolicyError> {
        let i = (obs.t - 1).min(self.actions.len().saturating_sub(1));
        self.actions
            .get(i)
            .copied()
            .ok_or_else(|| PolicyError::Shape("empty script".into()))
    }
}

/// Parses `fixed-buffer`, `heuristic` or `mlp:PATH`.
pub fn policy_from_spec(
    spec: &str,
    policy_cfg: &crate::scenario::PolicyConfig,
) -> Result<Box<dyn PlanningPolicy>, PolicyError> {
    match spec {
        "fixed-buffer" => Ok(Box::new(FixedBuffer {
            level: policy_cfg.fixed_buffer_level.unwrap_or(0.85),
        })),
        "heuristic" => Ok(Box::new(Heuristic::new(policy_cfg.heuristic.clone()))),
        s if s.starts_with("mlp:") => {
            let w = PolicyWeights::load(&s[4..])?;
            Ok(Box::new(MlpPolicy::new(w)?))
        }
        other => Err(PolicyError::Unknown(other.to_string())),
    }
}

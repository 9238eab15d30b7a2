//! Closed-loop engine: observe, plan, request, accept, execute, reward.

mod env;
mod metrics;
mod output;
mod sweep;

pub use env::{
    serve_stream, serve_tcp, ClientMessage, EnvInfo, EnvServer, ServerMessage, WireObservation,
};
pub use metrics::{compute_metrics, MetricsReport, RegimeMeans};
pub use output::{
    read_metrics, write_acceptance_csv, write_baseline, write_execution_csv, write_run,
    write_sweep_csv,
};
pub use sweep::{sweep, SweepCell, SweepReport, SweepStatus};

use serde::Serialize;
use std::borrow::Cow;

use crate::grid::{
    compute_ptdf, protection_terms, robust_acceptance_step, solve_baseline_dispatch,
    BaselineDispatch, GridError, Mechanism, ProtectionTerms, PtdfMatrix, TsoContext, TsoState,
};
use crate::plant::{bess_limits, execute_step, terminal_shortfall, AidcState, ExecutionResult, PlanningAction, PlantError};
use crate::policies::{
    action_to_request, build_observation, Observation, PlanningPolicy, PolicyError,
    PreviousExchange,
};
use crate::scenario::{AidcConfig, NetworkCase, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("scenario invalid: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("episode already finished")]
    EpisodeDone,
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl SimError {
    /// No admissible operating point for the exchange: the protected
    /// acceptance set is empty, or the accepted import lies below what the
    /// plant can absorb. Sweeps report these as data.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            SimError::Grid(GridError::AcceptanceInfeasible { .. })
                | SimError::Grid(GridError::BaselineInfeasible { .. })
                | SimError::Plant(PlantError::OutsideOperatingRange { .. })
        )
    }
}

/// Scenario plus the grid quantities precomputed once per trace.
#[derive(Debug, Clone)]
pub struct SimContext {
    pub scenario: Scenario,
    pub grid: NetworkCase,
    pub ptdf: PtdfMatrix<f64>,
    pub baseline: BaselineDispatch,
    pub protection: ProtectionTerms,
}

impl SimContext {
    pub fn prepare(scenario: Scenario) -> Result<Self, SimError> {
        let report = crate::scenario::validate_scenario(&scenario);
        if !report.is_ok() {
            return Err(SimError::Invalid(report.issues));
        }
        let grid = scenario.grid();
        let ptdf = compute_ptdf::<f64>(&grid)?;
        let baseline = solve_baseline_dispatch(&grid, &scenario.trace, &ptdf)?;
        Ok(Self::assemble(scenario, grid, ptdf, baseline))
    }

    /// Reuses a baseline solved for the same network and trace.
    pub fn with_tso(&self, tso: crate::scenario::TsoConfig) -> Self {
        let mut scenario = self.scenario.clone();
        scenario.tso = tso;
        Self::assemble(scenario, self.grid.clone(), self.ptdf.clone(), self.baseline.clone())
    }

    fn assemble(
        scenario: Scenario,
        grid: NetworkCase,
        ptdf: PtdfMatrix<f64>,
        baseline: BaselineDispatch,
    ) -> Self {
        let protection = protection_terms(&ptdf, &scenario.trace, &scenario.tso, &grid);
        Self {
            scenario,
            grid,
            ptdf,
            baseline,
            protection,
        }
    }

    pub fn horizon(&self) -> usize {
        self.scenario.horizon()
    }

    fn tso_context(&self) -> TsoContext<'_> {
        TsoContext {
            case: &self.grid,
            ptdf: &self.ptdf,
            trace: &self.scenario.trace,
            baseline: &self.baseline,
            protection: &self.protection,
            cfg: &self.scenario.tso,
        }
    }
}

/// Reward and its three penalty terms; `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, serde::Deserialize)]
pub struct RewardBreakdown {
    pub total: f64,
    pub workload: f64,
    pub rejection: f64,
    pub curtailment: f64,
}

/// Shortfall against the uniform schedule, as a fraction of the group target.
pub fn schedule_shortfall(state: &AidcState, t: usize, horizon: usize) -> [f64; 2] {
    [0, 1].map(|k| {
        let target = state.target[k];
        if target <= 0.0 {
            return 0.0;
        }
        ((t as f64 / horizon as f64) * target - state.work[k]).max(0.0) / target
    })
}

/// Step reward after the state update of one-based step `t`.
pub fn step_reward(
    state: &AidcState,
    r_2: f64,
    kappa: f64,
    dt_h: f64,
    t: usize,
    horizon: usize,
    cfg: &AidcConfig,
) -> RewardBreakdown {
    let p = &cfg.penalties;
    let eta = schedule_shortfall(state, t, horizon);
    let workload = -p.alpha_w * (p.m_1a * eta[0] + p.m_1b * eta[1]);
    let rejection = -p.alpha_rej * r_2 * dt_h;
    let curtailment = -p.alpha_kappa * kappa;
    RewardBreakdown {
        total: workload + rejection + curtailment,
        workload,
        rejection,
        curtailment,
    }
}

/// Limits the planned battery exchange to what the current SoC allows.
/// The net fraction is kept; it lands on one side only.
pub fn clip_bess_plan(action: &PlanningAction, state: &AidcState, dt_h: f64, cfg: &AidcConfig) -> PlanningAction {
    let p_max = cfg.bess.p_max_mw;
    let (ch_cap, dis_cap) = bess_limits(state.e_bess, dt_h, &cfg.bess);
    let net = ((action.phi_ch - action.phi_dis) * p_max).clamp(-dis_cap, ch_cap);
    PlanningAction {
        phi_ch: net.max(0.0) / p_max,
        phi_dis: (-net).max(0.0) / p_max,
        ..*action
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    /// One-based step.
    pub t: usize,
    pub observation: Observation,
    /// As returned by the policy.
    pub action: PlanningAction,
    /// After the SoC clip; the request is built from this.
    pub plan: PlanningAction,
    pub d_inf: f64,
    pub p_req: f64,
    pub p_acc: f64,
    pub kappa: f64,
    pub mechanism: Mechanism,
    pub dispatch_cost: f64,
    pub max_line_utilization: f64,
    pub execution: ExecutionResult,
    pub reward: RewardBreakdown,
    pub state: AidcState,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeAbort {
    pub t: usize,
    pub infeasible: bool,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRecord {
    pub scenario: String,
    pub policy: String,
    pub seed: u64,
    pub horizon: usize,
    pub dt_h: f64,
    pub steps: Vec<StepRecord>,
    pub terminal_work: [f64; 2],
    pub terminal_shortfall: [f64; 2],
    /// `E(T+1) - E_init`, MWh.
    pub terminal_soc_deviation: f64,
    pub abort: Option<EpisodeAbort>,
}

impl EpisodeRecord {
    pub fn completed(&self) -> bool {
        self.abort.is_none() && self.steps.len() == self.horizon
    }
}

/// Stepwise episode driver shared by [`run_episode`] and the env server.
pub struct Episode<'a> {
    ctx: Cow<'a, SimContext>,
    state: AidcState,
    tso: TsoState,
    prev: PreviousExchange,
    t: usize,
    steps: Vec<StepRecord>,
}

impl Episode<'static> {
    pub fn owned(ctx: SimContext) -> Self {
        Self::start(Cow::Owned(ctx))
    }
}

impl<'a> Episode<'a> {
    pub fn new(ctx: &'a SimContext) -> Self {
        Self::start(Cow::Borrowed(ctx))
    }

    fn start(ctx: Cow<'a, SimContext>) -> Self {
        let s = &ctx.scenario;
        Self {
            state: AidcState::initial(&s.aidc, s.horizon(), s.dt_h()),
            tso: TsoState::default(),
            prev: PreviousExchange::default(),
            t: 1,
            steps: Vec::with_capacity(s.horizon()),
            ctx,
        }
    }

    pub fn context(&self) -> &SimContext {
        &self.ctx
    }

    /// One-based index of the next step.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn done(&self) -> bool {
        self.t > self.ctx.horizon()
    }

    pub fn state(&self) -> &AidcState {
        &self.state
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    /// Observation for the next step; after the last step the exogenous
    /// features repeat those of step T and urgencies are zero.
    pub fn observation(&self) -> Observation {
        let s = &self.ctx.scenario;
        let t = self.t.min(s.horizon());
        let mut obs = build_observation(&self.state, self.prev, &s.trace, t, &s.policy.scales);
        if self.done() {
            obs.t = self.t;
            for i in [6, 7] {
                obs.raw[i] = 0.0;
                obs.features[i] = 0.0;
            }
        }
        obs
    }

    pub fn step(&mut self, action: PlanningAction) -> Result<&StepRecord, SimError> {
        if self.done() {
            return Err(SimError::EpisodeDone);
        }
        action.validate()?;
        let s = &self.ctx.scenario;
        let (t, horizon, dt) = (self.t, s.horizon(), s.dt_h());
        let observation = self.observation();
        let d_inf = s.trace.inference[t - 1];
        let plan = clip_bess_plan(&action, &self.state, dt, &s.aidc);
        let p_req = action_to_request(&plan, &s.aidc, d_inf);
        let outcome = robust_acceptance_step(&self.ctx.tso_context(), p_req, t - 1, &self.tso)?;
        let execution = execute_step(&plan, outcome.p_acc, &self.state, d_inf, dt, &s.aidc)?;
        self.state.apply(execution.s, execution.e_next, dt);
        let reward = step_reward(&self.state, execution.r_2, outcome.kappa, dt, t, horizon, &s.aidc);
        self.tso.advance(&outcome);
        self.prev = PreviousExchange {
            p_acc: outcome.p_acc,
            kappa: outcome.kappa,
        };
        self.t += 1;
        self.steps.push(StepRecord {
            t,
            observation,
            action,
            plan,
            d_inf,
            p_req,
            p_acc: outcome.p_acc,
            kappa: outcome.kappa,
            mechanism: outcome.mechanism,
            dispatch_cost: outcome.dispatch_cost,
            max_line_utilization: outcome.max_line_utilization,
            execution,
            reward,
            state: self.state.clone(),
        });
        Ok(self.steps.last().expect("just pushed"))
    }

    pub fn finish(self, policy: &str, abort: Option<EpisodeAbort>) -> EpisodeRecord {
        let s = &self.ctx.scenario;
        EpisodeRecord {
            scenario: s.name.clone(),
            policy: policy.to_string(),
            seed: s.seed,
            horizon: s.horizon(),
            dt_h: s.dt_h(),
            terminal_work: self.state.work,
            terminal_shortfall: terminal_shortfall(&self.state),
            terminal_soc_deviation: self.state.e_bess - s.aidc.bess.e_init_mwh(),
            steps: self.steps,
            abort,
        }
    }
}

/// Runs the full horizon. Failures end the episode early; the partial
/// record carries the diagnostic.
pub fn run_episode(ctx: &SimContext, policy: &mut dyn PlanningPolicy) -> EpisodeRecord {
    policy.reset(&ctx.scenario.trace);
    let mut ep = Episode::new(ctx);
    let mut abort = None;
    while !ep.done() {
        let obs = ep.observation();
        let result = policy
            .act(&obs, &ctx.scenario.aidc)
            .map_err(SimError::from)
            .and_then(|a| ep.step(a).map(|_| ()));
        if let Err(e) = result {
            log::warn!("episode aborted at step {}: {e}", ep.t());
            abort = Some(EpisodeAbort {
                t: ep.t(),
                infeasible: e.is_infeasible(),
                message: e.to_string(),
            });
            break;
        }
    }
    ep.finish(&policy.name(), abort)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reward_examples() {
        let cfg = AidcConfig::default();
        let mut state = AidcState::initial(&cfg, 96, 0.25);
        state.apply([1.0, 1.0, 0.0], 270.0, 0.25);
        let r = step_reward(&state, 0.0, 0.0, 0.25, 1, 96, &cfg);
        assert_eq!(r.total, 0.0);
        let r = step_reward(&state, 0.0, 64.8, 0.25, 1, 96, &cfg);
        assert!((r.total + 0.324).abs() < 1e-12);
        let r = step_reward(&state, 0.2, 0.0, 0.25, 1, 96, &cfg);
        assert!((r.rejection + 0.15).abs() < 1e-12);
        assert_eq!(r.total, r.workload + r.rejection + r.curtailment);
    }

    #[test]
    fn shortfall_is_relative_to_the_uniform_pace() {
        let cfg = AidcConfig::default();
        let mut state = AidcState::initial(&cfg, 96, 0.25);
        state.work = [0.0, state.target[1]];
        let eta = schedule_shortfall(&state, 48, 96);
        assert!((eta[0] - 0.5).abs() < 1e-12);
        assert_eq!(eta[1], 0.0);
    }

    #[test]
    fn bess_plan_respects_soc_headroom() {
        let cfg = AidcConfig::default();
        let state = AidcState::initial(&cfg, 96, 0.25);
        let a = PlanningAction::new(1.0, 1.0, 1.0, 1.0, 0.0);
        let p = clip_bess_plan(&a, &state, 0.25, &cfg);
        let cap = 30.0 / (0.95 * 0.25);
        assert!((p.phi_ch * 200.0 - cap).abs() < 1e-9);
        let a = PlanningAction::new(1.0, 1.0, 1.0, 0.3, 0.8);
        let p = clip_bess_plan(&a, &state, 0.25, &cfg);
        assert_eq!(p.phi_ch, 0.0);
        assert!((p.phi_dis - 0.5).abs() < 1e-12);
    }
}

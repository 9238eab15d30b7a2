//! Data-center physics behind the PCC: cluster power curves, cooling and
//! conversion losses, battery dynamics, and the per-step execution optimizer.

mod execution;

pub use execution::{
    execute_step, feasibility_check, operating_range, CheckItem, Decision, ExecutionResult,
    FeasibilityReport,
};

use serde::{Deserialize, Serialize};

use crate::scenario::{AidcConfig, BessSpec, ClusterSpec};

/// Balance and bound checks use this absolute tolerance (MW, MWh or unitless).
pub const PLANT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlantError {
    #[error("throughput {0} outside [0,1]")]
    ThroughputOutOfRange(f64),
    #[error("energy {energy:.6} MWh leaves [{min}, {max}] after the step")]
    SocOutOfBounds { energy: f64, min: f64, max: f64 },
    #[error("accepted power {p_acc:.3} MW outside the operating range [{min:.3}, {max:.3}] MW")]
    OutsideOperatingRange { p_acc: f64, min: f64, max: f64 },
    #[error("planning action component {index} = {value} outside [0,1]")]
    ActionOutOfRange { index: usize, value: f64 },
    #[error("execution LP failed: {0}")]
    Solver(String),
}

/// Planning targets and normalized battery fractions, all in `[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanningAction {
    pub s_1a: f64,
    pub s_1b: f64,
    pub s_2: f64,
    pub phi_ch: f64,
    pub phi_dis: f64,
}

impl PlanningAction {
    pub fn new(s_1a: f64, s_1b: f64, s_2: f64, phi_ch: f64, phi_dis: f64) -> Self {
        Self {
            s_1a,
            s_1b,
            s_2,
            phi_ch,
            phi_dis,
        }
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.s_1a, self.s_1b, self.s_2, self.phi_ch, self.phi_dis]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }

    pub fn targets(&self) -> [f64; 3] {
        [self.s_1a, self.s_1b, self.s_2]
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        for (index, value) in self.to_array().into_iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(PlantError::ActionOutOfRange { index, value });
            }
        }
        Ok(())
    }
}

/// Evolving plant state. Work quantities are throughput-hours.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AidcState {
    pub e_bess: f64,
    pub s_prev: [f64; 3],
    /// Delivered work `W_k` for the two training groups.
    pub work: [f64; 2],
    /// Remaining targets `R_k = target_k - W_k`, never below zero.
    pub remaining: [f64; 2],
    /// Per-group target `w_req,k * T * dt`.
    pub target: [f64; 2],
}

impl AidcState {
    /// Start-of-episode state: initial SoC, full remaining targets, and the
    /// previous throughput taken as the workload target (on-schedule pace).
    pub fn initial(cfg: &AidcConfig, horizon: usize, dt_h: f64) -> Self {
        let target = [
            cfg.frontier.w_req * horizon as f64 * dt_h,
            cfg.batch.w_req * horizon as f64 * dt_h,
        ];
        Self {
            e_bess: cfg.bess.e_init_mwh(),
            s_prev: [cfg.frontier.w_req, cfg.batch.w_req, 0.0],
            work: [0.0; 2],
            remaining: target,
            target,
        }
    }

    /// Applies executed throughputs and the new battery energy.
    pub fn apply(&mut self, s: [f64; 3], e_bess: f64, dt_h: f64) {
        for k in 0..2 {
            self.work[k] += s[k] * dt_h;
            self.remaining[k] = (self.target[k] - self.work[k]).max(0.0);
        }
        self.s_prev = s;
        self.e_bess = e_bess;
    }

    pub fn soc_fraction(&self, bess: &BessSpec) -> f64 {
        self.e_bess / bess.e_max_mwh
    }
}

/// Group IT power at throughput `s`.
pub fn it_power(spec: &ClusterSpec, s: f64) -> Result<f64, PlantError> {
    if !(-PLANT_TOL..=1.0 + PLANT_TOL).contains(&s) {
        return Err(PlantError::ThroughputOutOfRange(s));
    }
    let s = s.clamp(0.0, 1.0);
    Ok(spec.p_idle_mw() + (spec.p_peak_mw - spec.p_idle_mw()) * s)
}

/// Grid-side draw `(P_IT + P_ch - P_dis)/eta_IPCS + gamma P_IT`.
pub fn facility_power(s: [f64; 3], p_ch: f64, p_dis: f64, cfg: &AidcConfig) -> Result<f64, PlantError> {
    let mut p_it = 0.0;
    for (spec, sk) in cfg.clusters().into_iter().zip(s) {
        p_it += it_power(spec, sk)?;
    }
    let p = (p_it + p_ch - p_dis) / cfg.eta_ipcs + cfg.gamma * p_it;
    debug_assert!(p >= 0.0 || p_dis > cfg.bess.p_max_mw, "negative facility power");
    Ok(p)
}

/// Battery energy after one step.
pub fn soc_step(e: f64, p_ch: f64, p_dis: f64, dt_h: f64, spec: &BessSpec) -> Result<f64, PlantError> {
    let next = e + (spec.eta_ch * p_ch - p_dis / spec.eta_dis) * dt_h;
    if next < spec.e_min_mwh - PLANT_TOL || next > spec.e_max_mwh + PLANT_TOL {
        return Err(PlantError::SocOutOfBounds {
            energy: next,
            min: spec.e_min_mwh,
            max: spec.e_max_mwh,
        });
    }
    Ok(next.clamp(spec.e_min_mwh, spec.e_max_mwh))
}

/// Charge and discharge limits (MW) that keep the next SoC within bounds.
pub fn bess_limits(e: f64, dt_h: f64, spec: &BessSpec) -> (f64, f64) {
    let ch = ((spec.e_max_mwh - e) / (spec.eta_ch * dt_h)).clamp(0.0, spec.p_max_mw);
    let dis = ((e - spec.e_min_mwh) * spec.eta_dis / dt_h).clamp(0.0, spec.p_max_mw);
    (ch, dis)
}

/// End-of-horizon under-delivery `max(0, target_k - W_k(T))`, throughput-hours.
pub fn terminal_shortfall(state: &AidcState) -> [f64; 2] {
    [
        (state.target[0] - state.work[0]).max(0.0),
        (state.target[1] - state.work[1]).max(0.0),
    ]
}

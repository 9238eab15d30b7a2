use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClusterId {
    #[serde(rename = "1a")]
    Frontier,
    #[serde(rename = "1b")]
    Batch,
    #[serde(rename = "2")]
    Inference,
}

impl ClusterId {
    pub const ALL: [ClusterId; 3] = [ClusterId::Frontier, ClusterId::Batch, ClusterId::Inference];

    pub fn label(self) -> &'static str {
        match self {
            ClusterId::Frontier => "1a",
            ClusterId::Batch => "1b",
            ClusterId::Inference => "2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Frontier,
    Batch,
    Inference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub id: ClusterId,
    pub role: Role,
    pub accelerators: u32,
    pub p_peak_mw: f64,
    pub idle_ratio: f64,
    /// Fraction of horizon-peak throughput to deliver. Ignored for inference.
    #[serde(default)]
    pub w_req: f64,
}

impl ClusterSpec {
    pub fn p_idle_mw(&self) -> f64 {
        self.idle_ratio * self.p_peak_mw
    }

    fn check(&self, issues: &mut Vec<String>) {
        let id = self.id.label();
        if !(0.0..1.0).contains(&self.idle_ratio) {
            issues.push(format!("cluster {id}: idle ratio {} outside [0,1)", self.idle_ratio));
        }
        if !(self.p_peak_mw > 0.0) {
            issues.push(format!("cluster {id}: peak power must be positive"));
        }
        if self.id != ClusterId::Inference && !(0.0..=1.0).contains(&self.w_req) {
            issues.push(format!("cluster {id}: workload target {} outside [0,1]", self.w_req));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BessSpec {
    pub p_max_mw: f64,
    pub e_min_mwh: f64,
    pub e_max_mwh: f64,
    pub eta_ch: f64,
    pub eta_dis: f64,
    pub soc_init_fraction: f64,
    /// Cycling cost, AUD/MWh throughput.
    pub c_cyc: f64,
}

impl BessSpec {
    pub fn e_init_mwh(&self) -> f64 {
        self.soc_init_fraction * self.e_max_mwh
    }

    fn check(&self, issues: &mut Vec<String>) {
        if !(0.0 <= self.e_min_mwh && self.e_min_mwh < self.e_max_mwh) {
            issues.push(format!(
                "bess: need 0 <= E_min < E_max, got {} and {}",
                self.e_min_mwh, self.e_max_mwh
            ));
        }
        for (name, eta) in [("eta_ch", self.eta_ch), ("eta_dis", self.eta_dis)] {
            if !(eta > 0.0 && eta <= 1.0) {
                issues.push(format!("bess: {name} {eta} outside (0,1]"));
            }
        }
        let e0 = self.e_init_mwh();
        if !(self.e_min_mwh <= e0 && e0 <= self.e_max_mwh) {
            issues.push(format!("bess: initial energy {e0} outside [E_min, E_max]"));
        }
        if !(self.p_max_mw >= 0.0) {
            issues.push("bess: power rating must be nonnegative".to_string());
        }
        if !(self.c_cyc >= 0.0) {
            issues.push("bess: cycling cost must be nonnegative".to_string());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Penalties {
    pub m_1a: f64,
    pub m_1b: f64,
    pub alpha_w: f64,
    pub alpha_rej: f64,
    pub alpha_kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AidcConfig {
    pub frontier: ClusterSpec,
    pub batch: ClusterSpec,
    pub inference: ClusterSpec,
    pub gamma: f64,
    pub eta_ipcs: f64,
    pub bess: BessSpec,
    pub penalties: Penalties,
    /// Tracking weight of the execution optimizer.
    pub lambda: f64,
}

impl Default for AidcConfig {
    fn default() -> Self {
        let cluster = |id, role, accelerators, p_peak_mw, idle_ratio, w_req| ClusterSpec {
            id,
            role,
            accelerators,
            p_peak_mw,
            idle_ratio,
            w_req,
        };
        Self {
            frontier: cluster(ClusterId::Frontier, Role::Frontier, 400_000, 550.0, 0.30, 0.94),
            batch: cluster(ClusterId::Batch, Role::Batch, 160_000, 220.0, 0.25, 0.94),
            inference: cluster(ClusterId::Inference, Role::Inference, 240_000, 330.0, 0.20, 0.0),
            gamma: 0.10,
            eta_ipcs: 0.95,
            bess: BessSpec {
                p_max_mw: 200.0,
                e_min_mwh: 30.0,
                e_max_mwh: 300.0,
                eta_ch: 0.95,
                eta_dis: 0.95,
                soc_init_fraction: 0.9,
                c_cyc: 0.5,
            },
            penalties: Penalties {
                m_1a: 100.0,
                m_1b: 50.0,
                alpha_w: 0.01,
                alpha_rej: 3.0,
                alpha_kappa: 0.005,
            },
            lambda: 100.0,
        }
    }
}

impl AidcConfig {
    pub fn clusters(&self) -> [&ClusterSpec; 3] {
        [&self.frontier, &self.batch, &self.inference]
    }

    pub fn cluster(&self, id: ClusterId) -> &ClusterSpec {
        match id {
            ClusterId::Frontier => &self.frontier,
            ClusterId::Batch => &self.batch,
            ClusterId::Inference => &self.inference,
        }
    }

    /// Grid-side multiplier on IT power, `1/eta_IPCS + gamma`.
    pub fn it_multiplier(&self) -> f64 {
        1.0 / self.eta_ipcs + self.gamma
    }

    pub fn peak_request_mw(&self) -> f64 {
        self.it_multiplier() * self.clusters().iter().map(|c| c.p_peak_mw).sum::<f64>()
    }

    pub fn idle_floor_mw(&self) -> f64 {
        self.it_multiplier() * self.clusters().iter().map(|c| c.p_idle_mw()).sum::<f64>()
    }

    pub fn check(&self) -> Vec<String> {
        let mut issues = Vec::new();
        for (want, c) in ClusterId::ALL.iter().zip(self.clusters()) {
            if c.id != *want {
                issues.push(format!("cluster slot {} holds id {}", want.label(), c.id.label()));
            }
            c.check(&mut issues);
        }
        if !(self.gamma >= 0.0) {
            issues.push(format!("cooling overhead {} is negative", self.gamma));
        }
        if !(self.eta_ipcs > 0.0 && self.eta_ipcs <= 1.0) {
            issues.push(format!("IPCS efficiency {} outside (0,1]", self.eta_ipcs));
        }
        let p = &self.penalties;
        if !(p.m_1a > p.m_1b && p.m_1b > 0.0) {
            issues.push(format!(
                "urgency penalties need M_1a > M_1b > 0, got {} and {}",
                p.m_1a, p.m_1b
            ));
        }
        for (name, v) in [
            ("alpha_w", p.alpha_w),
            ("alpha_rej", p.alpha_rej),
            ("alpha_kappa", p.alpha_kappa),
            ("lambda", self.lambda),
        ] {
            if !(v >= 0.0) {
                issues.push(format!("{name} must be nonnegative"));
            }
        }
        self.bess.check(&mut issues);
        issues
    }
}

/// How generators share a total-demand deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParticipationRule {
    /// Proportional to `g_max - g_min`.
    #[default]
    Headroom,
    /// Proportional to `g_max`.
    Capacity,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsoConfig {
    pub gamma_u: f64,
    pub epsilon: f64,
    pub gamma_kappa: f64,
    pub rho: f64,
    /// PCC ramp limit, MW per step.
    pub r_grid_mw: f64,
    #[serde(default)]
    pub participation: ParticipationRule,
}

impl Default for TsoConfig {
    fn default() -> Self {
        Self {
            gamma_u: 5.0,
            epsilon: 0.07,
            gamma_kappa: 1e5,
            rho: 1.0,
            r_grid_mw: 150.0,
            participation: ParticipationRule::Headroom,
        }
    }
}

impl TsoConfig {
    pub fn check(&self, max_cost: f64, n_buses: usize) -> Vec<String> {
        let mut issues = Vec::new();
        if !(self.gamma_kappa > max_cost && max_cost > self.rho) {
            issues.push(format!(
                "cost ordering violated: need gamma_kappa ({}) > max generator cost ({}) > rho ({})",
                self.gamma_kappa, max_cost, self.rho
            ));
        }
        if !(self.gamma_u >= 0.0) {
            issues.push(format!("budget {} is negative", self.gamma_u));
        }
        if self.gamma_u > n_buses as f64 {
            issues.push(format!(
                "budget {} exceeds the number of buses {}",
                self.gamma_u, n_buses
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            issues.push(format!("deviation ratio {} outside (0,1)", self.epsilon));
        }
        if !(self.r_grid_mw >= 0.0) {
            issues.push("PCC ramp limit must be nonnegative".to_string());
        }
        if !(self.rho >= 0.0) {
            issues.push("baseline-deviation weight must be nonnegative".to_string());
        }
        issues
    }
}

/// Divisors applied to raw observation features before they reach a neural
/// policy or the environment wire protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureScales {
    pub energy_mwh: f64,
    /// Remaining-work features are divided by the group target times this.
    pub work_fraction: f64,
    pub power_mw: f64,
    pub price_aud_mwh: f64,
    pub demand_mw: f64,
}

impl Default for FeatureScales {
    fn default() -> Self {
        Self {
            energy_mwh: 300.0,
            work_fraction: 1.0,
            power_mw: 1268.0,
            price_aud_mwh: 300.0,
            demand_mw: 10_000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicConfig {
    pub peak_percentile: f64,
    pub peak_frontier: f64,
    pub peak_batch: f64,
    pub urgency_trigger: f64,
    pub urgency_bump: f64,
    pub discharge_above_soc: f64,
    pub discharge_fraction: f64,
    pub charge_below_soc: f64,
    pub charge_fraction: f64,
    /// Trailing window (steps) for the percentile; `None` uses the full trace.
    pub trailing_window: Option<usize>,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Self {
            peak_percentile: 75.0,
            peak_frontier: 0.8,
            peak_batch: 0.2,
            urgency_trigger: 1.05,
            urgency_bump: 0.1,
            discharge_above_soc: 0.6,
            discharge_fraction: 0.5,
            charge_below_soc: 0.9,
            charge_fraction: 0.5,
            trailing_window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub heuristic: HeuristicConfig,
    pub scales: FeatureScales,
    /// Constant target used by the fixed-buffer policy.
    pub fixed_buffer_level: Option<f64>,
}

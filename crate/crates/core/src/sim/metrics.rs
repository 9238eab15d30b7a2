use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::policies::percentile;
use crate::scenario::ExogenousTrace;

use super::{schedule_shortfall, EpisodeRecord, RewardBreakdown};

/// Battery power below this counts as idle (MW).
const BESS_IDLE_MW: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RegimeMeans {
    pub steps: usize,
    pub p_req_mw: f64,
    pub kappa_mw: f64,
    pub s_1a: f64,
    pub s_1b: f64,
    pub s_2: f64,
}

impl RegimeMeans {
    fn of<'a>(rows: impl Iterator<Item = &'a super::StepRecord>) -> Self {
        let mut m = Self::default();
        for r in rows {
            m.steps += 1;
            m.p_req_mw += r.p_req;
            m.kappa_mw += r.kappa;
            m.s_1a += r.execution.s[0];
            m.s_1b += r.execution.s[1];
            m.s_2 += r.execution.s[2];
        }
        if m.steps > 0 {
            let n = m.steps as f64;
            m.p_req_mw /= n;
            m.kappa_mw /= n;
            m.s_1a /= n;
            m.s_1b /= n;
            m.s_2 /= n;
        }
        m
    }

    fn minus(&self, other: &Self) -> Self {
        Self {
            steps: 0,
            p_req_mw: self.p_req_mw - other.p_req_mw,
            kappa_mw: self.kappa_mw - other.kappa_mw,
            s_1a: self.s_1a - other.s_1a,
            s_1b: self.s_1b - other.s_1b,
            s_2: self.s_2 - other.s_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub policy: String,
    pub seed: u64,
    pub horizon: usize,
    pub steps: usize,
    pub completed: bool,
    pub abort: Option<String>,
    pub cumulative_reward: RewardBreakdown,
    pub mean_kappa_mw: f64,
    pub curtailment_events: usize,
    /// Percent of executed steps with positive curtailment.
    pub curtailment_frequency_pct: f64,
    pub curtailed_energy_mwh: f64,
    pub mechanism_counts: BTreeMap<String, usize>,
    /// Delivered work as percent of each training target.
    pub work_pct: [f64; 2],
    pub terminal_shortfall: [f64; 2],
    pub terminal_soc_deviation_mwh: f64,
    pub peak_demand_threshold_mw: f64,
    pub off_peak_demand_threshold_mw: f64,
    pub peak: RegimeMeans,
    pub off_peak: RegimeMeans,
    /// Off-peak minus peak.
    pub delta: RegimeMeans,
    /// Percent behind the uniform schedule after each step, per training group.
    pub completion_lag_pct: Vec<[f64; 2]>,
    pub max_completion_lag_pct: [f64; 2],
    pub bess_idle_pct: f64,
}

/// Peak steps have demand at or above the 75th percentile of the trace,
/// off-peak steps at or below the 25th.
pub fn compute_metrics(ep: &EpisodeRecord, trace: &ExogenousTrace) -> MetricsReport {
    let n = ep.steps.len();
    let pct = |count: usize| if n == 0 { 0.0 } else { 100.0 * count as f64 / n as f64 };
    let mut cumulative = RewardBreakdown::default();
    let mut mechanism_counts = BTreeMap::new();
    let (mut kappa_sum, mut events, mut idle) = (0.0, 0, 0);
    let mut completion_lag_pct = Vec::with_capacity(n);
    let mut max_lag = [0.0f64; 2];
    for r in &ep.steps {
        cumulative.total += r.reward.total;
        cumulative.workload += r.reward.workload;
        cumulative.rejection += r.reward.rejection;
        cumulative.curtailment += r.reward.curtailment;
        kappa_sum += r.kappa;
        if r.kappa > 0.0 {
            events += 1;
            *mechanism_counts.entry(r.mechanism.to_string()).or_insert(0) += 1;
        }
        if r.execution.p_ch <= BESS_IDLE_MW && r.execution.p_dis <= BESS_IDLE_MW {
            idle += 1;
        }
        let lag = schedule_shortfall(&r.state, r.t, ep.horizon).map(|v| 100.0 * v);
        max_lag = [max_lag[0].max(lag[0]), max_lag[1].max(lag[1])];
        completion_lag_pct.push(lag);
    }
    let work_pct = match ep.steps.last() {
        Some(r) => [0, 1].map(|k| {
            if r.state.target[k] > 0.0 {
                100.0 * r.state.work[k] / r.state.target[k]
            } else {
                100.0
            }
        }),
        None => [0.0; 2],
    };
    let demand = &trace.demand;
    let hi = percentile(demand, 75.0);
    let lo = percentile(demand, 25.0);
    let peak = RegimeMeans::of(ep.steps.iter().filter(|r| demand[r.t - 1] >= hi));
    let off_peak = RegimeMeans::of(ep.steps.iter().filter(|r| demand[r.t - 1] <= lo));
    let delta = off_peak.minus(&peak);
    MetricsReport {
        scenario: ep.scenario.clone(),
        policy: ep.policy.clone(),
        seed: ep.seed,
        horizon: ep.horizon,
        steps: n,
        completed: ep.completed(),
        abort: ep.abort.as_ref().map(|a| a.message.clone()),
        cumulative_reward: cumulative,
        mean_kappa_mw: if n == 0 { 0.0 } else { kappa_sum / n as f64 },
        curtailment_events: events,
        curtailment_frequency_pct: pct(events),
        curtailed_energy_mwh: kappa_sum * ep.dt_h,
        mechanism_counts,
        work_pct,
        terminal_shortfall: ep.terminal_shortfall,
        terminal_soc_deviation_mwh: ep.terminal_soc_deviation,
        peak_demand_threshold_mw: hi,
        off_peak_demand_threshold_mw: lo,
        peak,
        off_peak,
        delta,
        completion_lag_pct,
        max_completion_lag_pct: max_lag,
        bess_idle_pct: pct(idle),
    }
}

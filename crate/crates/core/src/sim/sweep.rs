use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

use crate::policies::PlanningPolicy;

use super::{compute_metrics, run_episode, SimContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepStatus {
    Ok,
    /// The acceptance problem had no protected solution at some step.
    Infeasible,
    /// Invalid parameters or a non-grid failure.
    Failed,
}

impl SweepStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepStatus::Ok => "ok",
            SweepStatus::Infeasible => "infeasible",
            SweepStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub gamma: f64,
    pub eps: f64,
    pub status: SweepStatus,
    /// `None` unless the episode completed.
    pub curtail_freq: Option<f64>,
    pub events: usize,
    pub mechanism_counts: BTreeMap<String, usize>,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub gammas: Vec<f64>,
    pub eps: Vec<f64>,
    /// Row-major over `gammas` then `eps`.
    pub cells: Vec<SweepCell>,
}

impl SweepReport {
    pub fn cell(&self, gi: usize, ei: usize) -> &SweepCell {
        &self.cells[gi * self.eps.len() + ei]
    }
}

/// Runs one episode per `(gamma, eps)` pair. Cells are independent and run
/// in parallel; the baseline dispatch in `ctx` is shared.
pub fn sweep(
    ctx: &SimContext,
    gammas: &[f64],
    eps: &[f64],
    make_policy: &(dyn Fn() -> Box<dyn PlanningPolicy> + Sync),
) -> SweepReport {
    assert!(!gammas.is_empty() && !eps.is_empty(), "sweep axes must be nonempty");
    let pairs: Vec<(f64, f64)> = gammas
        .iter()
        .flat_map(|&g| eps.iter().map(move |&e| (g, e)))
        .collect();
    let cells = pairs
        .par_iter()
        .map(|&(gamma, e)| {
            let mut tso = ctx.scenario.tso.clone();
            tso.gamma_u = gamma;
            tso.epsilon = e;
            let issues = tso.check(ctx.grid.max_cost(), ctx.grid.n_buses());
            if !issues.is_empty() {
                return SweepCell {
                    gamma,
                    eps: e,
                    status: SweepStatus::Failed,
                    curtail_freq: None,
                    events: 0,
                    mechanism_counts: BTreeMap::new(),
                    detail: Some(issues.join("; ")),
                };
            }
            let cell_ctx = ctx.with_tso(tso);
            let mut policy = make_policy();
            let ep = run_episode(&cell_ctx, policy.as_mut());
            let m = compute_metrics(&ep, &cell_ctx.scenario.trace);
            let status = match &ep.abort {
                None => SweepStatus::Ok,
                Some(a) if a.infeasible => SweepStatus::Infeasible,
                Some(_) => SweepStatus::Failed,
            };
            log::info!("sweep cell gamma={gamma} eps={e}: {}", status.as_str());
            SweepCell {
                gamma,
                eps: e,
                status,
                curtail_freq: (status == SweepStatus::Ok).then_some(m.curtailment_frequency_pct),
                events: m.curtailment_events,
                mechanism_counts: m.mechanism_counts,
                detail: ep.abort.map(|a| a.message),
            }
        })
        .collect();
    SweepReport {
        gammas: gammas.to_vec(),
        eps: eps.to_vec(),
        cells,
    }
}

use serde::Serialize;

use crate::lp::{LinearProgram, LpStatus, Relation};
use crate::scenario::AidcConfig;

use super::{bess_limits, facility_power, it_power, AidcState, PlanningAction, PlantError, PLANT_TOL};

/// Executed operating point of one step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecutionResult {
    pub s: [f64; 3],
    pub p_ch: f64,
    pub p_dis: f64,
    /// `true` for the charging branch (`beta = 1`).
    pub charge_mode: bool,
    pub p_it: [f64; 3],
    pub p_it_total: f64,
    pub p_cool: f64,
    pub u: [f64; 3],
    /// Rejected inference rate `d_inf - s_2`.
    pub r_2: f64,
    /// `P_acc - facility_power(executed)`, MW.
    pub residual: f64,
    pub objective: f64,
    pub e_next: f64,
}

impl ExecutionResult {
    pub fn decision(&self) -> Decision {
        Decision {
            s: self.s,
            p_ch: self.p_ch,
            p_dis: self.p_dis,
            charge_mode: Some(self.charge_mode),
        }
    }
}

/// Smallest and largest import the plant can absorb at this step.
pub fn operating_range(state: &AidcState, d_inf: f64, dt_h: f64, cfg: &AidcConfig) -> (f64, f64) {
    let (ch, dis) = bess_limits(state.e_bess, dt_h, &cfg.bess);
    let m = cfg.it_multiplier();
    let idle: f64 = cfg.clusters().iter().map(|c| c.p_idle_mw()).sum();
    let top = cfg.frontier.p_peak_mw
        + cfg.batch.p_peak_mw
        + cfg.inference.p_idle_mw()
        + (cfg.inference.p_peak_mw - cfg.inference.p_idle_mw()) * d_inf;
    (m * idle - dis / cfg.eta_ipcs, m * top + ch / cfg.eta_ipcs)
}

struct Branch {
    objective: f64,
    s: [f64; 3],
    p_ch: f64,
    p_dis: f64,
    u: [f64; 3],
}

fn solve_branch(
    targets: [f64; 3],
    p_acc: f64,
    d_inf: f64,
    dt_h: f64,
    caps: (f64, f64),
    charge: bool,
    cfg: &AidcConfig,
) -> Result<Option<Branch>, PlantError> {
    let m = cfg.it_multiplier();
    let clusters = cfg.clusters();
    let mut lp = LinearProgram::<f64>::new();
    let s: Vec<_> = ["s_1a", "s_1b", "s_2"]
        .iter()
        .enumerate()
        .map(|(k, name)| lp.add_var(*name, 0.0, if k == 2 { d_inf } else { 1.0 }, 0.0))
        .collect();
    let cyc = cfg.bess.c_cyc * dt_h;
    let p_ch = lp.add_var("p_ch", 0.0, if charge { caps.0 } else { 0.0 }, cyc);
    let p_dis = lp.add_var("p_dis", 0.0, if charge { 0.0 } else { caps.1 }, cyc);
    let u: Vec<_> = (0..3)
        .map(|k| lp.add_var(format!("u{k}"), 0.0, f64::INFINITY, cfg.lambda))
        .collect();
    for k in 0..3 {
        lp.add_constraint(format!("track_hi{k}"), [(u[k], 1.0), (s[k], -1.0)], Relation::Ge, -targets[k]);
        lp.add_constraint(format!("track_lo{k}"), [(u[k], 1.0), (s[k], 1.0)], Relation::Ge, targets[k]);
    }
    let idle: f64 = clusters.iter().map(|c| c.p_idle_mw()).sum();
    let terms: Vec<_> = clusters
        .iter()
        .zip(&s)
        .map(|(c, v)| (*v, m * (c.p_peak_mw - c.p_idle_mw())))
        .chain([(p_ch, 1.0 / cfg.eta_ipcs), (p_dis, -1.0 / cfg.eta_ipcs)])
        .collect();
    lp.add_constraint("balance", terms, Relation::Eq, p_acc - m * idle);

    let sol = lp.solve().map_err(|e| PlantError::Solver(e.to_string()))?;
    match sol.status {
        LpStatus::Optimal => Ok(Some(Branch {
            objective: sol.objective,
            s: [0, 1, 2].map(|k| sol.value(s[k])),
            p_ch: sol.value(p_ch),
            p_dis: sol.value(p_dis),
            u: [0, 1, 2].map(|k| sol.value(u[k])),
        })),
        LpStatus::Infeasible => Ok(None),
        other => Err(PlantError::Solver(format!(
            "{other:?} {}",
            sol.diagnostics.unwrap_or_default()
        ))),
    }
}

/// Allocates the accepted import across clusters and battery, minimizing
/// tracking error plus cycling cost. The single mode binary is resolved by
/// solving the discharge and charge branches and keeping the cheaper one
/// (discharge on ties).
pub fn execute_step(
    action: &PlanningAction,
    p_acc: f64,
    state: &AidcState,
    d_inf: f64,
    dt_h: f64,
    cfg: &AidcConfig,
) -> Result<ExecutionResult, PlantError> {
    action.validate()?;
    let (min, max) = operating_range(state, d_inf, dt_h, cfg);
    if !(p_acc >= min - PLANT_TOL && p_acc <= max + PLANT_TOL) {
        return Err(PlantError::OutsideOperatingRange { p_acc, min, max });
    }
    let targets = [action.s_1a, action.s_1b, action.s_2.min(d_inf)];
    let caps = bess_limits(state.e_bess, dt_h, &cfg.bess);
    let dis = solve_branch(targets, p_acc, d_inf, dt_h, caps, false, cfg)?;
    let ch = solve_branch(targets, p_acc, d_inf, dt_h, caps, true, cfg)?;
    let (best, charge_mode) = match (dis, ch) {
        (Some(d), Some(c)) if c.objective < d.objective - 1e-12 => (c, true),
        (Some(d), _) => (d, false),
        (None, Some(c)) => (c, true),
        (None, None) => {
            return Err(PlantError::Solver(format!(
                "both branches infeasible at P_acc = {p_acc} MW"
            )))
        }
    };
    let s = [
        best.s[0].clamp(0.0, 1.0),
        best.s[1].clamp(0.0, 1.0),
        best.s[2].clamp(0.0, d_inf),
    ];
    let (p_ch, p_dis) = (best.p_ch.max(0.0), best.p_dis.max(0.0));
    let clusters = cfg.clusters();
    let p_it = [0, 1, 2].map(|k| it_power(clusters[k], s[k]).expect("clamped"));
    let p_it_total = p_it.iter().sum::<f64>();
    let residual = p_acc - facility_power(s, p_ch, p_dis, cfg)?;
    let e_next = super::soc_step(state.e_bess, p_ch, p_dis, dt_h, &cfg.bess)?;
    Ok(ExecutionResult {
        s,
        p_ch,
        p_dis,
        charge_mode,
        p_it,
        p_it_total,
        p_cool: cfg.gamma * p_it_total,
        u: best.u,
        r_2: d_inf - s[2],
        residual,
        objective: best.objective,
        e_next,
    })
}

/// A candidate operating point, as checked by [`feasibility_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub s: [f64; 3],
    pub p_ch: f64,
    pub p_dis: f64,
    /// Battery mode; `None` infers charging from `p_ch > 0`.
    pub charge_mode: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckItem {
    pub name: &'static str,
    /// Nonnegative when satisfied; for equalities, minus the absolute residual.
    pub slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub items: Vec<CheckItem>,
}

impl FeasibilityReport {
    pub fn all_pass(&self) -> bool {
        self.items.iter().all(|i| i.pass)
    }

    pub fn item(&self, name: &str) -> Option<&CheckItem> {
        self.items.iter().find(|i| i.name == name)
    }

    pub fn failures(&self) -> Vec<&CheckItem> {
        self.items.iter().filter(|i| !i.pass).collect()
    }
}

/// Itemized admissibility of `x` for import `p_acc`.
pub fn feasibility_check(
    x: &Decision,
    p_acc: f64,
    state: &AidcState,
    d_inf: f64,
    dt_h: f64,
    cfg: &AidcConfig,
) -> FeasibilityReport {
    let mut items = Vec::new();
    let mut ineq = |name: &'static str, slack: f64| {
        items.push(CheckItem {
            name,
            slack,
            pass: slack >= -PLANT_TOL,
        })
    };
    let names = [
        ("throughput_1a_lower", "throughput_1a_upper"),
        ("throughput_1b_lower", "throughput_1b_upper"),
        ("throughput_2_lower", "throughput_2_upper"),
    ];
    for (k, (lo, hi)) in names.iter().enumerate() {
        ineq(lo, x.s[k]);
        ineq(hi, 1.0 - x.s[k]);
    }
    ineq("inference_within_demand", d_inf - x.s[2]);
    let charge = x.charge_mode.unwrap_or(x.p_ch > 0.0);
    let beta = if charge { 1.0 } else { 0.0 };
    let pmax = cfg.bess.p_max_mw;
    ineq("charge_nonnegative", x.p_ch);
    ineq("discharge_nonnegative", x.p_dis);
    ineq("charge_bound", beta * pmax - x.p_ch);
    ineq("discharge_bound", (1.0 - beta) * pmax - x.p_dis);
    let e_next = state.e_bess
        + (cfg.bess.eta_ch * x.p_ch - x.p_dis / cfg.bess.eta_dis) * dt_h;
    ineq("soc_lower", e_next - cfg.bess.e_min_mwh);
    ineq("soc_upper", cfg.bess.e_max_mwh - e_next);
    ineq("import_nonnegative", p_acc);
    let in_range = x.s.iter().all(|v| (-PLANT_TOL..=1.0 + PLANT_TOL).contains(v));
    let residual = if in_range {
        let s = x.s.map(|v| v.clamp(0.0, 1.0));
        (p_acc - facility_power(s, x.p_ch, x.p_dis, cfg).expect("clamped")).abs()
    } else {
        f64::INFINITY
    };
    items.push(CheckItem {
        name: "power_balance",
        slack: -residual,
        pass: residual <= PLANT_TOL,
    });
    FeasibilityReport { items }
}

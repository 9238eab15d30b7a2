use serde::{Deserialize, Serialize};
use std::fmt;

use crate::lp::{LinearProgram, LpSolution, LpStatus, Relation, VarId};
use crate::scenario::{ExogenousTrace, NetworkCase, TsoConfig};

use super::{step_flows, BaselineDispatch, GridError, ProtectionTerms, PtdfMatrix};

/// Curtailment at or below this is reported as exactly zero.
pub const KAPPA_TOL: f64 = 1e-7;
/// A counterfactual must lower curtailment by more than this to count.
const ATTRIBUTION_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    None,
    Congestion,
    Ramp,
    Robustness,
    Mixed,
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mechanism::None => "none",
            Mechanism::Congestion => "congestion",
            Mechanism::Ramp => "ramp",
            Mechanism::Robustness => "robustness",
            Mechanism::Mixed => "mixed",
        })
    }
}

/// Realized quantities the next step couples to.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TsoState {
    /// `None` before the first step; generator ramps are then inactive.
    pub g_prev: Option<Vec<f64>>,
    /// `None` before the first step; the PCC ramp is then inactive.
    pub p_acc_prev: Option<f64>,
}

impl TsoState {
    pub fn advance(&mut self, outcome: &AcceptanceOutcome) {
        self.g_prev = Some(outcome.g.clone());
        self.p_acc_prev = Some(outcome.p_acc);
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct AcceptanceDiagnostics {
    pub lp_solves: usize,
    pub iterations: usize,
    pub max_violation: f64,
    /// Curtailment with protection removed (only solved when curtailing).
    pub kappa_unprotected: Option<f64>,
    /// Curtailment with protection and both ramp limits removed.
    pub kappa_relaxed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcceptanceOutcome {
    /// Zero-based step index.
    pub t: usize,
    pub p_req: f64,
    pub p_acc: f64,
    pub kappa: f64,
    pub g: Vec<f64>,
    pub flows: Vec<f64>,
    pub mechanism: Mechanism,
    /// `sum_i c_i g_i`.
    pub dispatch_cost: f64,
    pub objective: f64,
    pub max_line_utilization: f64,
    pub diagnostics: AcceptanceDiagnostics,
}

/// Which constraint classes enter a step LP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepVariant {
    pub protection: bool,
    pub generator_ramp: bool,
    pub pcc_ramp: bool,
    pub forbid_curtailment: bool,
}

impl StepVariant {
    pub const FULL: Self = Self {
        protection: true,
        generator_ramp: true,
        pcc_ramp: true,
        forbid_curtailment: false,
    };
}

/// Immutable per-episode inputs of the acceptance problem.
#[derive(Debug, Clone, Copy)]
pub struct TsoContext<'a> {
    pub case: &'a NetworkCase,
    pub ptdf: &'a PtdfMatrix<f64>,
    pub trace: &'a ExogenousTrace,
    pub baseline: &'a BaselineDispatch,
    pub protection: &'a ProtectionTerms,
    pub cfg: &'a TsoConfig,
}

pub struct StepSolution {
    pub lp: LinearProgram<f64>,
    pub solution: LpSolution<f64>,
    pub g: Vec<VarId>,
    pub kappa: VarId,
}

impl StepSolution {
    pub fn kappa(&self) -> f64 {
        self.solution.value(self.kappa)
    }
}

/// Builds and solves one step LP. `Ok(None)` means the variant is infeasible.
pub fn solve_step_variant(
    ctx: &TsoContext<'_>,
    p_req: f64,
    t: usize,
    state: &TsoState,
    variant: StepVariant,
) -> Result<Option<StepSolution>, GridError> {
    let case = ctx.case;
    let cfg = ctx.cfg;
    let ptdf = ctx.ptdf;
    let dt = ctx.trace.dt_h;
    let demand = &ctx.trace.bus_demand[t];
    let g0 = &ctx.baseline.g[t];
    let (delta_d, delta_f) = if variant.protection {
        (ctx.protection.delta_d[t], Some(&ctx.protection.delta_f[t]))
    } else {
        (0.0, None)
    };

    let mut lp = LinearProgram::<f64>::new();
    let mut g = Vec::with_capacity(case.generators.len());
    for (i, gen) in case.generators.iter().enumerate() {
        let a = ctx.protection.alpha[i];
        let mut lo = gen.g_min_mw + a * delta_d;
        let mut hi = gen.g_max_mw - a * delta_d;
        if let (true, Some(g_prev)) = (variant.generator_ramp, state.g_prev.as_deref()) {
            let r = gen.ramp_mw_per_h * dt;
            lo = lo.max(g_prev[i] - r);
            hi = hi.min(g_prev[i] + r);
        }
        if lo > hi {
            return Ok(None);
        }
        g.push(lp.add_var(format!("g{i}"), lo, hi, gen.cost));
    }
    let mut k_lo = 0.0;
    if variant.pcc_ramp {
        if let Some(prev) = state.p_acc_prev {
            k_lo = (p_req - prev - cfg.r_grid_mw).max(0.0);
        }
    }
    let k_hi = if variant.forbid_curtailment { 0.0 } else { p_req };
    if k_lo > k_hi {
        return Ok(None);
    }
    let kappa = lp.add_var("kappa", k_lo, k_hi, cfg.gamma_kappa);

    lp.add_constraint(
        "balance",
        g.iter().map(|v| (*v, 1.0)).chain([(kappa, 1.0)]),
        Relation::Eq,
        demand.iter().sum::<f64>() + p_req,
    );
    for (i, v) in g.iter().enumerate() {
        let up = lp.add_var(format!("dev_up{i}"), 0.0, f64::INFINITY, cfg.rho);
        let dn = lp.add_var(format!("dev_dn{i}"), 0.0, f64::INFINITY, cfg.rho);
        lp.add_constraint(
            format!("split{i}"),
            [(*v, 1.0), (up, -1.0), (dn, 1.0)],
            Relation::Eq,
            g0[i],
        );
    }
    let shift = ptdf.flows(demand);
    let gen_bus = case.generator_bus_indices();
    let a_bus = case.aidc_index();
    for (l, line) in case.lines.iter().enumerate() {
        let limit = line.f_max_mw - delta_f.map_or(0.0, |d| d[l]);
        let pa = ptdf.get(l, a_bus);
        let terms: Vec<(VarId, f64)> = g
            .iter()
            .zip(&gen_bus)
            .map(|(v, &n)| (*v, ptdf.get(l, n)))
            .chain([(kappa, pa)])
            .filter(|(_, c)| c.abs() > 1e-12)
            .collect();
        let offset = shift[l] + pa * p_req;
        lp.add_constraint(format!("fmax{l}"), terms.clone(), Relation::Le, limit + offset);
        lp.add_constraint(format!("fmin{l}"), terms, Relation::Ge, -limit + offset);
    }

    let solution = lp.solve()?;
    match solution.status {
        LpStatus::Optimal => Ok(Some(StepSolution {
            lp,
            solution,
            g,
            kappa,
        })),
        LpStatus::Infeasible => Ok(None),
        status => Err(GridError::Solver {
            context: format!("acceptance step {t}"),
            status,
            detail: solution.diagnostics,
        }),
    }
}

/// One robust acceptance decision for request `p_req` at zero-based step `t`.
pub fn robust_acceptance_step(
    ctx: &TsoContext<'_>,
    p_req: f64,
    t: usize,
    state: &TsoState,
) -> Result<AcceptanceOutcome, GridError> {
    assert!(p_req >= 0.0 && p_req.is_finite(), "request must be a nonnegative MW value");
    let full = solve_step_variant(ctx, p_req, t, state, StepVariant::FULL)?.ok_or_else(|| {
        GridError::AcceptanceInfeasible {
            t,
            detail: "protected constraint set is empty for every curtailment level".into(),
        }
    })?;
    let mut diagnostics = AcceptanceDiagnostics {
        lp_solves: 1,
        iterations: full.solution.iterations,
        max_violation: full.solution.max_violation,
        ..Default::default()
    };
    let raw = full.kappa().clamp(0.0, p_req);
    let kappa = if raw <= KAPPA_TOL { 0.0 } else { raw };
    let mechanism = if kappa == 0.0 {
        Mechanism::None
    } else {
        attribute(ctx, p_req, t, state, kappa, &mut diagnostics)?
    };
    let p_acc = p_req - kappa;
    let g: Vec<f64> = full.g.iter().map(|v| full.solution.value(*v)).collect();
    let flows = step_flows(ctx.case, ctx.ptdf, &g, &ctx.trace.bus_demand[t], p_acc);
    let max_line_utilization = ctx
        .case
        .lines
        .iter()
        .zip(&flows)
        .map(|(l, f)| f.abs() / l.f_max_mw)
        .fold(0.0, f64::max);
    let dispatch_cost = ctx
        .case
        .generators
        .iter()
        .zip(&g)
        .map(|(gen, v)| gen.cost * v)
        .sum();
    Ok(AcceptanceOutcome {
        t,
        p_req,
        p_acc,
        kappa,
        g,
        flows,
        mechanism,
        dispatch_cost,
        objective: full.solution.objective,
        max_line_utilization,
        diagnostics,
    })
}

/// Counterfactual re-solves: removing protection isolates the robustness
/// share, then removing both ramp limits isolates the ramp share; what is
/// left is congestion or capacity.
fn attribute(
    ctx: &TsoContext<'_>,
    p_req: f64,
    t: usize,
    state: &TsoState,
    kappa: f64,
    diag: &mut AcceptanceDiagnostics,
) -> Result<Mechanism, GridError> {
    let mut solve = |variant: StepVariant| -> Result<Option<f64>, GridError> {
        let s = solve_step_variant(ctx, p_req, t, state, variant)?;
        diag.lp_solves += 1;
        Ok(s.map(|s| {
            diag.iterations += s.solution.iterations;
            s.kappa().clamp(0.0, p_req)
        }))
    };
    let unprotected = StepVariant {
        protection: false,
        ..StepVariant::FULL
    };
    let relaxed = StepVariant {
        generator_ramp: false,
        pcc_ramp: false,
        ..unprotected
    };
    // Dropping constraints only enlarges the feasible set, so both exist.
    let k_np = solve(unprotected)?.unwrap_or(kappa);
    let k_nr = solve(relaxed)?.unwrap_or(k_np);
    diag.kappa_unprotected = Some(k_np);
    diag.kappa_relaxed = Some(k_nr);

    let robustness = k_np < kappa - ATTRIBUTION_TOL;
    let ramp = k_nr < k_np - ATTRIBUTION_TOL;
    let congestion = k_nr > ATTRIBUTION_TOL;
    Ok(match (robustness, ramp, congestion) {
        (true, false, false) => Mechanism::Robustness,
        (false, true, false) => Mechanism::Ramp,
        (false, false, true) => Mechanism::Congestion,
        (false, false, false) => Mechanism::Congestion,
        _ => Mechanism::Mixed,
    })
}

/// Whether some zero-curtailment point exists in the protected set.
pub fn zero_curtailment_feasible(
    ctx: &TsoContext<'_>,
    p_req: f64,
    t: usize,
    state: &TsoState,
) -> Result<bool, GridError> {
    let v = StepVariant {
        forbid_curtailment: true,
        ..StepVariant::FULL
    };
    Ok(solve_step_variant(ctx, p_req, t, state, v)?.is_some())
}

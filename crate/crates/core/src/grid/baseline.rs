use crate::lp::{LinearProgram, LpStatus, Relation, VarId};
use crate::scenario::{ExogenousTrace, NetworkCase};

use super::{GridError, PtdfMatrix};

/// Violations below this are accepted by the row-generation loop.
const ROW_TOL: f64 = 1e-7;
const COEF_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineDispatch {
    /// `g[t][i]`, MW.
    pub g: Vec<Vec<f64>>,
    /// `flows[t][l]`, MW.
    pub flows: Vec<Vec<f64>>,
    /// `sum_t sum_i c_i g_i(t)`.
    pub cost: f64,
    pub step_cost: Vec<f64>,
    pub lp_solves: usize,
    pub rows_generated: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineOptions {
    /// `None` solves the horizon as one LP.
    pub window_steps: Option<usize>,
    pub overlap_steps: usize,
}

impl BaselineOptions {
    pub const MONOLITHIC: Self = Self {
        window_steps: None,
        overlap_steps: 0,
    };

    /// One LP up to a day at 15-minute steps; longer horizons in day windows
    /// with a half-day look-ahead.
    pub fn auto(horizon: usize, dt_h: f64) -> Self {
        let day = (24.0 / dt_h).round() as usize;
        if horizon <= day.max(96) {
            Self::MONOLITHIC
        } else {
            Self {
                window_steps: Some(day),
                overlap_steps: day / 2,
            }
        }
    }
}

pub fn solve_baseline_dispatch(
    case: &NetworkCase,
    trace: &ExogenousTrace,
    ptdf: &PtdfMatrix<f64>,
) -> Result<BaselineDispatch, GridError> {
    solve_baseline_with(
        case,
        trace,
        ptdf,
        BaselineOptions::auto(trace.horizon(), trace.dt_h),
    )
}

pub fn solve_baseline_with(
    case: &NetworkCase,
    trace: &ExogenousTrace,
    ptdf: &PtdfMatrix<f64>,
    opts: BaselineOptions,
) -> Result<BaselineDispatch, GridError> {
    let horizon = trace.horizon();
    let window = opts.window_steps.unwrap_or(horizon).max(1);
    let mut g: Vec<Vec<f64>> = Vec::with_capacity(horizon);
    let (mut solves, mut rows) = (0, 0);
    let mut start = 0;
    while start < horizon {
        let end = (start + window + opts.overlap_steps).min(horizon);
        let keep = (start + window).min(horizon);
        let init = if start == 0 { None } else { g.last().cloned() };
        let w = solve_window(case, trace, ptdf, start, end, init.as_deref())?;
        solves += w.solves;
        rows += w.rows;
        g.extend(w.g.into_iter().take(keep - start));
        start = keep;
    }
    let flows: Vec<Vec<f64>> = (0..horizon)
        .map(|t| step_flows(case, ptdf, &g[t], &trace.bus_demand[t], 0.0))
        .collect();
    let step_cost: Vec<f64> = g
        .iter()
        .map(|gt| case.generators.iter().zip(gt).map(|(gen, v)| gen.cost * v).sum())
        .collect();
    Ok(BaselineDispatch {
        cost: step_cost.iter().sum(),
        g,
        flows,
        step_cost,
        lp_solves: solves,
        rows_generated: rows,
    })
}

/// Flows for generation `g`, forecast bus demand and an AIDC draw.
pub fn step_flows(
    case: &NetworkCase,
    ptdf: &PtdfMatrix<f64>,
    g: &[f64],
    bus_demand: &[f64],
    p_aidc: f64,
) -> Vec<f64> {
    let mut inj: Vec<f64> = bus_demand.iter().map(|d| -d).collect();
    inj[case.aidc_index()] -= p_aidc;
    for (gen, v) in case.generators.iter().zip(g) {
        inj[case.bus_index(gen.bus).expect("validated case")] += v;
    }
    ptdf.flows(&inj)
}

struct WindowResult {
    g: Vec<Vec<f64>>,
    solves: usize,
    rows: usize,
}

fn solve_window(
    case: &NetworkCase,
    trace: &ExogenousTrace,
    ptdf: &PtdfMatrix<f64>,
    t0: usize,
    t1: usize,
    init: Option<&[f64]>,
) -> Result<WindowResult, GridError> {
    let gens = &case.generators;
    let ng = gens.len();
    let gen_bus = case.generator_bus_indices();
    let ramp: Vec<f64> = gens.iter().map(|g| g.ramp_mw_per_h * trace.dt_h).collect();
    let mut lp = LinearProgram::<f64>::new();
    let mut vars: Vec<Vec<VarId>> = Vec::with_capacity(t1 - t0);
    for t in t0..t1 {
        let row: Vec<VarId> = gens
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let (mut lo, mut hi) = (g.g_min_mw, g.g_max_mw);
                if let (true, Some(prev)) = (t == t0, init) {
                    lo = lo.max(prev[i] - ramp[i]);
                    hi = hi.min(prev[i] + ramp[i]);
                }
                lp.add_var(format!("g_{t}_{i}"), lo, hi, g.cost)
            })
            .collect();
        let demand: f64 = trace.bus_demand[t].iter().sum();
        lp.add_constraint(
            format!("balance_{t}"),
            row.iter().map(|v| (*v, 1.0)),
            Relation::Eq,
            demand,
        );
        vars.push(row);
    }
    if lp.variables().iter().any(|v| v.lower > v.upper) {
        return Err(GridError::BaselineInfeasible {
            first_step: t0,
            window: (t0, t1),
            detail: "ramp limits from the previous window cannot be met".into(),
        });
    }
    // shift[t][l] = sum_n PTDF[l][n] d_n(t)
    let shift: Vec<Vec<f64>> = (t0..t1)
        .map(|t| ptdf.flows(&trace.bus_demand[t]))
        .collect();
    let (mut solves, mut rows) = (0, 0);
    loop {
        let sol = lp.solve()?;
        solves += 1;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Err(diagnose(case, trace, ptdf, t0, t1)),
            other => {
                return Err(GridError::Solver {
                    context: format!("baseline window {t0}..{t1}"),
                    status: other,
                    detail: sol.diagnostics.clone(),
                })
            }
        }
        let g: Vec<Vec<f64>> = vars
            .iter()
            .map(|row| row.iter().map(|v| sol.value(*v)).collect())
            .collect();
        let mut added = 0;
        for (k, t) in (t0..t1).enumerate() {
            for l in 0..ptdf.n_lines() {
                let coef: Vec<(VarId, f64)> = (0..ng)
                    .map(|i| (vars[k][i], ptdf.get(l, gen_bus[i])))
                    .filter(|(_, c)| c.abs() > COEF_EPS)
                    .collect();
                let f: f64 =
                    (0..ng).map(|i| ptdf.get(l, gen_bus[i]) * g[k][i]).sum::<f64>() - shift[k][l];
                let fmax = case.lines[l].f_max_mw;
                if f > fmax + ROW_TOL {
                    lp.add_constraint(format!("fmax_{t}_{l}"), coef, Relation::Le, fmax + shift[k][l]);
                    added += 1;
                } else if f < -fmax - ROW_TOL {
                    lp.add_constraint(format!("fmin_{t}_{l}"), coef, Relation::Ge, -fmax + shift[k][l]);
                    added += 1;
                }
            }
            if k > 0 {
                for i in 0..ng {
                    let dg = g[k][i] - g[k - 1][i];
                    let terms = [(vars[k][i], 1.0), (vars[k - 1][i], -1.0)];
                    if dg > ramp[i] + ROW_TOL {
                        lp.add_constraint(format!("rup_{t}_{i}"), terms, Relation::Le, ramp[i]);
                        added += 1;
                    } else if dg < -ramp[i] - ROW_TOL {
                        lp.add_constraint(format!("rdn_{t}_{i}"), terms, Relation::Ge, -ramp[i]);
                        added += 1;
                    }
                }
            }
        }
        rows += added;
        if added == 0 {
            return Ok(WindowResult { g, solves, rows });
        }
        log::debug!("baseline window {t0}..{t1}: added {added} rows");
    }
}

/// Locates the first step that is infeasible on its own; otherwise blames
/// ramping across the window.
fn diagnose(
    case: &NetworkCase,
    trace: &ExogenousTrace,
    ptdf: &PtdfMatrix<f64>,
    t0: usize,
    t1: usize,
) -> GridError {
    let gmin: f64 = case.generators.iter().map(|g| g.g_min_mw).sum();
    let gmax: f64 = case.generators.iter().map(|g| g.g_max_mw).sum();
    for t in t0..t1 {
        let d: f64 = trace.bus_demand[t].iter().sum();
        if d < gmin || d > gmax {
            return GridError::BaselineInfeasible {
                first_step: t,
                window: (t0, t1),
                detail: format!("demand {d:.1} MW outside generation range [{gmin:.1}, {gmax:.1}]"),
            };
        }
        let lp = full_step_lp(case, ptdf, &trace.bus_demand[t], None);
        if matches!(lp.solve().map(|s| s.status), Ok(LpStatus::Infeasible)) {
            return GridError::BaselineInfeasible {
                first_step: t,
                window: (t0, t1),
                detail: "network limits cannot be met".into(),
            };
        }
    }
    GridError::BaselineInfeasible {
        first_step: t0,
        window: (t0, t1),
        detail: "ramp limits cannot follow the demand trajectory".into(),
    }
}

fn full_step_lp(
    case: &NetworkCase,
    ptdf: &PtdfMatrix<f64>,
    demand: &[f64],
    prefix: Option<&str>,
) -> LinearProgram<f64> {
    let mut lp = LinearProgram::new();
    add_step(&mut lp, case, ptdf, demand, prefix.unwrap_or("s"));
    lp
}

fn add_step(
    lp: &mut LinearProgram<f64>,
    case: &NetworkCase,
    ptdf: &PtdfMatrix<f64>,
    demand: &[f64],
    tag: &str,
) -> Vec<VarId> {
    let gen_bus = case.generator_bus_indices();
    let vars: Vec<VarId> = case
        .generators
        .iter()
        .enumerate()
        .map(|(i, g)| lp.add_var(format!("g_{tag}_{i}"), g.g_min_mw, g.g_max_mw, g.cost))
        .collect();
    lp.add_constraint(
        format!("balance_{tag}"),
        vars.iter().map(|v| (*v, 1.0)),
        Relation::Eq,
        demand.iter().sum(),
    );
    let shift = ptdf.flows(demand);
    for (l, line) in case.lines.iter().enumerate() {
        let coef: Vec<(VarId, f64)> = vars
            .iter()
            .zip(&gen_bus)
            .map(|(v, &n)| (*v, ptdf.get(l, n)))
            .filter(|(_, c)| c.abs() > COEF_EPS)
            .collect();
        lp.add_constraint(
            format!("fmax_{tag}_{l}"),
            coef.clone(),
            Relation::Le,
            line.f_max_mw + shift[l],
        );
        lp.add_constraint(
            format!("fmin_{tag}_{l}"),
            coef,
            Relation::Ge,
            -line.f_max_mw + shift[l],
        );
    }
    vars
}

/// The horizon dispatch LP with every line and ramp row written out.
pub fn baseline_full_lp(
    case: &NetworkCase,
    trace: &ExogenousTrace,
    ptdf: &PtdfMatrix<f64>,
) -> LinearProgram<f64> {
    let mut lp = LinearProgram::new();
    let ramp: Vec<f64> = case
        .generators
        .iter()
        .map(|g| g.ramp_mw_per_h * trace.dt_h)
        .collect();
    let mut prev: Option<Vec<VarId>> = None;
    for t in 0..trace.horizon() {
        let vars = add_step(&mut lp, case, ptdf, &trace.bus_demand[t], &t.to_string());
        if let Some(p) = &prev {
            for i in 0..vars.len() {
                let terms = [(vars[i], 1.0), (p[i], -1.0)];
                lp.add_constraint(format!("rup_{t}_{i}"), terms, Relation::Le, ramp[i]);
                lp.add_constraint(format!("rdn_{t}_{i}"), terms, Relation::Ge, -ramp[i]);
            }
        }
        prev = Some(vars);
    }
    lp
}

/// Largest violation of balance, generator bounds, line limits and ramps.
pub fn baseline_violation(case: &NetworkCase, trace: &ExogenousTrace, b: &BaselineDispatch) -> f64 {
    let mut worst: f64 = 0.0;
    for t in 0..trace.horizon() {
        let d: f64 = trace.bus_demand[t].iter().sum();
        worst = worst.max((b.g[t].iter().sum::<f64>() - d).abs());
        for (i, (gen, v)) in case.generators.iter().zip(&b.g[t]).enumerate() {
            worst = worst.max(gen.g_min_mw - v).max(v - gen.g_max_mw);
            if t > 0 {
                worst = worst.max((v - b.g[t - 1][i]).abs() - gen.ramp_mw_per_h * trace.dt_h);
            }
        }
        for (line, f) in case.lines.iter().zip(&b.flows[t]) {
            worst = worst.max(f.abs() - line.f_max_mw);
        }
    }
    worst
}

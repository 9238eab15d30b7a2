use crate::scenario::{ExogenousTrace, NetworkCase, TsoConfig};

use super::{participation_factors, step_flows, AcceptanceOutcome, GridError, PtdfMatrix};

/// Vertex enumeration refuses to run beyond this many vertices.
pub const VERTEX_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct RobustReport {
    pub vertices: usize,
    pub max_violation: f64,
    /// Normalized deviation of the worst vertex, bus order.
    pub worst_vertex: Vec<f64>,
}

/// Vertices of `{xi in [-1,1]^k : sum |xi| <= budget}`: `floor(budget)`
/// coordinates at +-1 and, for fractional budgets, one more at
/// +-frac(budget). Budgets at or above `k` give the box corners.
pub fn budget_vertices(k: usize, budget: f64) -> Vec<Vec<f64>> {
    let budget = budget.max(0.0);
    if budget >= k as f64 {
        return (0..1usize << k)
            .map(|mask| (0..k).map(|j| if mask >> j & 1 == 1 { 1.0 } else { -1.0 }).collect())
            .collect();
    }
    let full = budget.floor() as usize;
    let frac = budget - full as f64;
    let mut out = Vec::new();
    let mut support: Vec<usize> = (0..full).collect();
    loop {
        for signs in 0..1usize << full {
            let mut xi = vec![0.0; k];
            for (b, &j) in support.iter().enumerate() {
                xi[j] = if signs >> b & 1 == 1 { 1.0 } else { -1.0 };
            }
            if frac > 0.0 {
                for j in (0..k).filter(|j| !support.contains(j)) {
                    for s in [frac, -frac] {
                        let mut v = xi.clone();
                        v[j] = s;
                        out.push(v);
                    }
                }
            } else {
                out.push(xi);
            }
        }
        if !next_combination(&mut support, k) {
            return out;
        }
    }
}

fn next_combination(idx: &mut [usize], k: usize) -> bool {
    let r = idx.len();
    let mut i = r;
    while i > 0 {
        i -= 1;
        if idx[i] < k - r + i {
            idx[i] += 1;
            for j in i + 1..r {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn binomial(n: usize, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn vertex_count(k: usize, budget: f64) -> f64 {
    if budget >= k as f64 {
        return 2f64.powi(k as i32);
    }
    let full = budget.floor() as usize;
    let base = binomial(k, full) * 2f64.powi(full as i32);
    if budget > full as f64 {
        base * 2.0 * (k - full) as f64
    } else {
        base
    }
}

/// Checks an outcome against every vertex of the uncertainty set under the
/// participation response, returning the largest violation of nodal balance,
/// generator bounds and line ratings. Buses with zero forecast carry no
/// deviation and are left out of the enumeration.
pub fn check_robust_feasibility(
    outcome: &AcceptanceOutcome,
    case: &NetworkCase,
    ptdf: &PtdfMatrix<f64>,
    trace: &ExogenousTrace,
    cfg: &TsoConfig,
    t: usize,
) -> Result<RobustReport, GridError> {
    let demand = &trace.bus_demand[t];
    let active: Vec<usize> = (0..demand.len()).filter(|&n| demand[n] > 0.0).collect();
    let count = vertex_count(active.len(), cfg.gamma_u);
    if count > VERTEX_CAP as f64 {
        return Err(GridError::TooManyVertices {
            count,
            cap: VERTEX_CAP,
        });
    }
    let alpha = participation_factors(case, cfg.participation);
    let mut report = RobustReport {
        vertices: 0,
        max_violation: f64::NEG_INFINITY,
        worst_vertex: vec![0.0; demand.len()],
    };
    for xi_active in budget_vertices(active.len(), cfg.gamma_u) {
        let mut xi = vec![0.0; demand.len()];
        for (j, &n) in active.iter().enumerate() {
            xi[n] = xi_active[j];
        }
        let d: Vec<f64> = demand
            .iter()
            .zip(&xi)
            .map(|(dn, x)| dn + cfg.epsilon * dn * x)
            .collect();
        let dev: f64 = d.iter().sum::<f64>() - demand.iter().sum::<f64>();
        let g: Vec<f64> = outcome.g.iter().zip(&alpha).map(|(g, a)| g + a * dev).collect();
        let mut worst = (g.iter().sum::<f64>() - d.iter().sum::<f64>() - outcome.p_acc).abs();
        for (gen, v) in case.generators.iter().zip(&g) {
            worst = worst.max(gen.g_min_mw - v).max(v - gen.g_max_mw);
        }
        let flows = step_flows(case, ptdf, &g, &d, outcome.p_acc);
        for (line, f) in case.lines.iter().zip(&flows) {
            worst = worst.max(f.abs() - line.f_max_mw);
        }
        report.vertices += 1;
        if worst > report.max_violation {
            report.max_violation = worst;
            report.worst_vertex = xi;
        }
    }
    Ok(report)
}

//! Toy networks and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use aidc_grid::grid::{
    budget_vertices, compute_ptdf, line_impacts, protection_terms, solve_baseline_dispatch, AcceptanceOutcome,
    BaselineDispatch, ProtectionTerms, PtdfMatrix, TsoContext,
};
use aidc_grid::plant::{bess_limits, AidcState};
use aidc_grid::scenario::{AidcConfig, ExogenousTrace, Generator, Line, NetworkCase, TsoConfig};
use nalgebra::{DMatrix, DVector, LU};

pub fn line(from: u32, to: u32, f_max_mw: f64) -> Line {
    Line {
        from,
        to,
        b_pu: 10.0,
        f_max_mw,
    }
}

pub fn gen(bus: u32, cost: f64, g_max_mw: f64) -> Generator {
    Generator {
        bus,
        g_min_mw: 0.0,
        g_max_mw,
        cost,
        ramp_mw_per_h: 1e5,
        tech: "toy".into(),
    }
}

/// Cheap unit at bus 1, dear unit at bus 3, AIDC at bus 2, load at bus 3.
pub fn triangle(rating: f64) -> NetworkCase {
    NetworkCase {
        buses: vec![1, 2, 3],
        lines: vec![line(1, 2, rating), line(2, 3, rating), line(1, 3, rating)],
        generators: vec![gen(1, 10.0, 2000.0), gen(3, 100.0, 2000.0)],
        ref_bus: 1,
        aidc_bus: 2,
        load_share: BTreeMap::from([(3, 1.0)]),
        mva_base: 100.0,
        notes: None,
    }
}

/// Four-bus ring with a chord; load on three buses, AIDC at bus 4.
pub fn ring(rating: f64) -> NetworkCase {
    NetworkCase {
        buses: vec![1, 2, 3, 4],
        lines: vec![
            line(1, 2, rating),
            line(2, 3, rating),
            line(3, 4, rating),
            line(4, 1, rating),
            line(1, 3, rating),
        ],
        generators: vec![gen(1, 10.0, 1500.0), gen(3, 40.0, 1500.0)],
        ref_bus: 1,
        aidc_bus: 4,
        load_share: BTreeMap::from([(2, 0.5), (3, 0.3), (4, 0.2)]),
        mva_base: 100.0,
        notes: None,
    }
}

pub fn flat_trace(case: &NetworkCase, demand: &[f64]) -> ExogenousTrace {
    ExogenousTrace::from_series(
        0.25,
        demand.iter().map(|_| String::new()).collect(),
        vec![50.0; demand.len()],
        demand.to_vec(),
        vec![0.3; demand.len()],
        &case.share_vector(),
    )
}

pub fn nominal(gamma_u: f64, epsilon: f64) -> TsoConfig {
    TsoConfig {
        gamma_u,
        epsilon,
        ..TsoConfig::default()
    }
}

/// Everything a toy acceptance step needs, owned.
pub struct Toy {
    pub case: NetworkCase,
    pub ptdf: PtdfMatrix<f64>,
    pub trace: ExogenousTrace,
    pub baseline: BaselineDispatch,
    pub protection: ProtectionTerms,
    pub cfg: TsoConfig,
}

impl Toy {
    pub fn new(case: NetworkCase, demand: &[f64], cfg: TsoConfig) -> Self {
        let ptdf = compute_ptdf(&case).unwrap();
        let trace = flat_trace(&case, demand);
        let baseline = solve_baseline_dispatch(&case, &trace, &ptdf).unwrap();
        let protection = protection_terms(&ptdf, &trace, &cfg, &case);
        Self {
            case,
            ptdf,
            trace,
            baseline,
            protection,
            cfg,
        }
    }

    pub fn ctx(&self) -> TsoContext<'_> {
        TsoContext {
            case: &self.case,
            ptdf: &self.ptdf,
            trace: &self.trace,
            baseline: &self.baseline,
            protection: &self.protection,
            cfg: &self.cfg,
        }
    }

    /// Worst flow shift on `line` over every vertex of the budget set.
    pub fn enumerated_protection(&self, t: usize, line: usize) -> f64 {
        let demand = &self.trace.bus_demand[t];
        let gen_bus = self.case.generator_bus_indices();
        let c = line_impacts(&self.ptdf, &self.protection.alpha, &gen_bus, line, demand, self.cfg.epsilon);
        let active: Vec<usize> = (0..demand.len()).filter(|&n| demand[n] > 0.0).collect();
        budget_vertices(active.len(), self.cfg.gamma_u)
            .iter()
            .map(|xi| xi.iter().zip(&active).map(|(x, &n)| x * c[n]).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }
}

/// DC flows from a bus-angle solve, independent of the PTDF code path.
pub struct AngleSolver<'a> {
    case: &'a NetworkCase,
    keep: Vec<usize>,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl<'a> AngleSolver<'a> {
    pub fn new(case: &'a NetworkCase) -> Self {
        let n = case.n_buses();
        let r = case.ref_index();
        let mut b = DMatrix::<f64>::zeros(n, n);
        for l in &case.lines {
            let (i, j) = (case.bus_index(l.from).unwrap(), case.bus_index(l.to).unwrap());
            b[(i, i)] += l.b_pu;
            b[(j, j)] += l.b_pu;
            b[(i, j)] -= l.b_pu;
            b[(j, i)] -= l.b_pu;
        }
        let keep: Vec<usize> = (0..n).filter(|&k| k != r).collect();
        let lu = DMatrix::from_fn(n - 1, n - 1, |a, c| b[(keep[a], keep[c])]).lu();
        Self { case, keep, lu }
    }

    /// Line flows for nodal injections; any imbalance lands on the reference bus.
    pub fn flows(&self, injections: &[f64]) -> Vec<f64> {
        let n = self.case.n_buses();
        let rhs = DVector::from_iterator(n - 1, self.keep.iter().map(|&k| injections[k]));
        let reduced = self.lu.solve(&rhs).expect("connected network");
        let mut theta = vec![0.0; n];
        for (a, &k) in self.keep.iter().enumerate() {
            theta[k] = reduced[a];
        }
        self.case
            .lines
            .iter()
            .map(|ln| {
                let (i, j) = (self.case.bus_index(ln.from).unwrap(), self.case.bus_index(ln.to).unwrap());
                ln.b_pu * (theta[i] - theta[j])
            })
            .collect()
    }
}

/// Sign patterns with at most `budget` nonzero entries. For an integer budget
/// these contain every vertex of the box-and-norm budget set.
pub fn sign_patterns(n: usize, budget: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; n]];
    for k in 0..n {
        let mut next = Vec::new();
        for v in &out {
            if v.iter().filter(|x| **x != 0.0).count() < budget {
                for s in [1.0, -1.0] {
                    let mut w = v.clone();
                    w[k] = s;
                    next.push(w);
                }
            }
        }
        out.extend(next);
    }
    out
}

/// Largest violation of balance, generator bounds and ratings over every
/// demand vertex, with deviations picked up in proportion to `alpha`.
pub fn vertex_violation(toy: &Toy, outcome: &AcceptanceOutcome, t: usize) -> f64 {
    let case = &toy.case;
    let solver = AngleSolver::new(case);
    let demand = &toy.trace.bus_demand[t];
    let alpha = &toy.protection.alpha;
    let eps = toy.cfg.epsilon;
    let mut worst: f64 = 0.0;
    for xi in sign_patterns(demand.len(), toy.cfg.gamma_u.round() as usize) {
        let d: Vec<f64> = demand.iter().zip(&xi).map(|(dn, x)| dn * (1.0 + eps * x)).collect();
        let dev: f64 = d.iter().sum::<f64>() - demand.iter().sum::<f64>();
        let g: Vec<f64> = outcome.g.iter().zip(alpha).map(|(g, a)| g + a * dev).collect();
        let mut inj: Vec<f64> = d.iter().map(|x| -x).collect();
        inj[case.aidc_index()] -= outcome.p_acc;
        for (gen, v) in case.generators.iter().zip(&g) {
            inj[case.bus_index(gen.bus).unwrap()] += v;
            worst = worst.max(gen.g_min_mw - v).max(v - gen.g_max_mw);
        }
        worst = worst.max(inj.iter().sum::<f64>().abs());
        for (line, f) in case.lines.iter().zip(solver.flows(&inj)) {
            worst = worst.max(f.abs() - line.f_max_mw);
        }
    }
    worst
}

/// Worst flow shift on `line` from deviations alone, over the same patterns.
pub fn angle_protection(toy: &Toy, t: usize, line: usize) -> f64 {
    let case = &toy.case;
    let solver = AngleSolver::new(case);
    let demand = &toy.trace.bus_demand[t];
    let eps = toy.cfg.epsilon;
    sign_patterns(demand.len(), toy.cfg.gamma_u.round() as usize)
        .iter()
        .map(|xi| {
            let dd: Vec<f64> = demand.iter().zip(xi).map(|(dn, x)| eps * dn * x).collect();
            let dev: f64 = dd.iter().sum();
            let mut inj: Vec<f64> = dd.iter().map(|x| -x).collect();
            for (gen, a) in case.generators.iter().zip(&toy.protection.alpha) {
                inj[case.bus_index(gen.bus).unwrap()] += a * dev;
            }
            solver.flows(&inj)[line].abs()
        })
        .fold(0.0, f64::max)
}

/// Execution optimum by search. Two throughputs run over a 0.01 grid
/// augmented with their kinks (target, bounds); the third follows exactly
/// from the balance together with the net battery exchange, minimized over
/// the kinks of that one-dimensional piecewise-linear problem. Every vertex
/// of the execution problem has at most one coordinate off its kinks, so
/// this is exact up to float error.
pub fn execution_oracle(
    targets: [f64; 3],
    p_acc: f64,
    state: &AidcState,
    d_inf: f64,
    dt_h: f64,
    cfg: &AidcConfig,
) -> f64 {
    let m = cfg.it_multiplier();
    let eta = cfg.eta_ipcs;
    let cl = cfg.clusters();
    let a: [f64; 3] = [0, 1, 2].map(|k| m * (cl[k].p_peak_mw - cl[k].p_idle_mw()));
    let rhs = p_acc - m * cl.iter().map(|c| c.p_idle_mw()).sum::<f64>();
    let ub = [1.0, 1.0, d_inf];
    let t = [targets[0], targets[1], targets[2].min(d_inf)];
    let (ch, dis) = bess_limits(state.e_bess, dt_h, &cfg.bess);
    let cyc = cfg.bess.c_cyc * dt_h;
    let cost = |s: [f64; 3], q: f64| cfg.lambda * (0..3).map(|k| (s[k] - t[k]).abs()).sum::<f64>() + cyc * q.abs();

    let candidates = |k: usize| -> Vec<f64> {
        let mut v: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).filter(|x| *x <= ub[k]).collect();
        v.extend([0.0, ub[k], t[k]]);
        v
    };
    let mut best = f64::INFINITY;
    for j in 0..3 {
        let others: Vec<usize> = (0..3).filter(|&k| k != j).collect();
        let (o1, o2) = (others[0], others[1]);
        for &x1 in &candidates(o1) {
            for &x2 in &candidates(o2) {
                // q = eta (rest - a_j s_j) with q in [-dis, ch], s_j in [0, ub_j].
                let rest = rhs - a[o1] * x1 - a[o2] * x2;
                let lo = (0.0f64).max((rest - ch / eta) / a[j]);
                let hi = ub[j].min((rest + dis / eta) / a[j]);
                if lo > hi + 1e-12 {
                    continue;
                }
                for sj in [lo, hi, t[j], rest / a[j]] {
                    let sj = sj.clamp(lo, hi.max(lo));
                    let mut s = [0.0; 3];
                    s[j] = sj;
                    s[o1] = x1;
                    s[o2] = x2;
                    let q = eta * (rest - a[j] * sj);
                    best = best.min(cost(s, q));
                }
            }
        }
    }
    best
}

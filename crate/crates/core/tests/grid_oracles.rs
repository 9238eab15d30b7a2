mod common;

use aidc_grid::grid::{
    baseline_violation, budget_vertices, check_robust_feasibility, compute_ptdf, protection_terms,
    robust_acceptance_step, solve_baseline_dispatch, step_flows, zero_curtailment_feasible, BaselineDispatch,
    Mechanism, PtdfMatrix, TsoContext, TsoState,
};
use aidc_grid::scenario::{NetworkCase, Scenario};
use common::{angle_protection, flat_trace, nominal, ring, triangle, vertex_violation, AngleSolver, Toy};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn ptdf_matches_angle_solve_on_the_39_bus_case() {
    let case = NetworkCase::ieee39();
    let ptdf = compute_ptdf::<f64>(&case).unwrap();
    let n = case.n_buses();
    let r = case.ref_index();
    let angles = AngleSolver::new(&case);
    let mut rng = ChaCha8Rng::seed_from_u64(39);
    for _ in 0..20 {
        let mut p: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let total: f64 = p.iter().sum();
        p[r] -= total;
        let oracle = angles.flows(&p);
        let flows = ptdf.flows(&p);
        for l in 0..case.lines.len() {
            assert!((flows[l] - oracle[l]).abs() <= 1e-8, "line {l}: {} vs {}", flows[l], oracle[l]);
        }
    }
}

#[test]
fn slack_network_accepts_everything() {
    let toy = Toy::new(triangle(10_000.0), &[300.0], nominal(0.0, 0.07));
    let out = robust_acceptance_step(&toy.ctx(), 800.0, 0, &TsoState::default()).unwrap();
    assert_eq!(out.kappa, 0.0);
    assert_eq!(out.p_acc, 800.0);
    assert_eq!(out.mechanism, Mechanism::None);
    assert!((out.g[0] - 1100.0).abs() < 1e-6, "cheap unit serves all: {:?}", out.g);
}

#[test]
fn pcc_ramp_limits_the_jump_in_accepted_power() {
    let toy = Toy::new(triangle(10_000.0), &[300.0, 300.0], nominal(0.0, 0.07));
    let state = TsoState {
        g_prev: Some(vec![1200.0, 0.0]),
        p_acc_prev: Some(900.0),
    };
    let out = robust_acceptance_step(&toy.ctx(), 1100.0, 1, &state).unwrap();
    assert!((out.p_acc - 1050.0).abs() < 1e-6);
    assert!((out.kappa - 50.0).abs() < 1e-6);
    assert_eq!(out.mechanism, Mechanism::Ramp);
}

/// Smallest curtailment on a grid for which some split of generation keeps
/// every line within its rating.
fn grid_search_min_kappa(case: &NetworkCase, ptdf: &PtdfMatrix<f64>, demand: &[f64], p_req: f64, step: f64) -> f64 {
    let total: f64 = demand.iter().sum();
    let g_max = case.generators[0].g_max_mw;
    let mut kappa = 0.0;
    while kappa <= p_req + 1e-9 {
        let need = total + p_req - kappa;
        let mut g1 = 0.0;
        while g1 <= g_max.min(need) + 1e-9 {
            let g3 = need - g1;
            if g3 <= case.generators[1].g_max_mw {
                let flows = step_flows(case, ptdf, &[g1, g3], demand, p_req - kappa);
                if case.lines.iter().zip(&flows).all(|(l, f)| f.abs() <= l.f_max_mw + 1e-9) {
                    return kappa;
                }
            }
            g1 += step;
        }
        kappa += step;
    }
    f64::INFINITY
}

#[test]
fn congestion_curtailment_matches_grid_search() {
    let toy = Toy::new(triangle(250.0), &[300.0], nominal(0.0, 0.07));
    let out = robust_acceptance_step(&toy.ctx(), 600.0, 0, &TsoState::default()).unwrap();
    let step = 0.5;
    let oracle = grid_search_min_kappa(&toy.case, &toy.ptdf, &toy.trace.bus_demand[0], 600.0, step);
    assert!(out.kappa > 0.0);
    assert!(out.kappa <= oracle + 1e-6, "lp {} above grid {oracle}", out.kappa);
    assert!(oracle - out.kappa <= step + 1e-9, "lp {} far below grid {oracle}", out.kappa);
    assert_eq!(out.mechanism, Mechanism::Congestion);
    for (l, f) in toy.case.lines.iter().zip(&out.flows) {
        assert!(f.abs() <= l.f_max_mw + 1e-6);
    }
}

#[test]
fn protection_of_a_three_bus_impact_vector() {
    let c = [5.0, -3.0, 2.0];
    let enumerated = budget_vertices(3, 2.0)
        .iter()
        .map(|xi| xi.iter().zip(&c).map(|(x, c)| x * c).sum::<f64>().abs())
        .fold(0.0, f64::max);
    assert_eq!(enumerated, 8.0);
    assert_eq!(aidc_grid::num::budgeted_worst_case(&c.map(f64::abs), 2.0), 8.0);
}

#[test]
fn protected_outcomes_survive_every_vertex() {
    for gamma in [0.0, 1.0, 2.0] {
        let toy = Toy::new(ring(420.0), &[600.0], nominal(gamma, 0.1));
        for l in 0..toy.case.lines.len() {
            assert!((toy.protection.delta_f[0][l] - toy.enumerated_protection(0, l)).abs() <= 1e-9);
            assert!((toy.protection.delta_f[0][l] - angle_protection(&toy, 0, l)).abs() <= 1e-9);
        }
        for p_req in [0.0, 200.0, 500.0, 900.0] {
            let out = robust_acceptance_step(&toy.ctx(), p_req, 0, &TsoState::default()).unwrap();
            let report =
                check_robust_feasibility(&out, &toy.case, &toy.ptdf, &toy.trace, &toy.cfg, 0).unwrap();
            assert!(report.max_violation <= 1e-6, "gamma {gamma} p_req {p_req}: {}", report.max_violation);
            assert!(vertex_violation(&toy, &out, 0) <= 1e-6);

            if out.kappa > 1.0 {
                let mut bad = out.clone();
                bad.kappa -= 1.0;
                bad.p_acc += 1.0;
                bad.g[0] += 1.0;
                let report =
                    check_robust_feasibility(&bad, &toy.case, &toy.ptdf, &toy.trace, &toy.cfg, 0).unwrap();
                assert!(report.max_violation > 1e-6, "understated curtailment went unnoticed");
                assert!(vertex_violation(&toy, &bad, 0) > 1e-6);
            }
        }
    }
}

#[test]
fn first_step_couples_to_nothing() {
    let toy = Toy::new(triangle(10_000.0), &[300.0], nominal(0.0, 0.07));
    let out = robust_acceptance_step(&toy.ctx(), 1500.0, 0, &TsoState::default()).unwrap();
    assert_eq!(out.kappa, 0.0);
}

#[test]
fn zero_aidc_load_reproduces_a_ramp_free_baseline() {
    let demand = [500.0, 700.0, 950.0, 650.0, 800.0];
    let toy = Toy::new(ring(420.0), &demand, nominal(0.0, 0.07));
    let mut state = TsoState::default();
    for t in 0..demand.len() {
        let out = robust_acceptance_step(&toy.ctx(), 0.0, t, &state).unwrap();
        let base = toy.baseline.step_cost[t];
        assert!((out.dispatch_cost - base).abs() <= 1e-6 * base, "step {t}: {} vs {base}", out.dispatch_cost);
        state.advance(&out);
    }
}

/// With binding ramps the step problem is myopic, so only the weak form
/// holds: the realized path is a feasible baseline path (total cost at least
/// the baseline optimum) and each step does no worse than the baseline point
/// whenever that point is reachable.
#[test]
fn zero_aidc_load_stays_within_the_baseline_envelope() {
    let mut s = Scenario::builtin("stress").unwrap();
    s.tso.gamma_u = 0.0;
    let case = s.grid();
    let ptdf = compute_ptdf(&case).unwrap();
    let baseline = solve_baseline_dispatch(&case, &s.trace, &ptdf).unwrap();
    let protection = protection_terms(&ptdf, &s.trace, &s.tso, &case);
    let ctx = TsoContext {
        case: &case,
        ptdf: &ptdf,
        trace: &s.trace,
        baseline: &baseline,
        protection: &protection,
        cfg: &s.tso,
    };
    let mut state = TsoState::default();
    let mut realized = BaselineDispatch {
        g: vec![],
        flows: vec![],
        cost: 0.0,
        step_cost: vec![],
        lp_solves: 0,
        rows_generated: 0,
    };
    for t in 0..s.horizon() {
        let out = robust_acceptance_step(&ctx, 0.0, t, &state).unwrap();
        assert_eq!(out.kappa, 0.0);
        let base = baseline.step_cost[t];
        let reachable = state.g_prev.as_ref().is_none_or(|prev| {
            case.generators
                .iter()
                .zip(prev.iter().zip(&baseline.g[t]))
                .all(|(gen, (p, b))| (b - p).abs() <= gen.ramp_mw_per_h * s.trace.dt_h + 1e-9)
        });
        if reachable {
            assert!(out.objective <= base * (1.0 + 1e-6), "step {t}: {} above {base}", out.objective);
        }
        realized.cost += out.dispatch_cost;
        realized.g.push(out.g.clone());
        realized.flows.push(out.flows.clone());
        state.advance(&out);
    }
    assert!(baseline_violation(&case, &s.trace, &realized) <= 1e-6);
    assert!(realized.cost >= baseline.cost * (1.0 - 1e-9));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn zero_curtailment_is_taken_when_available(
        p_req in 0.0..1200.0f64,
        prev in 0.0..1200.0f64,
        rating in 250.0..600.0f64,
        gamma in 0.0..3.0f64,
    ) {
        let toy = Toy::new(ring(rating), &[600.0, 600.0], nominal(gamma, 0.07));
        let state = TsoState { g_prev: Some(toy.baseline.g[0].clone()), p_acc_prev: Some(prev) };
        let Ok(out) = robust_acceptance_step(&toy.ctx(), p_req, 1, &state) else {
            return Ok(());
        };
        if zero_curtailment_feasible(&toy.ctx(), p_req, 1, &state).unwrap() {
            prop_assert_eq!(out.kappa, 0.0);
        }
        prop_assert!(out.kappa >= 0.0 && out.kappa <= p_req);
        prop_assert!((out.p_acc + out.kappa - p_req).abs() <= 1e-9);
    }

    #[test]
    fn protection_grows_with_budget_and_deviation(
        g1 in 0.0..5.0f64,
        dg in 0.0..3.0f64,
        e1 in 0.0..0.2f64,
        de in 0.0..0.1f64,
    ) {
        let case = NetworkCase::ieee39();
        let ptdf = compute_ptdf(&case).unwrap();
        let trace = flat_trace(&case, &[5000.0]);
        let lo = protection_terms(&ptdf, &trace, &nominal(g1, e1), &case);
        let hi = protection_terms(&ptdf, &trace, &nominal(g1 + dg, e1 + de), &case);
        for (a, b) in lo.delta_f[0].iter().zip(&hi.delta_f[0]) {
            prop_assert!(*a <= *b + 1e-9);
        }
        prop_assert!(lo.delta_d[0] <= hi.delta_d[0] + 1e-9);
    }
}

use aidc_grid::plant::{execute_step, AidcState, PlanningAction};
use aidc_grid::policies::{
    action_to_request, build_observation, fixed_buffer_policy, heuristic_policy, mlp_policy_eval, policy_from_spec,
    Activation, DenseLayer, MlpPolicy, Observation, PlanningPolicy, PolicyError, PolicyWeights,
    PreviousExchange, Squash, FEATURE_NAMES, OBS_DIM, WEIGHTS_VERSION,
};
use aidc_grid::scenario::{AidcConfig, ExogenousTrace, FeatureScales, HeuristicConfig, PolicyConfig};
use proptest::prelude::*;
use serde::Deserialize;

fn trace(horizon: usize) -> ExogenousTrace {
    ExogenousTrace::from_series(
        0.25,
        vec![String::new(); horizon],
        (0..horizon).map(|t| 40.0 + t as f64).collect(),
        (0..horizon).map(|t| 5000.0 + 10.0 * t as f64).collect(),
        vec![0.4; horizon],
        &[1.0],
    )
}

fn obs_from(features: [f64; OBS_DIM]) -> Observation {
    Observation {
        t: 1,
        raw: features,
        features,
    }
}

fn observation(e_bess: f64, eta: [f64; 2], demand: f64, d_inf: f64) -> Observation {
    let mut raw = [0.0; OBS_DIM];
    raw[0] = e_bess;
    raw[6] = eta[0];
    raw[7] = eta[1];
    raw[11] = demand;
    raw[12] = d_inf;
    Observation {
        t: 1,
        raw,
        features: raw,
    }
}

fn layer(rows: usize, cols: usize, w: Vec<f64>, act: Activation) -> DenseLayer {
    DenseLayer {
        rows,
        cols,
        w,
        b: vec![0.0; rows],
        act,
    }
}

fn weights(layers: Vec<DenseLayer>) -> PolicyWeights {
    PolicyWeights {
        version: WEIGHTS_VERSION,
        layers,
        squash: Squash::Tanh01,
        feature_order: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
    }
}

#[test]
fn urgency_starts_at_one_and_tracks_the_schedule() {
    let cfg = AidcConfig::default();
    let tr = trace(96);
    let scales = FeatureScales::default();
    let mut state = AidcState::initial(&cfg, 96, 0.25);
    let o = build_observation(&state, PreviousExchange::default(), &tr, 1, &scales);
    assert_eq!(o.urgency(), [1.0, 1.0]);
    assert_eq!(o.features[6], 1.0);

    state.remaining = state.target.map(|v| 0.6 * v);
    let o = build_observation(&state, PreviousExchange::default(), &tr, 49, &scales);
    for eta in o.urgency() {
        assert!((eta - 1.2).abs() < 1e-12, "{eta}");
    }

    state.remaining = [0.0, 0.0];
    let o = build_observation(&state, PreviousExchange::default(), &tr, 30, &scales);
    assert_eq!(o.urgency(), [0.0, 0.0]);
}

#[test]
fn observation_carries_the_exogenous_series() {
    let cfg = AidcConfig::default();
    let tr = trace(8);
    let state = AidcState::initial(&cfg, 8, 0.25);
    let prev = PreviousExchange {
        p_acc: 900.0,
        kappa: 12.5,
    };
    let o = build_observation(&state, prev, &tr, 3, &FeatureScales::default());
    assert_eq!(o.raw[8], 900.0);
    assert_eq!(o.raw[9], 12.5);
    assert_eq!(o.raw[10], tr.price[2]);
    assert_eq!(o.demand(), tr.demand[2]);
    assert_eq!(o.d_inf(), 0.4);
    assert_eq!(o.raw[0], cfg.bess.e_init_mwh());
}

#[test]
fn request_reference_points() {
    let cfg = AidcConfig::default();
    let full = action_to_request(&PlanningAction::new(1.0, 1.0, 1.0, 0.0, 0.0), &cfg, 1.0);
    assert!((full - 1267.9).abs() < 0.05, "{full}");
    let idle = action_to_request(&PlanningAction::new(0.0, 0.0, 0.0, 0.0, 0.0), &cfg, 1.0);
    assert!((idle - 329.65).abs() < 0.01, "{idle}");
    let dis = action_to_request(&PlanningAction::new(0.0, 0.0, 0.0, 0.0, 1.0), &cfg, 1.0);
    assert!((dis - 119.1).abs() < 0.05, "{dis}");
}

#[test]
fn fixed_buffer_is_static_and_clipped_downstream() {
    assert_eq!(fixed_buffer_policy(0.85).to_array(), [0.85, 0.85, 0.85, 0.0, 0.0]);
    let mut p = policy_from_spec("fixed-buffer", &PolicyConfig::default()).unwrap();
    let cfg = AidcConfig::default();
    let a = p.act(&observation(100.0, [1.0, 1.0], 3000.0, 0.3), &cfg).unwrap();
    let b = p.act(&observation(280.0, [2.0, 0.1], 9000.0, 0.9), &cfg).unwrap();
    assert_eq!(a, b);

    let state = AidcState::initial(&cfg, 96, 0.25);
    let p_req = action_to_request(&a, &cfg, 0.3);
    let r = execute_step(&a, p_req, &state, 0.3, 0.25, &cfg).unwrap();
    assert!(r.s[2] <= 0.3 + 1e-12);
}

#[test]
fn heuristic_rule_table() {
    let cfg = AidcConfig::default();
    let rule = HeuristicConfig::default();
    let off = heuristic_policy(&observation(255.0, [1.0, 1.0], 100.0, 0.4), &cfg, &rule, 200.0);
    assert_eq!(off.to_array(), [1.0, 1.0, 0.4, 0.5, 0.0]);
    let peak = heuristic_policy(&observation(270.0, [1.0, 1.0], 300.0, 0.4), &cfg, &rule, 200.0);
    assert_eq!(peak.to_array(), [0.8, 0.2, 0.4, 0.0, 0.5]);
    let urgent = heuristic_policy(&observation(270.0, [1.0, 1.2], 300.0, 0.4), &cfg, &rule, 200.0);
    assert!((urgent.s_1b - 0.3).abs() < 1e-12);
    assert_eq!(urgent.s_1a, 0.8);
}

#[test]
fn heuristic_threshold_is_the_trace_percentile() {
    let mut h = policy_from_spec("heuristic", &PolicyConfig::default()).unwrap();
    let tr = trace(101);
    h.reset(&tr);
    let cfg = AidcConfig::default();
    // Demand 5000..6000 in steps of 10: the 75th percentile is 5750.
    let below = h.act(&observation(150.0, [1.0, 1.0], 5749.0, 0.4), &cfg).unwrap();
    let at = h.act(&observation(150.0, [1.0, 1.0], 5750.0, 0.4), &cfg).unwrap();
    assert_eq!(below.s_1b, 1.0);
    assert_eq!(at.s_1b, 0.2);
}

#[test]
fn zero_network_gives_the_midpoint() {
    let w = weights(vec![
        layer(4, OBS_DIM, vec![0.0; 4 * OBS_DIM], Activation::Relu),
        layer(5, 4, vec![0.0; 20], Activation::Identity),
    ]);
    let a = mlp_policy_eval(&w, &obs_from([0.7; OBS_DIM])).unwrap();
    assert_eq!(a.to_array(), [0.5; 5]);
}

#[derive(Deserialize)]
struct Reference {
    weights: PolicyWeights,
    features: [f64; OBS_DIM],
    action: [f64; 5],
}

/// The fixture was produced by an independent numpy forward pass.
#[test]
fn exported_weights_reproduce_the_reference_action() {
    let text = include_str!("fixtures/mlp_reference.json");
    let r: Reference = serde_json::from_str(text).unwrap();
    let w = PolicyWeights::from_json(&serde_json::to_string(&r.weights).unwrap()).unwrap();
    let mut p = MlpPolicy::new(w).unwrap();
    let a = p.act(&obs_from(r.features), &AidcConfig::default()).unwrap();
    for (got, want) in a.to_array().iter().zip(r.action) {
        assert!((got - want).abs() <= 1e-5, "{got} vs {want}");
    }
}

#[test]
fn bad_weights_are_rejected() {
    let mut w = weights(vec![layer(5, OBS_DIM, vec![0.1; 5 * OBS_DIM], Activation::Identity)]);
    w.layers[0].w.pop();
    assert!(matches!(mlp_policy_eval(&w, &obs_from([0.0; OBS_DIM])), Err(PolicyError::Shape(_))));
    let mut w = weights(vec![layer(5, OBS_DIM, vec![0.1; 5 * OBS_DIM], Activation::Identity)]);
    w.version = 7;
    assert!(matches!(MlpPolicy::new(w), Err(PolicyError::Version(7))));
    let w = weights(vec![layer(5, OBS_DIM, vec![0.1; 5 * OBS_DIM], Activation::Identity)]);
    assert!(matches!(
        mlp_policy_eval(&w, &obs_from([f64::NAN; OBS_DIM])),
        Err(PolicyError::NonFinite(_))
    ));
    let err = policy_from_spec("mlp:/nonexistent/weights.json", &PolicyConfig::default()).err().unwrap();
    assert!(matches!(err, PolicyError::Load { .. }));
    assert!(matches!(
        policy_from_spec("greedy", &PolicyConfig::default()).err().unwrap(),
        PolicyError::Unknown(_)
    ));
}

fn random_weights(seed: &[f64]) -> PolicyWeights {
    let hidden = 6;
    let w1: Vec<f64> = (0..hidden * OBS_DIM).map(|i| seed[i % seed.len()] * ((i % 5) as f64 - 2.0)).collect();
    let w2: Vec<f64> = (0..5 * hidden).map(|i| seed[(i * 7) % seed.len()]).collect();
    let mut w = weights(vec![
        layer(hidden, OBS_DIM, w1, Activation::Tanh),
        layer(5, hidden, w2, Activation::Identity),
    ]);
    w.layers[0].b = seed.iter().take(hidden).copied().collect();
    w
}

proptest! {
    #[test]
    fn request_is_monotone_in_each_target(
        a in prop::array::uniform5(0.0..=1.0f64),
        k in 0usize..5,
        bump in 0.0..=1.0f64,
        d_inf in 0.0..=1.0f64,
    ) {
        let cfg = AidcConfig::default();
        let mut hi = a;
        hi[k] = (a[k] + bump).min(1.0);
        let r0 = action_to_request(&PlanningAction::from_array(a), &cfg, d_inf);
        let r1 = action_to_request(&PlanningAction::from_array(hi), &cfg, d_inf);
        if k == 4 {
            prop_assert!(r1 <= r0 + 1e-9);
        } else {
            prop_assert!(r1 >= r0 - 1e-9);
        }
    }

    #[test]
    fn heuristic_peak_never_asks_for_more(
        soc in 0.1..=1.0f64,
        eta in prop::array::uniform2(0.0..2.0f64),
        d_inf in 0.0..=1.0f64,
    ) {
        let cfg = AidcConfig::default();
        let rule = HeuristicConfig::default();
        let e = soc * cfg.bess.e_max_mwh;
        let peak = heuristic_policy(&observation(e, eta, 10.0, d_inf), &cfg, &rule, 5.0);
        let off = heuristic_policy(&observation(e, eta, 1.0, d_inf), &cfg, &rule, 5.0);
        prop_assert!(action_to_request(&peak, &cfg, d_inf) <= action_to_request(&off, &cfg, d_inf));
    }

    #[test]
    fn permuted_features_with_permuted_columns_act_alike(
        seed in prop::collection::vec(-1.0..1.0f64, 8),
        x in prop::array::uniform13(-2.0..2.0f64),
        i in 0usize..OBS_DIM,
        j in 0usize..OBS_DIM,
    ) {
        let w = random_weights(&seed);
        let mut wp = w.clone();
        let cols = OBS_DIM;
        for r in 0..wp.layers[0].rows {
            wp.layers[0].w.swap(r * cols + i, r * cols + j);
        }
        let mut xp = x;
        xp.swap(i, j);
        for (a, b) in w.forward(&x).iter().zip(wp.forward(&xp)) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn evaluation_is_pure(seed in prop::collection::vec(-1.0..1.0f64, 8), x in prop::array::uniform13(-2.0..2.0f64)) {
        let w = random_weights(&seed);
        let a = mlp_policy_eval(&w, &obs_from(x)).unwrap();
        let b = mlp_policy_eval(&w.clone(), &obs_from(x)).unwrap();
        prop_assert_eq!(a.to_array().map(f64::to_bits), b.to_array().map(f64::to_bits));
        prop_assert!(a.to_array().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

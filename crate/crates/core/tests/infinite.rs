mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lifted_mdp::infinite::{
    build_discounted_model, dyadic_model, dyadic_policy, dyadic_sum, required_horizon, solve_to_tolerance,
    solve_to_tolerance_capped, stationarity_witness, truncation_bound, DiscountSpec,
};
use lifted_mdp::{compute_reward_support, Error, Objective, SearchConfig};

#[test]
fn first_stage_is_undiscounted() {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let base = common::random_exact_model(&mut rng, 2, 3, 1, true).model();
    for beta in [0.1, 0.5, 0.99] {
        let m = build_discounted_model(&base, beta, 1).unwrap();
        for x in 0..2 {
            for a in 0..3 {
                assert_eq!(m.reward(0, x, a), base.reward(0, x, a));
            }
        }
        assert!(m.terminal().iter().all(|g| *g == 0.0));
    }
}

#[test]
fn dyadic_rewards_halve_each_stage() {
    let m = build_discounted_model(&dyadic_model(), 0.5, 3).unwrap();
    for k in 0..3 {
        assert_eq!(m.reward(k, 0, 1), 0.5f64.powi(k as i32 + 1));
        assert_eq!(m.reward(k, 0, 0), 0.0);
    }
}

#[test]
fn top_of_support_is_the_geometric_sum() {
    let base = lifted_mdp::MdpModel::new(lifted_mdp::ModelSpec {
        n_states: 2,
        n_actions: 2,
        horizon: 1,
        reward: vec![vec![vec![0.25, -1.0], vec![0.5, 0.75]]],
        terminal: vec![0.0, 0.0],
        transition: vec![vec![vec![0.5, 0.5]; 2]; 2],
        initial: vec![1.0, 0.0],
        positions: None,
    })
    .unwrap();
    for (beta, stages) in [(0.5, 6), (0.75, 5)] {
        let m = build_discounted_model(&base, beta, stages).unwrap();
        let support = compute_reward_support(&m).unwrap();
        for n in 1..=stages {
            let max = *support.stage(n).floats().last().unwrap();
            let want: f64 = (0..n).map(|k| beta.powi(k as i32) * 0.75).sum();
            assert!((max - want).abs() < 1e-12, "stage {n}");
            let min = support.stage(n).floats()[0];
            let low: f64 = (0..n).map(|k| beta.powi(k as i32) * -1.0).sum();
            assert!((min - low).abs() < 1e-12);
        }
    }
}

#[test]
fn bound_formula() {
    let zero = DiscountSpec::new(0.9, 3.0, 0.0).unwrap();
    assert!((0..20).all(|m| truncation_bound(&zero, m) == 0.0));
    let dyadic = DiscountSpec::new(0.5, 0.5, 1.0).unwrap();
    for m in 0..30 {
        assert_eq!(truncation_bound(&dyadic, m), 0.5f64.powi(m as i32 + 1));
    }
    for beta in [0.3, 0.5, 0.9] {
        let s = DiscountSpec::new(beta, 2.0, 1.5).unwrap();
        for m in 0..20 {
            let ratio = truncation_bound(&s, m) / truncation_bound(&s, m + 1);
            assert!((ratio - 1.0 / beta).abs() < 1e-12);
        }
    }
    assert!(DiscountSpec::new(1.0, 1.0, 1.0).is_err());
    assert!(DiscountSpec::new(0.5, -1.0, 1.0).is_err());
}

#[test]
fn horizon_needed_for_a_tolerance() {
    let s = DiscountSpec::new(0.5, 0.5, 1.0).unwrap();
    let at_zero = truncation_bound(&s, 0);
    assert_eq!(required_horizon(&s, at_zero), 1);
    assert_eq!(required_horizon(&s, 10.0), 1);
    assert_eq!(required_horizon(&s, at_zero * 0.99), 2);
    // bound(m) = 2^-(m+1) <= 2^-10 first at m = 9
    assert_eq!(required_horizon(&s, 0.5f64.powi(10)), 10);
}

#[test]
fn mean_reward_of_the_dyadic_model_approaches_one() {
    let model = dyadic_model();
    let h = Objective::mean_reward(1);
    let mut previous: Option<(f64, f64)> = None;
    for eps in [0.1, 0.01, 1e-3, 1e-4] {
        let r = solve_to_tolerance(&model, &h, None, 0.5, eps, &SearchConfig::default()).unwrap();
        // always playing 1 gives 1 - 2^-N
        assert!((r.solve.value - (1.0 - 0.5f64.powi(r.horizon as i32))).abs() < 1e-12);
        assert!(1.0 - r.solve.value <= r.achieved_epsilon + 1e-12);
        assert!(r.achieved_epsilon <= eps);
        if let Some((value, coarse)) = previous {
            assert!(r.solve.value >= value);
            assert!(r.solve.value - value <= coarse + 1e-12);
        }
        previous = Some((r.solve.value, eps));
    }
}

#[test]
fn successive_tolerances_are_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..5 {
        let base = common::random_exact_model(&mut rng, 2, 2, 1, true).model();
        let h = Objective::mean_reward(2);
        let beta = rng.gen_range(0.3..0.7);
        let eps = 0.05;
        let a = solve_to_tolerance(&base, &h, None, beta, eps, &SearchConfig::default()).unwrap();
        let b = solve_to_tolerance(&base, &h, None, beta, eps / 2.0, &SearchConfig::default()).unwrap();
        assert!((a.solve.value - b.solve.value).abs() <= eps + 1e-9);
    }
}

#[test]
fn support_cap_shortens_the_horizon() {
    let model = dyadic_model();
    let h = Objective::mean_reward(1);
    let r = solve_to_tolerance_capped(&model, &h, None, 0.5, 1e-6, &SearchConfig::default(), 64).unwrap();
    // |S_n| = 2^n, so the cap allows six stages
    assert_eq!(r.horizon, 6);
    assert!(r.achieved_epsilon > r.requested_epsilon);
    assert_eq!(r.achieved_epsilon, 0.5f64.powi(6));
}

#[test]
fn lipschitz_constant_is_required() {
    let model = dyadic_model();
    let err = solve_to_tolerance(&model, &Objective::classical(), None, 0.5, 0.1, &SearchConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Regularity(_)));
    let r = solve_to_tolerance(&model, &Objective::classical(), Some(1.0), 0.5, 0.1, &SearchConfig::default()).unwrap();
    assert_eq!(r.spec.lipschitz, 1.0);
    assert!(solve_to_tolerance(&model, &Objective::mean_reward(1), None, 1.5, 0.1, &SearchConfig::default()).is_err());
}

#[test]
fn dyadic_expansions() {
    assert_eq!(dyadic_policy(0.0, 6).unwrap(), vec![0; 6]);
    assert_eq!(dyadic_sum(&dyadic_policy(0.0, 6).unwrap()), 0.0);
    let root = std::f64::consts::FRAC_1_SQRT_2;
    let four = dyadic_policy(root, 4).unwrap();
    assert_eq!(four, vec![1, 0, 1, 1]);
    assert_eq!(dyadic_sum(&four), 0.6875);
    assert!((dyadic_sum(&four) - root).abs() <= 0.5f64.powi(4));
    let ones = dyadic_policy(1.0, 5).unwrap();
    assert_eq!(ones, vec![1; 5]);
    assert_eq!(dyadic_sum(&ones), 1.0 - 0.5f64.powi(5));
    assert!(dyadic_policy(1.5, 3).is_err());
}

#[test]
fn point_mass_target_is_not_met_by_a_constant_action() {
    let w = stationarity_witness(std::f64::consts::FRAC_1_SQRT_2, 4).unwrap();
    assert_eq!(w.actions, vec![1, 0, 1, 1]);
    assert_eq!(w.value, 1.0);
    assert!(!w.stationary);
}

#[test]
fn dyadic_error_halves_with_each_stage() {
    for target in [0.0, 0.1, 0.3, std::f64::consts::FRAC_1_SQRT_2, 0.9, 1.0] {
        let mut previous = f64::INFINITY;
        for n in 1..=30 {
            let err = (dyadic_sum(&dyadic_policy(target, n).unwrap()) - target).abs();
            assert!(err <= 0.5f64.powi(n as i32));
            assert!(err <= previous);
            previous = err;
        }
    }
}

#[test]
fn best_point_mass_sequences_are_not_constant() {
    for n in 3..=8 {
        let w = stationarity_witness(std::f64::consts::FRAC_1_SQRT_2, n).unwrap();
        assert!(!w.stationary, "n = {n}: {:?}", w.actions);
        assert_eq!(w.value, 1.0);
    }
}

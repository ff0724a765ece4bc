use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lifted_mdp::solver::ContinuousActionModel;
use lifted_mdp::transport::{
    algorithm1_step, delta_lower, delta_upper, make_random_walk_model, run_algorithm1, sample_initial,
    sample_initial_counts, structural_check, trace_csv, TransportInstance,
};
use lifted_mdp::{lp_transport_oracle, wasserstein_1d};

fn histogram<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..k).map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen() }).collect();
    if w.iter().all(|v| *v == 0.0) {
        w[rng.gen_range(0..k)] = 1.0;
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

#[test]
fn walk_rows_are_distributions() {
    let inst = TransportInstance::uniform_cost(4, 3, 0.5, vec![0.25; 4], vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    let m = make_random_walk_model(&inst).unwrap();
    assert_eq!(m.n_states(), 4);
    assert_eq!(m.horizon(), 3);
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for _ in 0..200 {
        let x = rng.gen_range(0..4);
        let up: f64 = if x == 3 { 0.0 } else { rng.gen() };
        let down: f64 = if x == 0 { 0.0 } else { rng.gen::<f64>() * (1.0 - up) };
        let a = [up, down];
        assert!(m.feasible(x, &a));
        let row = m.transition(x, &a);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(row.iter().all(|p| *p >= 0.0));
        assert_eq!(row[x], 1.0 - up - down);
        assert_eq!(m.reward(1, x, &a), -0.5 * (up + down));
        for (y, p) in row.iter().enumerate() {
            if y.abs_diff(x) > 1 {
                assert_eq!(*p, 0.0);
            }
        }
    }
    assert!(!m.feasible(3, &[0.1, 0.0]));
    assert!(m.feasible(3, &[0.0, 1.0]));
    assert!(!m.feasible(1, &[-0.1, 0.0]));
}

#[test]
fn instance_validation() {
    let g = vec![0.5, 0.5];
    assert!(TransportInstance::new(2, 2, vec![0.5, 1.0], g.clone(), g.clone()).is_ok());
    assert!(TransportInstance::new(2, 2, vec![1.0, 0.5], g.clone(), g.clone()).is_err());
    assert!(TransportInstance::new(2, 2, vec![0.0, 0.5], g.clone(), g.clone()).is_err());
    assert!(TransportInstance::new(2, 1, vec![1.0], vec![0.5, 0.6], g.clone()).is_err());
    assert!(TransportInstance::new(2, 1, vec![1.0, 1.0], g.clone(), g.clone()).is_err());
    assert!(TransportInstance::new(3, 1, vec![1.0], g.clone(), g).is_err());
}

#[test]
fn deficits_on_the_first_example() {
    let f = [0.5, 0.0, 0.0, 0.5];
    let g = [0.5, 0.5, 0.0, 0.0];
    let lower: Vec<f64> = (0..4).map(|x| delta_lower(&f, &g, x)).collect();
    let upper: Vec<f64> = (0..4).map(|x| delta_upper(&f, &g, x)).collect();
    assert_eq!(lower, vec![0.0, 0.0, -0.5, -0.5]);
    assert_eq!(upper, vec![0.0, 0.5, 0.5, 0.0]);
}

#[test]
fn two_stage_run_on_the_first_example() {
    let inst = TransportInstance::new(4, 2, vec![0.25, 0.75], vec![0.5, 0.5, 0.0, 0.0], vec![0.5, 0.0, 0.0, 0.5])
        .unwrap();
    let trace = run_algorithm1(&inst).unwrap();
    assert_eq!(trace.distributions[1], vec![0.5, 0.0, 0.5, 0.0]);
    assert_eq!(trace.distributions[2], vec![0.5, 0.5, 0.0, 0.0]);
    assert_eq!(trace.moved, vec![0.5, 0.5]);
    assert_eq!(trace.total_cost, (0.25 + 0.75) / 2.0);
    assert_eq!(trace.distances, vec![1.0, 0.5, 0.0]);
    assert_eq!(trace.objective, 0.5);
    // the kernel reports the fraction of F(x) moved
    assert_eq!(trace.plans[0].kernel(&trace.distributions[0])[3], [0.0, 1.0]);
    assert_eq!(trace.plans[0].kernel(&trace.distributions[0])[1], [0.0, 0.0]);
    let report = structural_check(&inst, &trace).unwrap();
    assert!(report.passed());
    assert!(report.transport_identity.is_none());
}

#[test]
fn target_as_start_never_moves() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for k in [2, 5, 17] {
        let g = histogram(&mut rng, k);
        let inst = TransportInstance::uniform_cost(k, k + 2, 1.0, g.clone(), g.clone()).unwrap();
        let trace = run_algorithm1(&inst).unwrap();
        assert!(trace.plans.iter().all(|p| p.is_empty()));
        assert_eq!(trace.total_cost, 0.0);
        assert!(trace.distributions.iter().all(|f| *f == g));
        assert_eq!(structural_check(&inst, &trace).unwrap().transport_identity, Some((0.0, 0.0)));
    }
}

#[test]
fn corner_to_corner_needs_k_minus_one_stages() {
    let k = 5;
    let mut initial = vec![0.0; k];
    initial[0] = 1.0;
    let mut target = vec![0.0; k];
    target[k - 1] = 1.0;
    let inst = TransportInstance::uniform_cost(k, k + 3, 1.0, target.clone(), initial).unwrap();
    let trace = run_algorithm1(&inst).unwrap();
    let active = trace.moved.iter().filter(|m| **m > 0.0).count();
    assert_eq!(active, k - 1);
    assert!(trace.moved[..k - 1].iter().all(|m| *m == 1.0));
    assert_eq!(trace.distributions[k - 1], target);
    assert_eq!(trace.distances[k - 2], 1.0);
    assert_eq!(trace.total_cost, (k - 1) as f64);
    let report = structural_check(&inst, &trace).unwrap();
    assert!(report.passed());
    assert_eq!(report.transport_identity, Some(((k - 1) as f64, (k - 1) as f64)));
}

#[test]
fn long_runs_reach_the_target_at_transport_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    for _ in 0..200 {
        let k = rng.gen_range(2..=25);
        let f = histogram(&mut rng, k);
        let g = histogram(&mut rng, k);
        let inst = TransportInstance::uniform_cost(k, k, 1.0, g.clone(), f.clone()).unwrap();
        let trace = run_algorithm1(&inst).unwrap();
        assert!(trace.terminal_distance < 1e-9);
        let work: f64 = trace.moved.iter().sum();
        let lp = lp_transport_oracle(&f, &g).unwrap().value;
        assert!((work - lp).abs() < 1e-9, "work {work} lp {lp}");
        // distances never increase along the run
        assert!(trace.distances.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        for (n, plan) in trace.plans.iter().enumerate() {
            let before = wasserstein_1d(&trace.distributions[n], &g).unwrap();
            let after = wasserstein_1d(&trace.distributions[n + 1], &g).unwrap();
            assert!((before - after - plan.total_moved()).abs() < 1e-9);
        }
        assert!(structural_check(&inst, &trace).unwrap().passed());
    }
}

#[test]
fn trace_csv_layout() {
    let inst = TransportInstance::uniform_cost(2, 1, 1.0, vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
    let csv = trace_csv(&run_algorithm1(&inst).unwrap());
    assert_eq!(
        csv,
        "stage,state,mass,up_move,down_move,stage_cost,w1_to_target\n\
         0,1,1,1,0,1,1\n\
         0,2,0,0,0,1,1\n\
         1,1,0,0,0,0,0\n\
         1,2,1,0,0,0,0\n"
    );
}

#[test]
fn sampled_initial_distributions() {
    for seed in 0..50 {
        let f = sample_initial(20, seed);
        let counts = sample_initial_counts(20, seed);
        let total: u32 = counts.iter().sum();
        assert!(total > 0);
        for (m, c) in f.iter().zip(&counts) {
            assert!(*c <= 10);
            assert_eq!(*m, *c as f64 / total as f64);
        }
        assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(sample_initial(20, seed), f);
    }
    assert_ne!(sample_initial(20, 1), sample_initial(20, 2));
    // raw draws are uniform on {0, ..., 10}: mean 5, variance 10
    let draws: Vec<f64> = (0..1000u64)
        .flat_map(|seed| sample_initial_counts(10, seed))
        .map(f64::from)
        .collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let se = (10.0 / draws.len() as f64).sqrt();
    assert!((mean - 5.0).abs() < 3.0 * se, "mean {mean}");
}

#[test]
fn mismatched_step_is_an_error() {
    assert!(algorithm1_step(&[1.0], &[0.5, 0.5]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn deficits_add_up_to_the_gap(seed in any::<u64>(), k in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = histogram(&mut rng, k);
        let g = histogram(&mut rng, k);
        for x in 0..k {
            let sum = delta_lower(&f, &g, x) + delta_upper(&f, &g, x);
            prop_assert!((sum - (g[x] - f[x])).abs() < 1e-14);
        }
    }

    #[test]
    fn steps_conserve_mass_and_stay_feasible(seed in any::<u64>(), k in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = histogram(&mut rng, k);
        let g = histogram(&mut rng, k);
        let (plan, next) = algorithm1_step(&f, &g).unwrap();
        prop_assert!((next.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(next.iter().all(|m| *m >= 0.0));
        prop_assert_eq!(plan.down[0], 0.0);
        prop_assert_eq!(plan.up[k - 1], 0.0);
        for x in 0..k {
            prop_assert!(plan.up[x] >= 0.0 && plan.down[x] >= 0.0);
            prop_assert!(plan.moved(x) <= f[x] + 1e-12);
        }
    }
}

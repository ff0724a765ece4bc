mod common;

use std::collections::BTreeSet;

use num_rational::BigRational;
use num_traits::Zero;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{random_exact_model, ExactModel};
use lifted_mdp::model::ModelSpec;
use lifted_mdp::support::compute_reward_support_capped;
use lifted_mdp::value::Arithmetic;
use lifted_mdp::{compute_reward_support, validate_model, Error, MdpModel, ValidationError};

fn identity_chain() -> ModelSpec {
    ModelSpec {
        n_states: 1,
        n_actions: 1,
        horizon: 1,
        reward: vec![vec![vec![0.0]]],
        terminal: vec![0.0],
        transition: vec![vec![vec![1.0]]],
        initial: vec![1.0],
        positions: None,
    }
}

#[test]
fn identity_chain_is_valid() {
    assert!(validate_model(&identity_chain()).is_ok());
    assert!(MdpModel::new(identity_chain()).is_ok());
}

#[test]
fn short_row_is_rejected_with_its_sum() {
    let mut spec = identity_chain();
    spec.transition[0][0][0] = 0.9;
    let err = MdpModel::new(spec).unwrap_err();
    assert!(matches!(err, ValidationError::RowSum { state: 0, action: 0, .. }));
    assert!(err.to_string().contains("row sum 0.9"), "{err}");
}

#[test]
fn infinite_reward_is_rejected() {
    let mut spec = identity_chain();
    spec.reward[0][0][0] = f64::INFINITY;
    let err = MdpModel::new(spec).unwrap_err();
    assert!(err.to_string().contains("non-finite reward"), "{err}");
}

#[test]
fn shape_and_initial_errors() {
    let mut spec = identity_chain();
    spec.initial = vec![0.5];
    assert!(matches!(MdpModel::new(spec).unwrap_err(), ValidationError::InitialSum { .. }));
    let mut spec = identity_chain();
    spec.reward = vec![vec![vec![0.0]]; 3];
    spec.horizon = 2;
    assert!(matches!(MdpModel::new(spec).unwrap_err(), ValidationError::Shape { .. }));
    let mut spec = identity_chain();
    spec.horizon = 0;
    assert_eq!(MdpModel::new(spec).unwrap_err(), ValidationError::ZeroHorizon);
}

#[test]
fn zero_rewards_give_singleton_supports() {
    let mut spec = identity_chain();
    spec.horizon = 5;
    let support = compute_reward_support(&MdpModel::new(spec).unwrap()).unwrap();
    for n in 0..=5 {
        assert_eq!(support.stage(n).floats(), &[0.0]);
    }
}

#[test]
fn two_bits_sum_to_three_values() {
    let model = MdpModel::new(ModelSpec {
        n_states: 1,
        n_actions: 2,
        horizon: 2,
        reward: vec![vec![vec![0.0, 1.0]]],
        terminal: vec![0.0],
        transition: vec![vec![vec![1.0], vec![1.0]]],
        initial: vec![1.0],
        positions: None,
    })
    .unwrap();
    let support = compute_reward_support(&model).unwrap();
    assert_eq!(support.stage(2).floats(), &[0.0, 1.0, 2.0]);
}

/// Path sums over every `(x_0, a_0, ..., x_n)` with positive or zero
/// probability alike, since the support ignores transition masses.
fn path_sums(m: &ExactModel, n: usize) -> BTreeSet<BigRational> {
    let ns = m.initial.len();
    let na = m.transition[0].len();
    let mut sums = BTreeSet::new();
    let paths = (ns * na).pow(n as u32);
    for code in 0..paths {
        let mut c = code;
        let mut total = BigRational::zero();
        for k in 0..n {
            let x = c % ns;
            c /= ns;
            let a = c % na;
            c /= na;
            total += &m.reward[k][x][a];
        }
        sums.insert(total);
    }
    sums
}

#[test]
fn support_equals_enumerated_path_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let m = random_exact_model(&mut rng, 3, 2, 3, false);
        let model = m.model();
        let support = compute_reward_support(&model).unwrap();
        assert_eq!(support.arithmetic(), Arithmetic::Exact);
        for n in 0..=3 {
            let got: BTreeSet<BigRational> = support
                .stage(n)
                .values()
                .iter()
                .map(|v| v.as_rational().expect("exact mode").clone())
                .collect();
            assert_eq!(got, path_sums(&m, n), "stage {n}");
        }
    }
}

#[test]
fn irrational_rewards_use_the_grid() {
    let mut spec = identity_chain();
    spec.n_actions = 2;
    spec.reward = vec![vec![vec![std::f64::consts::SQRT_2, 0.5]]];
    spec.transition = vec![vec![vec![1.0], vec![1.0]]];
    spec.horizon = 3;
    let model = MdpModel::new(spec).unwrap();
    let support = compute_reward_support(&model).unwrap();
    assert_eq!(support.arithmetic(), Arithmetic::Grid);
    assert_eq!(support.len(3), 4);
    let top = support.stage(3).floats()[3];
    assert!((top - 3.0 * std::f64::consts::SQRT_2).abs() < 1e-8);
}

#[test]
fn support_cap_reports_overflow() {
    let mut spec = identity_chain();
    spec.n_actions = 2;
    spec.reward = vec![vec![vec![0.0, 1.0]]];
    spec.transition = vec![vec![vec![1.0], vec![1.0]]];
    spec.horizon = 4;
    let model = MdpModel::new(spec).unwrap();
    let err = compute_reward_support_capped(&model, 4).unwrap_err();
    assert!(matches!(err, Error::SupportOverflow { stage: 4, size: 5, cap: 4 }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn successors_point_at_the_sum(seed in any::<u64>(), ns in 1usize..4, na in 1usize..4, horizon in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_exact_model(&mut rng, ns, na, horizon, false);
        let model = m.model();
        let support = compute_reward_support(&model).unwrap();
        for n in 0..horizon {
            let floats = support.stage(n).floats();
            let next = support.stage(n + 1).floats();
            prop_assert!(next.windows(2).all(|w| w[0] < w[1]));
            for (s, v) in floats.iter().enumerate() {
                for x in 0..ns {
                    for a in 0..na {
                        let t = support.successor(n, s, x, a);
                        prop_assert!((next[t] - (v + model.reward(n, x, a))).abs() < 1e-12);
                    }
                }
            }
        }
    }
}

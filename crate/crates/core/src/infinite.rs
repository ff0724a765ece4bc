//! Discounted rewards: truncation to a finite horizon with a certified tail
//! bound, and greedy dyadic action sequences.
//!
//! With `R_n = sum_{k<=n} beta^k r(X_k, A_k)` and `|r| <= M`, the tail beyond
//! stage `m` moves the reward law by at most `beta^{m+1} M / (1 - beta)` in
//! `W_1`, so an objective that is `K_H`-Lipschitz in `W_1` changes by at most
//! `K_H` times that.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lifted::JointDistribution;
use crate::model::{MdpModel, ModelSpec};
use crate::objective::{CustomObjective, Objective, Regularity, Sense};
use crate::solver::{lifted_value_iteration, SearchConfig, SolveReport, Strategy};
use crate::support::{compute_reward_support_capped, RewardSupport, DEFAULT_SUPPORT_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscountSpec {
    pub beta: f64,
    /// `M = max |r(x, a)|`
    pub reward_bound: f64,
    /// `K_H`
    pub lipschitz: f64,
}

impl DiscountSpec {
    pub fn new(beta: f64, reward_bound: f64, lipschitz: f64) -> Result<Self> {
        check_beta(beta)?;
        if !(reward_bound >= 0.0 && reward_bound.is_finite()) {
            return Err(Error::InvalidParameter(format!("reward bound {reward_bound} must be finite and >= 0")));
        }
        if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return Err(Error::InvalidParameter(format!("Lipschitz constant {lipschitz} must be finite and >= 0")));
        }
        Ok(DiscountSpec {
            beta,
            reward_bound,
            lipschitz,
        })
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("discount factor {beta} outside (0, 1)")))
    }
}

/// Stage-dependent model with `r_k = beta^k r` for `k < stages` and `g = 0`.
pub fn build_discounted_model(model: &MdpModel, beta: f64, stages: usize) -> Result<MdpModel> {
    check_beta(beta)?;
    if !model.is_stationary() {
        return Err(Error::InvalidParameter("discounting needs stationary base rewards".into()));
    }
    if stages == 0 {
        return Err(Error::InvalidParameter("at least one stage is needed".into()));
    }
    let mut spec: ModelSpec = model.to_spec();
    let base = spec.reward[0].clone();
    spec.reward = (0..stages)
        .map(|k| {
            let factor = beta.powi(k as i32);
            base.iter()
                .map(|row| row.iter().map(|r| r * factor).collect())
                .collect()
        })
        .collect();
    spec.terminal = vec![0.0; spec.n_states];
    spec.horizon = stages;
    Ok(MdpModel::new(spec)?)
}

/// `K_H beta^{m+1} M / (1 - beta)`
pub fn truncation_bound(spec: &DiscountSpec, m: usize) -> f64 {
    spec.lipschitz * spec.beta.powi(m as i32 + 1) * spec.reward_bound / (1.0 - spec.beta)
}

/// Smallest `N >= 1` with `truncation_bound(N - 1) <= epsilon`.
pub fn required_horizon(spec: &DiscountSpec, epsilon: f64) -> usize {
    let mut n = 1;
    while truncation_bound(spec, n - 1) > epsilon && n < 10_000 {
        n += 1;
    }
    n
}

#[derive(Debug, Clone, Serialize)]
pub struct InfiniteReport {
    pub horizon: usize,
    pub requested_epsilon: f64,
    /// `truncation_bound(horizon - 1)`; exceeds the request when the support
    /// cap forced a shorter horizon.
    pub achieved_epsilon: f64,
    pub spec: DiscountSpec,
    pub solve: SolveReport,
}

impl InfiniteReport {
    /// Bound on `|value - sup_sigma H(F_inf)|` (plus the finite-horizon gap
    /// when the solve is not certified).
    pub fn certified_gap(&self) -> f64 {
        self.achieved_epsilon
    }
}

/// Truncates at the smallest horizon whose tail bound meets `epsilon` and
/// solves the finite problem. `lipschitz` overrides the objective's declared
/// constant.
pub fn solve_to_tolerance(
    model: &MdpModel,
    objective: &Objective,
    lipschitz: Option<f64>,
    beta: f64,
    epsilon: f64,
    config: &SearchConfig,
) -> Result<InfiniteReport> {
    solve_to_tolerance_capped(model, objective, lipschitz, beta, epsilon, config, DEFAULT_SUPPORT_CAP)
}

pub fn solve_to_tolerance_capped(
    model: &MdpModel,
    objective: &Objective,
    lipschitz: Option<f64>,
    beta: f64,
    epsilon: f64,
    config: &SearchConfig,
    support_cap: usize,
) -> Result<InfiniteReport> {
    let k = lipschitz.or(objective.regularity().lipschitz).ok_or_else(|| {
        Error::Regularity("a Wasserstein-Lipschitz constant is needed for the truncation bound".into())
    })?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {epsilon} must be positive")));
    }
    let spec = DiscountSpec::new(beta, model.max_abs_reward(), k)?;
    let wanted = required_horizon(&spec, epsilon);
    let mut horizon = wanted;
    let (discounted, support) = loop {
        let discounted = build_discounted_model(model, beta, horizon)?;
        match compute_reward_support_capped(&discounted, support_cap) {
            Ok(support) => break (discounted, support),
            Err(e @ Error::SupportOverflow { .. }) => {
                if horizon == 1 {
                    return Err(e);
                }
                horizon -= 1;
            }
            Err(e) => return Err(e),
        }
    };
    let solve = lifted_value_iteration(&discounted, &support, objective, config)?;
    Ok(InfiniteReport {
        horizon,
        requested_epsilon: epsilon,
        achieved_epsilon: truncation_bound(&spec, horizon - 1),
        spec,
        solve,
    })
}

/// Greedy binary expansion: `a_k = 1` when adding `2^{-(k+1)}` keeps the
/// partial sum at or below `target`.
pub fn dyadic_policy(target: f64, stages: usize) -> Result<Vec<u8>> {
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::InvalidParameter(format!("target {target} outside [0, 1]")));
    }
    let mut sum = 0.0;
    let mut step = 0.5;
    let mut out = Vec::with_capacity(stages);
    for _ in 0..stages {
        if sum + step <= target {
            sum += step;
            out.push(1);
        } else {
            out.push(0);
        }
        step /= 2.0;
    }
    Ok(out)
}

/// `sum_k 2^{-(k+1)} a_k`
pub fn dyadic_sum(actions: &[u8]) -> f64 {
    actions
        .iter()
        .enumerate()
        .map(|(k, &a)| a as f64 * 0.5f64.powi(k as i32 + 1))
        .sum()
}

/// One state, actions `{0, 1}` with reward `a / 2`; discounting by `1/2`
/// makes the accumulated reward the binary number `0.a_0 a_1 ...`.
pub fn dyadic_model() -> MdpModel {
    MdpModel::new(ModelSpec {
        n_states: 1,
        n_actions: 2,
        horizon: 1,
        reward: vec![vec![vec![0.0, 0.5]]],
        terminal: vec![0.0],
        transition: vec![vec![vec![1.0], vec![1.0]]],
        initial: vec![1.0],
        positions: None,
    })
    .expect("the dyadic model is valid")
}

/// `H(F) = F(E x {s*})` where `s*` is the support value nearest to `target`.
/// Continuous on the finite support but not Lipschitz in `W_1`.
pub fn point_mass_objective(support: &RewardSupport, target: f64) -> Objective {
    let values = support.stage(support.horizon()).floats();
    let nearest = values
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
        .map(|(i, _)| i)
        .expect("support is nonempty");
    Objective::Custom(CustomObjective {
        name: format!("mass at {}", values[nearest]),
        eval: Arc::new(move |f: &JointDistribution, _| f.reward_marginal()[nearest]),
        regularity: Regularity {
            upper_semicontinuous: true,
            lipschitz: None,
        },
        sense: Sense::Maximize,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StationarityWitness {
    pub stages: usize,
    pub target: f64,
    /// Action played at each stage along the optimal trajectory.
    pub actions: Vec<usize>,
    pub value: f64,
    pub stationary: bool,
}

/// Exhaustive search for `point_mass_objective(target)` on the discounted
/// dyadic model; reports whether the best sequence plays a constant action.
pub fn stationarity_witness(target: f64, stages: usize) -> Result<StationarityWitness> {
    let model = build_discounted_model(&dyadic_model(), 0.5, stages)?;
    let support = compute_reward_support_capped(&model, DEFAULT_SUPPORT_CAP)?;
    let h = point_mass_objective(&support, target);
    let config = SearchConfig {
        strategy: Strategy::Exhaustive,
        ..Default::default()
    };
    let report = lifted_value_iteration(&model, &support, &h, &config)?;
    let actions: Vec<usize> = report
        .trajectory
        .iter()
        .zip(&report.sequence.kernels)
        .map(|(f, pi)| {
            let s = (0..f.width()).find(|&s| f.get(0, s) > 0.0).expect("mass is somewhere");
            pi.deterministic_action(0, s).expect("exhaustive kernels are deterministic")
        })
        .collect();
    let stationary = actions.windows(2).all(|w| w[0] == w[1]);
    Ok(StationarityWitness {
        stages,
        target,
        actions,
        value: report.value,
        stationary,
    })
}

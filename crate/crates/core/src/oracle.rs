//! Brute-force path enumeration.
//!
//! Sums the product-form path probabilities
//! `nu(x0) sigma_0(a0|h0) q(x1|x0,a0) ...` over every history. Run time grows
//! with the number of paths, so every entry point enforces a cap and the
//! module serves as a reference for the faster solvers, not as a solver.

use crate::error::{Error, Result};
use crate::lifted::JointDistribution;
use crate::model::MdpModel;
use crate::policy::{check_action_distribution, History, HistoryPolicy};
use crate::support::RewardSupport;
use crate::value::RewardValue;

/// Default limit on `|E|^{n+1} |A|^n`.
pub const DEFAULT_PATH_CAP: u64 = 10_000_000;

/// `|E|^{n+1} |A|^n`, the number of histories of length `n`.
pub fn path_count(model: &MdpModel, n: usize) -> f64 {
    (model.n_states() as f64).powi(n as i32 + 1) * (model.n_actions() as f64).powi(n as i32)
}

pub(crate) fn check_cap(model: &MdpModel, n: usize, cap: u64) -> Result<()> {
    let paths = path_count(model, n);
    if paths > cap as f64 {
        return Err(Error::EnumerationCap { paths, cap });
    }
    Ok(())
}

/// One node of the enumeration: the history so far, its probability, the
/// accumulated reward `R_{n-1}` and, for `n < depth`, the decision rule there.
pub(crate) struct PathNode<'a> {
    pub history: &'a History,
    pub probability: f64,
    pub reward: &'a RewardValue,
    pub decision: Option<&'a [f64]>,
}

/// Depth-first walk over all positive-probability histories up to `depth`.
pub(crate) fn walk_paths(
    model: &MdpModel,
    policy: &dyn HistoryPolicy,
    depth: usize,
    visit: &mut dyn FnMut(&PathNode<'_>),
) -> Result<()> {
    let zero = RewardValue::zero(model.arithmetic());
    for (x0, &p0) in model.initial().iter().enumerate() {
        if p0 == 0.0 {
            continue;
        }
        let mut history = History::start(x0);
        descend(model, policy, depth, &mut history, p0, &zero, visit)?;
    }
    Ok(())
}

fn descend(
    model: &MdpModel,
    policy: &dyn HistoryPolicy,
    depth: usize,
    history: &mut History,
    probability: f64,
    reward: &RewardValue,
    visit: &mut dyn FnMut(&PathNode<'_>),
) -> Result<()> {
    let n = history.stage();
    if n == depth {
        visit(&PathNode {
            history,
            probability,
            reward,
            decision: None,
        });
        return Ok(());
    }
    let sigma = policy.distribution(history)?;
    check_action_distribution(&sigma, model.n_actions())?;
    visit(&PathNode {
        history,
        probability,
        reward,
        decision: Some(&sigma),
    });
    let x = history.current_state();
    for (a, &pa) in sigma.iter().enumerate() {
        if pa == 0.0 {
            continue;
        }
        let next_reward = reward.add(model.canonical_reward(n, x, a));
        for (x_next, &q) in model.transition_row(x, a).iter().enumerate() {
            if q == 0.0 {
                continue;
            }
            history.push(a, x_next);
            descend(model, policy, depth, history, probability * pa * q, &next_reward, visit)?;
            history.pop();
        }
    }
    Ok(())
}

/// Law of `(X_n, R_{n-1})` under `policy`, by summing over all histories.
pub fn exact_joint_distribution(
    model: &MdpModel,
    support: &RewardSupport,
    policy: &dyn HistoryPolicy,
    stage: usize,
) -> Result<JointDistribution> {
    exact_joint_distribution_capped(model, support, policy, stage, DEFAULT_PATH_CAP)
}

pub fn exact_joint_distribution_capped(
    model: &MdpModel,
    support: &RewardSupport,
    policy: &dyn HistoryPolicy,
    stage: usize,
    cap: u64,
) -> Result<JointDistribution> {
    if stage == 0 || stage > model.horizon() {
        return Err(Error::StageOutOfRange {
            stage,
            horizon: model.horizon(),
        });
    }
    check_cap(model, stage, cap)?;
    let width = support.len(stage);
    let mut mass = vec![0.0; model.n_states() * width];
    let mut missing = false;
    walk_paths(model, policy, stage, &mut |node| {
        if node.decision.is_none() {
            match support.stage(stage).index_of(node.reward) {
                Some(s) => mass[node.history.current_state() * width + s] += node.probability,
                None => missing = true,
            }
        }
    })?;
    if missing {
        return Err(Error::RewardNotInSupport { stage });
    }
    JointDistribution::from_mass(stage, model.n_states(), width, mass)
}

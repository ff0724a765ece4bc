//! Terminal functionals `H` on joint distributions.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lifted::JointDistribution;
use crate::model::MdpModel;
use crate::support::RewardSupport;
use crate::wasserstein::wasserstein_on_line;

/// Regularity an objective declares about itself.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct Regularity {
    /// Upper semicontinuous under entrywise convergence.
    pub upper_semicontinuous: bool,
    /// Lipschitz constant with respect to `W_1` of the accumulated-reward law.
    pub lipschitz: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Sense {
    Maximize,
    Minimize,
}

pub type WeightFn = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;
pub type MarginalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type JointFn = Arc<dyn Fn(&JointDistribution, &RewardSupport) -> f64 + Send + Sync>;

/// Weights `w(x, s)` of a linear terminal objective.
#[derive(Clone)]
pub enum Weights {
    /// `w(x, s) = g(x) + s`, the expected total reward.
    Classical,
    /// `w(x, s) = state[x] + reward * s`.
    Affine { state: Vec<f64>, reward: f64 },
    Function(WeightFn),
}

impl Weights {
    pub fn weight(&self, model: &MdpModel, x: usize, s: f64) -> f64 {
        match self {
            Weights::Classical => model.terminal()[x] + s,
            Weights::Affine { state, reward } => state[x] + reward * s,
            Weights::Function(w) => w(x, s),
        }
    }
}

/// `H_0` on `P(E)` for the composite objective `H_0(F(., S)) + E[R_{N-1}]`.
#[derive(Clone)]
pub enum MarginalFunctional {
    Linear(Vec<f64>),
    /// `-W_1(F(., S), G)` using the model's state positions.
    NegWasserstein(Vec<f64>),
    Function { eval: MarginalFn, regularity: Regularity },
}

impl MarginalFunctional {
    pub fn evaluate(&self, marginal: &[f64], positions: &[f64]) -> Result<f64> {
        match self {
            MarginalFunctional::Linear(h) => {
                if h.len() != marginal.len() {
                    return Err(Error::Shape("terminal weights do not match |E|".into()));
                }
                Ok(h.iter().zip(marginal).map(|(a, b)| a * b).sum())
            }
            MarginalFunctional::NegWasserstein(target) => Ok(-wasserstein_on_line(marginal, target, positions)?),
            MarginalFunctional::Function { eval, .. } => Ok(eval(marginal)),
        }
    }

    pub fn regularity(&self) -> Regularity {
        match self {
            MarginalFunctional::Function { regularity, .. } => *regularity,
            _ => Regularity {
                upper_semicontinuous: true,
                lipschitz: None,
            },
        }
    }
}

/// A user-supplied functional with declared regularity and sense.
#[derive(Clone)]
pub struct CustomObjective {
    pub name: String,
    pub eval: JointFn,
    pub regularity: Regularity,
    pub sense: Sense,
}

#[derive(Clone)]
pub enum Objective {
    /// `sum_{x,s} w(x, s) F(x, s)`
    LinearTerminal(Weights),
    /// `P(R_{N-1} + g(X_N) >= t)`
    ThresholdProbability { threshold: f64 },
    /// `W_1(F(., S), G)`, minimized.
    WassersteinToTarget { target: Vec<f64> },
    ExpectedRewardPlusTerminal(MarginalFunctional),
    Custom(CustomObjective),
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::LinearTerminal(Weights::Classical) => write!(f, "LinearTerminal(g(x) + s)"),
            Objective::LinearTerminal(_) => write!(f, "LinearTerminal(..)"),
            Objective::ThresholdProbability { threshold } => write!(f, "ThresholdProbability({threshold})"),
            Objective::WassersteinToTarget { target } => write!(f, "WassersteinToTarget({target:?})"),
            Objective::ExpectedRewardPlusTerminal(_) => write!(f, "ExpectedRewardPlusTerminal(..)"),
            Objective::Custom(c) => write!(f, "Custom({})", c.name),
        }
    }
}

/// `chi(x, s) = 1{s + g(x) >= t}` with a relative slack of `1e-12` so that
/// thresholds equal to an attainable total are counted as reached.
pub fn reaches_threshold(s: f64, g: f64, t: f64) -> bool {
    s + g >= t - 1e-12 * t.abs().max(1.0)
}

impl Objective {
    pub fn classical() -> Self {
        Objective::LinearTerminal(Weights::Classical)
    }

    /// `E[R_{N-1}]`, ignoring the terminal reward.
    pub fn mean_reward(n_states: usize) -> Self {
        Objective::LinearTerminal(Weights::Affine {
            state: vec![0.0; n_states],
            reward: 1.0,
        })
    }

    pub fn regularity(&self) -> Regularity {
        match self {
            Objective::LinearTerminal(w) => Regularity {
                upper_semicontinuous: true,
                // g(x) + s is Lipschitz in the reward law only when g is constant,
                // which the weights alone cannot tell
                lipschitz: match w {
                    Weights::Affine { state, reward } if state.windows(2).all(|p| p[0] == p[1]) => Some(reward.abs()),
                    _ => None,
                },
            },
            Objective::ThresholdProbability { .. } | Objective::WassersteinToTarget { .. } => Regularity {
                upper_semicontinuous: true,
                lipschitz: None,
            },
            Objective::ExpectedRewardPlusTerminal(h0) => h0.regularity(),
            Objective::Custom(c) => c.regularity,
        }
    }

    pub fn sense(&self) -> Sense {
        match self {
            Objective::WassersteinToTarget { .. } => Sense::Minimize,
            Objective::Custom(c) => c.sense,
            _ => Sense::Maximize,
        }
    }

    /// Terminal weights over `E x S_N` when the objective is linear in `F`.
    pub fn linear_weights(&self, model: &MdpModel, support: &RewardSupport) -> Option<Vec<f64>> {
        let n = support.horizon();
        let values = support.stage(n).floats();
        let table = |w: &dyn Fn(usize, f64) -> f64| {
            (0..model.n_states())
                .flat_map(|x| values.iter().map(move |&s| (x, s)))
                .map(|(x, s)| w(x, s))
                .collect::<Vec<f64>>()
        };
        match self {
            Objective::LinearTerminal(w) => Some(table(&|x, s| w.weight(model, x, s))),
            Objective::ThresholdProbability { threshold } => Some(table(&|x, s| {
                if reaches_threshold(s, model.terminal()[x], *threshold) {
                    1.0
                } else {
                    0.0
                }
            })),
            Objective::ExpectedRewardPlusTerminal(MarginalFunctional::Linear(h)) => Some(table(&|x, s| h[x] + s)),
            _ => None,
        }
    }

    /// `H(F)` in its natural sense (a distance is returned positive).
    pub fn evaluate(&self, f: &JointDistribution, model: &MdpModel, support: &RewardSupport) -> Result<f64> {
        f.check_support(support)?;
        if f.n_states() != model.n_states() {
            return Err(Error::Shape("distribution and model disagree on |E|".into()));
        }
        let values = support.stage(f.stage()).floats();
        let linear = |w: &dyn Fn(usize, f64) -> f64| {
            let mut total = 0.0;
            for x in 0..f.n_states() {
                for (s, &v) in values.iter().enumerate() {
                    let m = f.get(x, s);
                    if m != 0.0 {
                        total += w(x, v) * m;
                    }
                }
            }
            total
        };
        let expected_reward = || {
            f.reward_marginal()
                .iter()
                .zip(values)
                .map(|(m, s)| m * s)
                .sum::<f64>()
        };
        Ok(match self {
            Objective::LinearTerminal(w) => linear(&|x, s| w.weight(model, x, s)),
            // a sum of masses can overshoot 1 by rounding
            Objective::ThresholdProbability { threshold } => linear(&|x, s| {
                if reaches_threshold(s, model.terminal()[x], *threshold) {
                    1.0
                } else {
                    0.0
                }
            })
            .clamp(0.0, 1.0),
            Objective::WassersteinToTarget { target } => {
                if target.len() != model.n_states() {
                    return Err(Error::Shape(format!(
                        "target has {} states, model has {}",
                        target.len(),
                        model.n_states()
                    )));
                }
                wasserstein_on_line(&f.state_marginal(), target, model.positions())?
            }
            Objective::ExpectedRewardPlusTerminal(h0) => {
                let marginal = f.state_marginal();
                h0.evaluate(&marginal, model.positions())? + expected_reward()
            }
            Objective::Custom(c) => (c.eval)(f, support),
        })
    }

    /// The quantity the solvers maximize: `H(F)`, negated for minimized objectives.
    pub fn score(&self, f: &JointDistribution, model: &MdpModel, support: &RewardSupport) -> Result<f64> {
        let v = self.evaluate(f, model, support)?;
        Ok(match self.sense() {
            Sense::Maximize => v,
            Sense::Minimize => -v,
        })
    }

    /// Converts a maximized score back to the natural sense.
    pub fn natural(&self, score: f64) -> f64 {
        match self.sense() {
            Sense::Maximize => score,
            Sense::Minimize => -score,
        }
    }
}

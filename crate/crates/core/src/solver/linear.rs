//! Exact recursions for objectives that are linear in the terminal law.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lifted::{KernelAction, LiftedActionSequence};
use crate::model::MdpModel;
use crate::objective::reaches_threshold;
use crate::policy::MarkovPolicy;
use crate::support::RewardSupport;

/// Two action values closer than this are treated as tied; ties go to the
/// lowest action index.
pub const TIE_EPSILON: f64 = 1e-12;

/// `V_n` over `E x S_n` (width 1 for the classical reduction) with argmax tables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueTables {
    /// `values[n][x * widths[n] + s]`, for `n = 0..=N`.
    pub values: Vec<Vec<f64>>,
    /// `argmax[n][x * widths[n] + s]`, for `n = 0..N`.
    pub argmax: Vec<Vec<usize>>,
    pub widths: Vec<usize>,
}

impl ValueTables {
    pub fn horizon(&self) -> usize {
        self.argmax.len()
    }

    pub fn value(&self, n: usize, x: usize, s: usize) -> f64 {
        self.values[n][x * self.widths[n] + s]
    }

    pub fn action(&self, n: usize, x: usize, s: usize) -> usize {
        self.argmax[n][x * self.widths[n] + s]
    }

    /// `sum_x nu(x) V_0(x, 0)`.
    pub fn value_from(&self, initial: &[f64]) -> f64 {
        initial.iter().enumerate().map(|(x, p)| p * self.value(0, x, 0)).sum()
    }

    /// Deterministic kernels reading the argmax tables.
    pub fn action_sequence(&self, n_states: usize, n_actions: usize) -> LiftedActionSequence {
        let kernels = (0..self.horizon())
            .map(|n| KernelAction::deterministic(n, n_states, self.widths[n], n_actions, &self.argmax[n]))
            .collect();
        LiftedActionSequence { kernels }
    }

    /// The argmax tables of a width-1 recursion as a Markov policy.
    pub fn markov_policy(&self, n_actions: usize) -> MarkovPolicy {
        MarkovPolicy::deterministic(&self.argmax, n_actions)
    }
}

/// Best action for `q(a)`, lowest index among near-ties, and the maximum.
pub(crate) fn best_action(n_actions: usize, mut q: impl FnMut(usize) -> f64) -> (usize, f64) {
    let mut best = (0, q(0));
    let mut max = best.1;
    for a in 1..n_actions {
        let v = q(a);
        if v > best.1 + TIE_EPSILON {
            best = (a, v);
        }
        max = max.max(v);
    }
    (best.0, max)
}

/// `V_N = w` and `V_n(x, s) = max_a sum_{x'} V_{n+1}(x', s + r_n(x, a)) q(x'|x, a)`.
///
/// `weights` is laid out like the terminal joint distribution, `x * |S_N| + s`.
pub fn linear_terminal_dp(model: &MdpModel, support: &RewardSupport, weights: &[f64]) -> Result<ValueTables> {
    let horizon = model.horizon();
    if support.horizon() != horizon {
        return Err(Error::Shape(format!(
            "support covers {} stages, model has {horizon}",
            support.horizon()
        )));
    }
    let (ns, na) = (model.n_states(), model.n_actions());
    let widths: Vec<usize> = (0..=horizon).map(|n| support.len(n)).collect();
    if weights.len() != ns * widths[horizon] {
        return Err(Error::Shape(format!(
            "terminal weights have {} entries, expected {}",
            weights.len(),
            ns * widths[horizon]
        )));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
        return Err(Error::InvalidParameter(format!("terminal weight {w} is not finite")));
    }
    let mut values = vec![Vec::new(); horizon + 1];
    let mut argmax = vec![Vec::new(); horizon];
    values[horizon] = weights.to_vec();
    for n in (0..horizon).rev() {
        let (width, next_width) = (widths[n], widths[n + 1]);
        let next = &values[n + 1];
        let mut v = vec![0.0; ns * width];
        let mut arg = vec![0; ns * width];
        for x in 0..ns {
            for s in 0..width {
                let (a, best) = best_action(na, |a| {
                    let s_next = support.successor(n, s, x, a);
                    model
                        .transition_row(x, a)
                        .iter()
                        .enumerate()
                        .map(|(x_next, q)| q * next[x_next * next_width + s_next])
                        .sum()
                });
                v[x * width + s] = best;
                arg[x * width + s] = a;
            }
        }
        values[n] = v;
        argmax[n] = arg;
    }
    Ok(ValueTables { values, argmax, widths })
}

/// `V_N = g` and `V_n(x) = max_a { r_n(x, a) + sum_{x'} V_{n+1}(x') q(x'|x, a) }`.
pub fn classical_bellman(model: &MdpModel) -> ValueTables {
    let horizon = model.horizon();
    let (ns, na) = (model.n_states(), model.n_actions());
    let mut values = vec![Vec::new(); horizon + 1];
    let mut argmax = vec![Vec::new(); horizon];
    values[horizon] = model.terminal().to_vec();
    for n in (0..horizon).rev() {
        let next = &values[n + 1];
        let (arg, v): (Vec<usize>, Vec<f64>) = (0..ns)
            .map(|x| {
                best_action(na, |a| {
                    model.reward(n, x, a)
                        + model
                            .transition_row(x, a)
                            .iter()
                            .zip(next)
                            .map(|(q, v)| q * v)
                            .sum::<f64>()
                })
            })
            .unzip();
        values[n] = v;
        argmax[n] = arg;
    }
    ValueTables {
        values,
        argmax,
        widths: vec![1; horizon + 1],
    }
}

/// The linear recursion with `V_N(x, s) = 1{s + g(x) >= t}`; `V_0(x, 0)` is the
/// largest achievable `P(R_{N-1} + g(X_N) >= t | X_0 = x)`.
pub fn quantile_dp(model: &MdpModel, support: &RewardSupport, threshold: f64) -> Result<ValueTables> {
    let values = support.stage(model.horizon()).floats();
    let weights: Vec<f64> = (0..model.n_states())
        .flat_map(|x| {
            values.iter().map(move |&s| {
                if reaches_threshold(s, model.terminal()[x], threshold) {
                    1.0
                } else {
                    0.0
                }
            })
        })
        .collect();
    linear_terminal_dp(model, support, &weights)
}

//! History-dependent policies of the original MDP.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{MdpModel, PROBABILITY_TOLERANCE};

/// `h_n = (x_0, a_0, ..., x_n)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct History {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
}

impl History {
    pub fn start(x0: usize) -> Self {
        History {
            states: vec![x0],
            actions: Vec::new(),
        }
    }

    /// The stage `n` of `h_n`.
    pub fn stage(&self) -> usize {
        self.actions.len()
    }

    pub fn current_state(&self) -> usize {
        *self.states.last().expect("history has an initial state")
    }

    pub fn push(&mut self, action: usize, next: usize) {
        self.actions.push(action);
        self.states.push(next);
    }

    pub fn pop(&mut self) {
        self.actions.pop();
        self.states.pop();
    }

    fn key(&self) -> String {
        let mut s = format!("x{}", self.states[0]);
        for (a, x) in self.actions.iter().zip(&self.states[1..]) {
            s.push_str(&format!(" a{a} x{x}"));
        }
        s
    }
}

/// `sigma_n(.|h_n)` for every history of length below the horizon.
pub trait HistoryPolicy {
    fn distribution(&self, history: &History) -> Result<Vec<f64>>;
}

/// Checks that `p` is a distribution over `n_actions` actions.
pub fn check_action_distribution(p: &[f64], n_actions: usize) -> Result<()> {
    if p.len() != n_actions {
        return Err(Error::Shape(format!("action distribution has {} entries, expected {n_actions}", p.len())));
    }
    let sum: f64 = p.iter().sum();
    if p.iter().any(|v| !(*v >= 0.0)) || (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(Error::InvalidParameter(format!("not a probability distribution: {p:?}")));
    }
    Ok(())
}

/// `sigma_n(a|x)`, ignoring everything in the history but the current state.
#[derive(Debug, Clone)]
pub struct MarkovPolicy {
    /// `rules[n][x][a]`
    pub rules: Vec<Vec<Vec<f64>>>,
}

impl MarkovPolicy {
    /// The same decision rule at every stage.
    pub fn stationary(rule: Vec<Vec<f64>>, horizon: usize) -> Self {
        MarkovPolicy {
            rules: vec![rule; horizon],
        }
    }

    pub fn deterministic(choices: &[Vec<usize>], n_actions: usize) -> Self {
        let rules = choices
            .iter()
            .map(|stage| stage.iter().map(|&a| point_mass(a, n_actions)).collect())
            .collect();
        MarkovPolicy { rules }
    }
}

impl HistoryPolicy for MarkovPolicy {
    fn distribution(&self, history: &History) -> Result<Vec<f64>> {
        self.rules
            .get(history.stage())
            .and_then(|r| r.get(history.current_state()))
            .cloned()
            .ok_or_else(|| Error::MissingDecision(history.key()))
    }
}

/// Explicit table keyed by the full history.
#[derive(Debug, Clone, Default)]
pub struct TabularPolicy {
    table: HashMap<History, Vec<f64>>,
}

impl TabularPolicy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, history: History, distribution: Vec<f64>) {
        self.table.insert(history, distribution);
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Draws a randomized decision for every history of length `< N`.
    ///
    /// With `deterministic_share` in `[0, 1]`, that fraction of rows are point
    /// masses; the rest are random points of the simplex with some zeros.
    pub fn random<R: Rng>(model: &MdpModel, rng: &mut R, deterministic_share: f64) -> Self {
        let mut policy = TabularPolicy::new();
        let na = model.n_actions();
        for_each_history(model.n_states(), na, model.horizon(), |h| {
            let row = if rng.gen_bool(deterministic_share.clamp(0.0, 1.0)) {
                point_mass(rng.gen_range(0..na), na)
            } else {
                random_simplex_point(rng, na)
            };
            policy.insert(h.clone(), row);
        });
        policy
    }

    /// A deterministic policy from a per-history action picker.
    pub fn deterministic(model: &MdpModel, mut choose: impl FnMut(&History) -> usize) -> Self {
        let mut policy = TabularPolicy::new();
        let na = model.n_actions();
        for_each_history(model.n_states(), na, model.horizon(), |h| {
            policy.insert(h.clone(), point_mass(choose(h), na));
        });
        policy
    }
}

impl HistoryPolicy for TabularPolicy {
    fn distribution(&self, history: &History) -> Result<Vec<f64>> {
        self.table
            .get(history)
            .cloned()
            .ok_or_else(|| Error::MissingDecision(history.key()))
    }
}

pub fn point_mass(index: usize, len: usize) -> Vec<f64> {
    let mut p = vec![0.0; len];
    p[index] = 1.0;
    p
}

/// A random point of the simplex; roughly a quarter of entries are zeroed.
pub fn random_simplex_point<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..len)
        .map(|_| if rng.gen_bool(0.25) { 0.0 } else { rng.gen_range(0.05..1.0) })
        .collect();
    if w.iter().all(|v| *v == 0.0) {
        w[rng.gen_range(0..len)] = 1.0;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Visits every history `h_n` with `n < horizon`, shortest first.
pub fn for_each_history(n_states: usize, n_actions: usize, horizon: usize, mut visit: impl FnMut(&History)) {
    let mut layer: Vec<History> = (0..n_states).map(History::start).collect();
    for n in 0..horizon {
        for h in &layer {
            visit(h);
        }
        if n + 1 == horizon {
            break;
        }
        let mut next = Vec::with_capacity(layer.len() * n_states * n_actions);
        for h in &layer {
            for a in 0..n_actions {
                for x in 0..n_states {
                    let mut g = h.clone();
                    g.push(a, x);
                    next.push(g);
                }
            }
        }
        layer = next;
    }
}

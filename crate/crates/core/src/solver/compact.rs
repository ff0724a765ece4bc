//! Value iteration on marginal states `P(E)` for models whose actions live in
//! a compact box, restricted to a finite action grid.
//!
//! `J_n(F) = max_pi { rhat_n(F, pi) + J_{n+1}(T^pi(F)) }` with
//! `rhat_n(F, pi) = sum_x F(x) r_n(x, pi(x))` and `J_N = H_0`. Kernels are
//! deterministic and grid valued, so the result is a lower bound of the
//! continuous problem that can only grow when the grid is refined.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::objective::MarginalFunctional;

use super::linear::TIE_EPSILON;

/// A finite-state model with actions in `[lower, upper]^d` and a feasibility test.
pub trait ContinuousActionModel: Sync {
    fn n_states(&self) -> usize;
    fn horizon(&self) -> usize;
    /// Per-coordinate bounds of the action box.
    fn action_box(&self) -> Vec<(f64, f64)>;
    fn feasible(&self, x: usize, action: &[f64]) -> bool;
    /// `q(. | x, a)`
    fn transition(&self, x: usize, action: &[f64]) -> Vec<f64>;
    fn reward(&self, stage: usize, x: usize, action: &[f64]) -> f64;
    fn initial(&self) -> &[f64];
    /// Numeric positions of the states (used by distance objectives).
    fn positions(&self) -> Vec<f64> {
        (0..self.n_states()).map(|x| x as f64).collect()
    }
}

/// Candidate actions per state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionGrid {
    pub points: Vec<Vec<Vec<f64>>>,
}

impl ActionGrid {
    /// The feasible points of a uniform grid with `resolution` points per axis.
    pub fn uniform(model: &dyn ContinuousActionModel, resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid resolution must be at least 2, got {resolution}"
            )));
        }
        let axes: Vec<Vec<f64>> = model
            .action_box()
            .iter()
            .map(|&(lo, hi)| {
                (0..resolution)
                    .map(|i| lo + (hi - lo) * i as f64 / (resolution - 1) as f64)
                    .collect()
            })
            .collect();
        let mut all: Vec<Vec<f64>> = vec![Vec::new()];
        for axis in &axes {
            all = all
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        let points: Vec<Vec<Vec<f64>>> = (0..model.n_states())
            .map(|x| all.iter().filter(|a| model.feasible(x, a)).cloned().collect())
            .collect();
        if let Some(x) = points.iter().position(Vec::is_empty) {
            return Err(Error::Infeasible(format!("no grid action is feasible at state {x}")));
        }
        Ok(ActionGrid { points })
    }

    /// Adds `action` at state `x` unless it is already present.
    pub fn with_point(mut self, model: &dyn ContinuousActionModel, x: usize, action: Vec<f64>) -> Result<Self> {
        if !model.feasible(x, &action) {
            return Err(Error::Infeasible(format!("action {action:?} is not feasible at state {x}")));
        }
        if !self.points[x].contains(&action) {
            self.points[x].push(action);
        }
        Ok(self)
    }

    pub fn len(&self, x: usize) -> usize {
        self.points[x].len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompactReport {
    /// `J_0(F_0)`, the maximized value.
    pub value: f64,
    /// `actions[n][x]`, the grid action used at stage `n` in state `x`.
    pub actions: Vec<Vec<Vec<f64>>>,
    /// Marginal trajectory `F_0, ..., F_N`.
    pub trajectory: Vec<Vec<f64>>,
    /// Expected stage rewards `rhat_n` along the trajectory.
    pub stage_rewards: Vec<f64>,
    pub terminal_value: f64,
    pub nodes_expanded: u64,
}

struct Search<'a> {
    model: &'a dyn ContinuousActionModel,
    terminal: &'a MarginalFunctional,
    grid: &'a ActionGrid,
    positions: Vec<f64>,
    budget: u64,
    nodes: u64,
    /// Transition rows and rewards per `(x, grid index)`, rewards per stage.
    rows: Vec<Vec<Vec<f64>>>,
    memo: HashMap<(usize, Vec<i64>), (f64, Vec<Vec<usize>>)>,
}

const QUANTUM: f64 = 1e-12;

impl Search<'_> {
    fn step(&self, f: &[f64], choice: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        for (x, &m) in f.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (y, q) in self.rows[x][choice[x]].iter().enumerate() {
                out[y] += m * q;
            }
        }
        out
    }

    fn stage_reward(&self, n: usize, f: &[f64], choice: &[usize]) -> f64 {
        f.iter()
            .enumerate()
            .filter(|(_, m)| **m != 0.0)
            .map(|(x, m)| m * self.model.reward(n, x, &self.grid.points[x][choice[x]]))
            .sum()
    }

    fn solve(&mut self, n: usize, f: &[f64]) -> Result<(f64, Vec<Vec<usize>>)> {
        if n == self.model.horizon() {
            return Ok((self.terminal.evaluate(f, &self.positions)?, Vec::new()));
        }
        let key = (n, f.iter().map(|m| (m / QUANTUM).round() as i64).collect::<Vec<_>>());
        if let Some(hit) = self.memo.get(&key) {
            return Ok(hit.clone());
        }
        let visited: Vec<usize> = (0..f.len()).filter(|&x| f[x] > 0.0).collect();
        let combinations: f64 = visited.iter().map(|&x| self.grid.len(x) as f64).product();
        if combinations + self.nodes as f64 > self.budget as f64 {
            return Err(Error::BudgetExceeded {
                needed: combinations + self.nodes as f64,
                budget: self.budget,
            });
        }
        let mut choice = vec![0usize; f.len()];
        let mut best: Option<(f64, Vec<Vec<usize>>)> = None;
        loop {
            self.nodes += 1;
            let next = self.step(f, &choice);
            let (future, mut rest) = self.solve(n + 1, &next)?;
            let v = self.stage_reward(n, f, &choice) + future;
            if best.as_ref().is_none_or(|(b, _)| v > b + TIE_EPSILON) {
                rest.insert(0, choice.clone());
                best = Some((v, rest));
            }
            let mut i = visited.len();
            loop {
                if i == 0 {
                    let best = best.expect("one combination was tried");
                    self.memo.insert(key, best.clone());
                    return Ok(best);
                }
                i -= 1;
                let x = visited[i];
                choice[x] += 1;
                if choice[x] < self.grid.len(x) {
                    break;
                }
                choice[x] = 0;
            }
        }
    }
}

/// Exact maximization over grid-valued deterministic kernels along the
/// trajectory from the model's initial marginal.
pub fn compact_grid_value_iteration(
    model: &dyn ContinuousActionModel,
    terminal: &MarginalFunctional,
    grid: &ActionGrid,
    budget: u64,
) -> Result<CompactReport> {
    if !terminal.regularity().upper_semicontinuous {
        return Err(Error::Regularity("terminal functional must be upper semicontinuous".into()));
    }
    let ns = model.n_states();
    if grid.points.len() != ns {
        return Err(Error::Shape(format!("grid covers {} states, model has {ns}", grid.points.len())));
    }
    let rows = grid
        .points
        .iter()
        .enumerate()
        .map(|(x, pts)| pts.iter().map(|a| model.transition(x, a)).collect())
        .collect();
    let mut search = Search {
        model,
        terminal,
        grid,
        positions: model.positions(),
        budget,
        nodes: 0,
        rows,
        memo: HashMap::new(),
    };
    let initial = model.initial().to_vec();
    let (value, choices) = search.solve(0, &initial)?;
    let mut trajectory = vec![initial];
    let mut stage_rewards = Vec::with_capacity(choices.len());
    for (n, choice) in choices.iter().enumerate() {
        stage_rewards.push(search.stage_reward(n, &trajectory[n], choice));
        let next = search.step(&trajectory[n], choice);
        trajectory.push(next);
    }
    let terminal_value = terminal.evaluate(trajectory.last().expect("F_0 present"), &search.positions)?;
    let actions = choices
        .iter()
        .map(|c| c.iter().enumerate().map(|(x, &i)| grid.points[x][i].clone()).collect())
        .collect();
    Ok(CompactReport {
        value,
        actions,
        trajectory,
        stage_rewards,
        terminal_value,
        nodes_expanded: search.nodes,
    })
}

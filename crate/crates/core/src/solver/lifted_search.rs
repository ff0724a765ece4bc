//! Search over lifted action sequences `(pi_0, ..., pi_{N-1})`.
//!
//! The lifted dynamics are deterministic, so `J_0(F_0)` is the supremum of
//! `H(T^{pi_{N-1}} ... T^{pi_0}(F_0))` over sequences and only the trajectory
//! from `F_0` is ever computed.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lifted::{apply_transition, policy_project, JointDistribution, KernelAction, LiftedActionSequence, ProjectedPolicy};
use crate::model::MdpModel;
use crate::objective::Objective;
use crate::policy::{point_mass, random_simplex_point};
use crate::support::RewardSupport;

use super::linear::{linear_terminal_dp, TIE_EPSILON};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Strategy {
    /// All deterministic kernels, stage by stage, memoized on the quantized
    /// distribution. Linear objectives are maximized cell by cell instead,
    /// which gives the same maximum without enumerating the product.
    Exhaustive,
    /// Multi-start row-by-row ascent over randomized kernels.
    CoordinateAscent,
    /// Exhaustive when it fits in the budget, coordinate ascent otherwise.
    Auto,
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub strategy: Strategy,
    /// Cap on lifted transitions evaluated by the exhaustive search.
    pub budget: u64,
    pub starts: usize,
    pub sweeps: usize,
    pub improvement_tolerance: f64,
    /// Memoization grid for distributions in the exhaustive search.
    pub memo_quantum: f64,
    /// Mass used to choose rows on cells the trajectory does not visit.
    pub probe_mass: f64,
    /// Denominator of the simplex lattice tried for each row.
    pub lattice: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            strategy: Strategy::Auto,
            budget: 10_000_000,
            starts: 16,
            sweeps: 100,
            improvement_tolerance: 1e-10,
            memo_quantum: 1e-9,
            probe_mass: 1e-3,
            lattice: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SearchStats {
    pub nodes_expanded: u64,
    pub restarts: usize,
    /// Best score after each sweep of the winning start (ascent only).
    pub best_trace: Vec<f64>,
    pub memo_entries: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    /// `H(F_N)` in the objective's own sense.
    pub value: f64,
    /// The maximized quantity (`value`, negated for minimized objectives).
    pub score: f64,
    pub sequence: LiftedActionSequence,
    pub trajectory: Vec<JointDistribution>,
    pub strategy: Strategy,
    /// True when the value is the optimum, false for heuristic lower bounds.
    pub certified: bool,
    pub stats: SearchStats,
}

impl SolveReport {
    pub fn terminal(&self) -> &JointDistribution {
        self.trajectory.last().expect("trajectory holds F_0")
    }

    pub fn projected_policy<'m>(&self, model: &'m MdpModel, support: &'m RewardSupport) -> Result<ProjectedPolicy<'m>> {
        policy_project(&self.sequence, model, support)
    }
}

/// Maximizes the objective's score over lifted action sequences from `F_0`.
pub fn lifted_value_iteration(
    model: &MdpModel,
    support: &RewardSupport,
    objective: &Objective,
    config: &SearchConfig,
) -> Result<SolveReport> {
    if !objective.regularity().upper_semicontinuous {
        return Err(Error::Regularity(
            "the lifted search needs an upper semicontinuous objective".into(),
        ));
    }
    if support.horizon() != model.horizon() {
        return Err(Error::Shape(format!(
            "support covers {} stages, model has {}",
            support.horizon(),
            model.horizon()
        )));
    }
    let linear = objective.linear_weights(model, support);
    match (config.strategy, linear) {
        (Strategy::Exhaustive | Strategy::Auto, Some(weights)) => {
            let tables = linear_terminal_dp(model, support, &weights)?;
            let sequence = tables.action_sequence(model.n_states(), model.n_actions());
            let nodes = (0..model.horizon()).map(|n| support.len(n) as u64).sum::<u64>()
                * (model.n_states() * model.n_actions()) as u64;
            finish(model, support, objective, sequence, Strategy::Exhaustive, true, SearchStats {
                nodes_expanded: nodes,
                ..Default::default()
            })
        }
        (Strategy::Exhaustive, None) => exhaustive(model, support, objective, config),
        (Strategy::Auto, None) => match exhaustive(model, support, objective, config) {
            Err(Error::BudgetExceeded { .. }) => coordinate_ascent(model, support, objective, config),
            other => other,
        },
        (Strategy::CoordinateAscent, _) => coordinate_ascent(model, support, objective, config),
    }
}

fn finish(
    model: &MdpModel,
    support: &RewardSupport,
    objective: &Objective,
    sequence: LiftedActionSequence,
    strategy: Strategy,
    certified: bool,
    stats: SearchStats,
) -> Result<SolveReport> {
    let trajectory = sequence.trajectory(model, support)?;
    let terminal = trajectory.last().expect("trajectory holds F_0");
    let value = objective.evaluate(terminal, model, support)?;
    Ok(SolveReport {
        value,
        score: objective.natural(value),
        sequence,
        trajectory,
        strategy,
        certified,
        stats,
    })
}

struct Exhaustive<'a> {
    model: &'a MdpModel,
    support: &'a RewardSupport,
    objective: &'a Objective,
    budget: u64,
    quantum: f64,
    nodes: u64,
    memo: HashMap<(usize, Vec<i64>), (f64, Vec<Vec<usize>>)>,
}

impl Exhaustive<'_> {
    fn key(&self, f: &JointDistribution) -> (usize, Vec<i64>) {
        (f.stage(), f.mass().iter().map(|m| (m / self.quantum).round() as i64).collect())
    }

    /// Best score reachable from `f` and the per-stage choices achieving it.
    fn search(&mut self, f: &JointDistribution) -> Result<(f64, Vec<Vec<usize>>)> {
        let n = f.stage();
        if n == self.model.horizon() {
            return Ok((self.objective.score(f, self.model, self.support)?, Vec::new()));
        }
        let key = self.key(f);
        if let Some(hit) = self.memo.get(&key) {
            return Ok(hit.clone());
        }
        let (ns, na) = (self.model.n_states(), self.model.n_actions());
        let width = f.width();
        let cells: Vec<usize> = (0..ns * width).filter(|&c| f.mass()[c] > 0.0).collect();
        let combinations = (na as f64).powi(cells.len() as i32);
        if combinations + self.nodes as f64 > self.budget as f64 {
            return Err(Error::BudgetExceeded {
                needed: combinations + self.nodes as f64,
                budget: self.budget,
            });
        }
        let mut choice = vec![0usize; ns * width];
        let mut best: Option<(f64, Vec<Vec<usize>>)> = None;
        loop {
            self.nodes += 1;
            let pi = KernelAction::deterministic(n, ns, width, na, &choice);
            let next = apply_transition(f, &pi, self.model, self.support)?;
            let (score, mut rest) = self.search(&next)?;
            if best.as_ref().is_none_or(|(b, _)| score > b + TIE_EPSILON) {
                rest.insert(0, choice.clone());
                best = Some((score, rest));
            }
            // odometer over the visited cells, last cell fastest
            let mut i = cells.len();
            loop {
                if i == 0 {
                    let best = best.expect("at least one kernel was tried");
                    self.memo.insert(key, best.clone());
                    return Ok(best);
                }
                i -= 1;
                let c = cells[i];
                choice[c] += 1;
                if choice[c] < na {
                    break;
                }
                choice[c] = 0;
            }
        }
    }
}

fn exhaustive(
    model: &MdpModel,
    support: &RewardSupport,
    objective: &Objective,
    config: &SearchConfig,
) -> Result<SolveReport> {
    let mut search = Exhaustive {
        model,
        support,
        objective,
        budget: config.budget,
        quantum: config.memo_quantum,
        nodes: 0,
        memo: HashMap::new(),
    };
    let (_, choices) = search.search(&JointDistribution::initial(model))?;
    let kernels = choices
        .iter()
        .enumerate()
        .map(|(n, c)| KernelAction::deterministic(n, model.n_states(), support.len(n), model.n_actions(), c))
        .collect();
    let stats = SearchStats {
        nodes_expanded: search.nodes,
        memo_entries: search.memo.len(),
        ..Default::default()
    };
    // exact over deterministic kernels, which is the full problem only for
    // linear objectives (handled before reaching here)
    finish(model, support, objective, LiftedActionSequence { kernels }, Strategy::Exhaustive, false, stats)
}

/// Law of `(X_N, R_{N-1})` from a unit mass at `(x, s)` in stage `n` that
/// plays `a` there and follows `kernels` afterwards, as sparse terminal cells.
fn propagate_unit(
    model: &MdpModel,
    support: &RewardSupport,
    kernels: &[KernelAction],
    n: usize,
    x: usize,
    s: usize,
    a: usize,
) -> BTreeMap<usize, f64> {
    let ns = model.n_states();
    let mut current: BTreeMap<usize, f64> = BTreeMap::new();
    let s_next = support.successor(n, s, x, a);
    let width = support.len(n + 1);
    for (x_next, &q) in model.transition_row(x, a).iter().enumerate() {
        if q != 0.0 {
            *current.entry(x_next * width + s_next).or_default() += q;
        }
    }
    for (k, pi) in kernels.iter().enumerate().skip(n + 1) {
        let width = support.len(k);
        let next_width = support.len(k + 1);
        let mut next: BTreeMap<usize, f64> = BTreeMap::new();
        for (&cell, &m) in &current {
            let (y, t) = (cell / width, cell % width);
            for (b, &p) in pi.row(y, t).iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let t_next = support.successor(k, t, y, b);
                for (y_next, &q) in model.transition_row(y, b).iter().enumerate() {
                    if q != 0.0 {
                        *next.entry(y_next * next_width + t_next).or_default() += m * p * q;
                    }
                }
            }
        }
        debug_assert!(next.keys().all(|c| c / next_width < ns));
        current = next;
    }
    current
}

/// Points of the simplex with coordinates in multiples of `1 / d`.
fn simplex_lattice(n_actions: usize, d: usize) -> Vec<Vec<f64>> {
    fn fill(rest: usize, slots: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            prefix.push(rest);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=rest {
            prefix.push(k);
            fill(rest - k, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut raw = Vec::new();
    fill(d, n_actions, &mut Vec::new(), &mut raw);
    raw.into_iter()
        .map(|p| p.into_iter().map(|k| k as f64 / d as f64).collect())
        .collect()
}

struct StartResult {
    score: f64,
    kernels: Vec<KernelAction>,
    trace: Vec<f64>,
    nodes: u64,
}

struct Ascent<'a> {
    model: &'a MdpModel,
    support: &'a RewardSupport,
    objective: &'a Objective,
    config: &'a SearchConfig,
    lattice: Vec<Vec<f64>>,
}

impl Ascent<'_> {
    fn rollout(&self, kernels: &[KernelAction]) -> Result<Vec<JointDistribution>> {
        let mut trajectory = vec![JointDistribution::initial(self.model)];
        for (n, pi) in kernels.iter().enumerate() {
            let next = apply_transition(&trajectory[n], pi, self.model, self.support)?;
            trajectory.push(next);
        }
        Ok(trajectory)
    }

    fn score(&self, f: &JointDistribution) -> Result<f64> {
        self.objective.score(f, self.model, self.support)
    }

    /// `terminal + sum_a coeff[a] * directions[a]`, clamped at zero.
    fn shifted(
        &self,
        terminal: &JointDistribution,
        scale: f64,
        directions: &[BTreeMap<usize, f64>],
        coeff: &[f64],
    ) -> Result<JointDistribution> {
        let mut mass: Vec<f64> = terminal.mass().iter().map(|m| m * scale).collect();
        for (d, &c) in directions.iter().zip(coeff) {
            if c == 0.0 {
                continue;
            }
            for (&cell, &v) in d {
                mass[cell] += c * v;
            }
        }
        for m in &mut mass {
            if *m < 0.0 {
                *m = 0.0;
            }
        }
        JointDistribution::from_mass(terminal.stage(), terminal.n_states(), terminal.width(), mass)
    }

    fn candidates(&self, current: &[f64]) -> Vec<Vec<f64>> {
        let na = current.len();
        let mut out: Vec<Vec<f64>> = (0..na).map(|a| point_mass(a, na)).collect();
        out.extend(self.lattice.iter().cloned());
        out.push(current.to_vec());
        out
    }

    /// Best row for one cell: a lattice scan followed by pairwise mass shifts
    /// of shrinking size. `value` scores a candidate row.
    fn optimize_row(
        &self,
        current: &[f64],
        nodes: &mut u64,
        mut value: impl FnMut(&[f64]) -> Result<f64>,
    ) -> Result<(Vec<f64>, f64)> {
        let na = current.len();
        let mut best_row = current.to_vec();
        let mut best = value(current)?;
        *nodes += 1;
        for row in self.candidates(current) {
            *nodes += 1;
            let v = value(&row)?;
            if v > best + self.config.improvement_tolerance {
                best = v;
                best_row = row;
            }
        }
        if na > 1 {
            let mut step = 0.5 / self.config.lattice.max(1) as f64;
            while step >= 1e-4 {
                let mut improved = false;
                for from in 0..na {
                    for to in 0..na {
                        if from == to || best_row[from] <= 0.0 {
                            continue;
                        }
                        let moved = step.min(best_row[from]);
                        let mut row = best_row.clone();
                        row[from] -= moved;
                        row[to] += moved;
                        *nodes += 1;
                        let v = value(&row)?;
                        if v > best + self.config.improvement_tolerance {
                            best = v;
                            best_row = row;
                            improved = true;
                        }
                    }
                }
                if !improved {
                    step /= 2.0;
                }
            }
        }
        Ok((best_row, best))
    }

    fn run(&self, mut kernels: Vec<KernelAction>) -> Result<StartResult> {
        let horizon = self.model.horizon();
        let (ns, na) = (self.model.n_states(), self.model.n_actions());
        let mut nodes = 0u64;
        let mut trajectory = self.rollout(&kernels)?;
        let mut score = self.score(&trajectory[horizon])?;
        let mut trace = vec![score];
        let h = self.config.probe_mass;
        for _ in 0..self.config.sweeps {
            let before = score;
            for n in (0..horizon).rev() {
                let width = self.support.len(n);
                for x in 0..ns {
                    for s in 0..width {
                        let m = trajectory[n].get(x, s);
                        let directions: Vec<BTreeMap<usize, f64>> = (0..na)
                            .map(|a| propagate_unit(self.model, self.support, &kernels, n, x, s, a))
                            .collect();
                        let current = kernels[n].row(x, s).to_vec();
                        let terminal = &trajectory[horizon];
                        if m > 0.0 {
                            let (row, value) = self.optimize_row(&current, &mut nodes, |row| {
                                let coeff: Vec<f64> = row.iter().zip(&current).map(|(r, c)| m * (r - c)).collect();
                                self.score(&self.shifted(terminal, 1.0, &directions, &coeff)?)
                            })?;
                            if value > score + self.config.improvement_tolerance {
                                kernels[n].set_row(x, s, &row);
                                trajectory = self.rollout(&kernels)?;
                                score = self.score(&trajectory[horizon])?;
                            }
                        } else {
                            // unvisited cell: choose the row a small mass would prefer
                            let (row, _) = self.optimize_row(&current, &mut nodes, |row| {
                                let coeff: Vec<f64> = row.iter().map(|r| h * r).collect();
                                self.score(&self.shifted(terminal, 1.0 - h, &directions, &coeff)?)
                            })?;
                            kernels[n].set_row(x, s, &row);
                        }
                    }
                }
            }
            trace.push(score);
            if score <= before + self.config.improvement_tolerance && trace.len() > 2 {
                break;
            }
        }
        Ok(StartResult {
            score,
            kernels,
            trace,
            nodes,
        })
    }

    fn start(&self, index: usize) -> Vec<KernelAction> {
        let (ns, na) = (self.model.n_states(), self.model.n_actions());
        if index == 0 {
            return (0..self.model.horizon())
                .map(|n| KernelAction::uniform(n, ns, self.support.len(n), na))
                .collect();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed.wrapping_add(index as u64));
        (0..self.model.horizon())
            .map(|n| {
                KernelAction::from_rows(n, ns, self.support.len(n), na, |_, _| random_simplex_point(&mut rng, na))
                    .expect("random rows are distributions")
            })
            .collect()
    }
}

fn lexicographic(a: &[KernelAction], b: &[KernelAction]) -> Ordering {
    for (ka, kb) in a.iter().zip(b) {
        for x in 0..ka.n_states() {
            for s in 0..ka.width() {
                for (p, q) in ka.row(x, s).iter().zip(kb.row(x, s)) {
                    match p.total_cmp(q) {
                        Ordering::Equal => {}
                        other => return other,
                    }
                }
            }
        }
    }
    Ordering::Equal
}

fn coordinate_ascent(
    model: &MdpModel,
    support: &RewardSupport,
    objective: &Objective,
    config: &SearchConfig,
) -> Result<SolveReport> {
    let ascent = Ascent {
        model,
        support,
        objective,
        config,
        lattice: if model.n_actions() <= 4 {
            simplex_lattice(model.n_actions(), config.lattice.max(1))
        } else {
            Vec::new()
        },
    };
    let results: Vec<Result<StartResult>> = (0..config.starts.max(1))
        .into_par_iter()
        .map(|i| ascent.run(ascent.start(i)))
        .collect();
    let mut nodes = 0;
    let mut best: Option<StartResult> = None;
    for r in results {
        let r = r?;
        nodes += r.nodes;
        let better = match &best {
            None => true,
            Some(b) => match r.score.total_cmp(&b.score) {
                Ordering::Greater => true,
                Ordering::Equal => lexicographic(&r.kernels, &b.kernels) == Ordering::Less,
                Ordering::Less => false,
            },
        };
        if better {
            best = Some(r);
        }
    }
    let best = best.expect("at least one start");
    let stats = SearchStats {
        nodes_expanded: nodes,
        restarts: config.starts.max(1),
        best_trace: best.trace,
        memo_entries: 0,
    };
    finish(
        model,
        support,
        objective,
        LiftedActionSequence { kernels: best.kernels },
        Strategy::CoordinateAscent,
        false,
        stats,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;
    use crate::support::compute_reward_support;

    #[test]
    fn lattice_counts() {
        assert_eq!(simplex_lattice(2, 4).len(), 5);
        assert_eq!(simplex_lattice(3, 4).len(), 15);
        for p in simplex_lattice(3, 4) {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn no_choice_means_the_unique_kernel() {
        let model = MdpModel::new(ModelSpec {
            n_states: 1,
            n_actions: 1,
            horizon: 1,
            reward: vec![vec![vec![0.25]]],
            terminal: vec![1.0],
            transition: vec![vec![vec![1.0]]],
            initial: vec![1.0],
            positions: None,
        })
        .unwrap();
        let support = compute_reward_support(&model).unwrap();
        for strategy in [Strategy::Exhaustive, Strategy::CoordinateAscent, Strategy::Auto] {
            let config = SearchConfig {
                strategy,
                starts: 2,
                ..Default::default()
            };
            let r = lifted_value_iteration(&model, &support, &Objective::classical(), &config).unwrap();
            assert_eq!(r.value, 1.25);
        }
    }

    #[test]
    fn objectives_without_semicontinuity_are_refused() {
        let model = MdpModel::new(ModelSpec {
            n_states: 1,
            n_actions: 1,
            horizon: 1,
            reward: vec![vec![vec![0.0]]],
            terminal: vec![0.0],
            transition: vec![vec![vec![1.0]]],
            initial: vec![1.0],
            positions: None,
        })
        .unwrap();
        let support = compute_reward_support(&model).unwrap();
        let h = Objective::Custom(crate::objective::CustomObjective {
            name: "rough".into(),
            eval: std::sync::Arc::new(|_, _| 0.0),
            regularity: Default::default(),
            sense: crate::objective::Sense::Maximize,
        });
        assert!(matches!(
            lifted_value_iteration(&model, &support, &h, &SearchConfig::default()),
            Err(Error::Regularity(_))
        ));
    }
}

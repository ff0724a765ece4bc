//! The lifted deterministic control system.
//!
//! States are joint distributions `F(x, s)` over `E x S_n`, actions are
//! kernels `pi(a | x, s)`, and the dynamics are
//!
//! ```text
//! T^pi(F)(x', s') = sum_{(x, s, a) : r_n(x, a) = s' - s} q(x' | x, a) pi(a | x, s) F(x, s)
//! ```

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{MdpModel, PROBABILITY_TOLERANCE};
use crate::oracle::{check_cap, walk_paths, DEFAULT_PATH_CAP};
use crate::policy::{History, HistoryPolicy};
use crate::support::RewardSupport;
use crate::value::RewardValue;

/// Dense table `F(x, s)` over `E x S_n`, laid out state-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointDistribution {
    stage: usize,
    n_states: usize,
    width: usize,
    mass: Vec<f64>,
}

impl JointDistribution {
    /// `F_0 = nu (x) delta_0`.
    pub fn initial(model: &MdpModel) -> Self {
        JointDistribution {
            stage: 0,
            n_states: model.n_states(),
            width: 1,
            mass: model.initial().to_vec(),
        }
    }

    pub fn from_mass(stage: usize, n_states: usize, width: usize, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != n_states * width {
            return Err(Error::Shape(format!(
                "distribution has {} cells, expected {} x {}",
                mass.len(),
                n_states,
                width
            )));
        }
        Ok(JointDistribution {
            stage,
            n_states,
            width,
            mass,
        })
    }

    pub(crate) fn zeros(stage: usize, n_states: usize, width: usize) -> Self {
        JointDistribution {
            stage,
            n_states,
            width,
            mass: vec![0.0; n_states * width],
        }
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// `|S_n|`
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, x: usize, s: usize) -> f64 {
        self.mass[x * self.width + s]
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// `F(x, S)`
    pub fn state_marginal(&self) -> Vec<f64> {
        self.mass.chunks(self.width).map(|row| row.iter().sum()).collect()
    }

    /// `F(E, s)`
    pub fn reward_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        for row in self.mass.chunks(self.width) {
            for (o, m) in out.iter_mut().zip(row) {
                *o += m;
            }
        }
        out
    }

    /// `alpha F + (1 - alpha) G`
    pub fn mix(&self, other: &JointDistribution, alpha: f64) -> Result<JointDistribution> {
        self.check_same_shape(other)?;
        let mass = self
            .mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
            .collect();
        JointDistribution::from_mass(self.stage, self.n_states, self.width, mass)
    }

    pub fn max_abs_diff(&self, other: &JointDistribution) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .mass
            .iter()
            .zip(&other.mass)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
    }

    fn check_same_shape(&self, other: &JointDistribution) -> Result<()> {
        if self.stage != other.stage || self.width != other.width || self.n_states != other.n_states {
            return Err(Error::Shape(format!(
                "stage {} ({}x{}) vs stage {} ({}x{})",
                self.stage, self.n_states, self.width, other.stage, other.n_states, other.width
            )));
        }
        Ok(())
    }

    /// Nonnegative with total mass one (within `1e-12`).
    pub fn is_probability(&self) -> bool {
        self.mass.iter().all(|m| *m >= 0.0) && (self.total() - 1.0).abs() <= PROBABILITY_TOLERANCE
    }

    pub(crate) fn check_support(&self, support: &RewardSupport) -> Result<()> {
        if self.stage > support.horizon() || support.len(self.stage) != self.width {
            return Err(Error::Shape(format!(
                "distribution at stage {} has width {}, support has {}",
                self.stage,
                self.width,
                support.len(self.stage.min(support.horizon()))
            )));
        }
        Ok(())
    }
}

/// Randomized kernel `pi(a | x, s)` over `E x S_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelAction {
    stage: usize,
    n_states: usize,
    width: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl KernelAction {
    pub fn uniform(stage: usize, n_states: usize, width: usize, n_actions: usize) -> Self {
        KernelAction {
            stage,
            n_states,
            width,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * width * n_actions],
        }
    }

    /// Point-mass rows; `choices[x * width + s]` is the action taken there.
    pub fn deterministic(stage: usize, n_states: usize, width: usize, n_actions: usize, choices: &[usize]) -> Self {
        assert_eq!(choices.len(), n_states * width);
        let mut probs = vec![0.0; n_states * width * n_actions];
        for (cell, &a) in choices.iter().enumerate() {
            probs[cell * n_actions + a] = 1.0;
        }
        KernelAction {
            stage,
            n_states,
            width,
            n_actions,
            probs,
        }
    }

    /// Builds a kernel from a row function and validates every row.
    pub fn from_rows(
        stage: usize,
        n_states: usize,
        width: usize,
        n_actions: usize,
        mut row: impl FnMut(usize, usize) -> Vec<f64>,
    ) -> Result<Self> {
        let mut probs = Vec::with_capacity(n_states * width * n_actions);
        for x in 0..n_states {
            for s in 0..width {
                let r = row(x, s);
                crate::policy::check_action_distribution(&r, n_actions)?;
                probs.extend(r);
            }
        }
        Ok(KernelAction {
            stage,
            n_states,
            width,
            n_actions,
            probs,
        })
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn row(&self, x: usize, s: usize) -> &[f64] {
        let start = (x * self.width + s) * self.n_actions;
        &self.probs[start..start + self.n_actions]
    }

    pub(crate) fn set_row(&mut self, x: usize, s: usize, row: &[f64]) {
        let start = (x * self.width + s) * self.n_actions;
        self.probs[start..start + self.n_actions].copy_from_slice(row);
    }

    /// Action of a point-mass row, if it is one.
    pub fn deterministic_action(&self, x: usize, s: usize) -> Option<usize> {
        let row = self.row(x, s);
        let a = row.iter().position(|p| *p == 1.0)?;
        row.iter().enumerate().all(|(b, p)| b == a || *p == 0.0).then_some(a)
    }

    pub fn is_deterministic(&self) -> bool {
        (0..self.n_states).all(|x| (0..self.width).all(|s| self.deterministic_action(x, s).is_some()))
    }

    pub fn max_abs_diff(&self, other: &KernelAction) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// `(pi_0, ..., pi_{N-1})`
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftedActionSequence {
    pub kernels: Vec<KernelAction>,
}

impl LiftedActionSequence {
    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    /// `F_0, T^{pi_0}(F_0), ..., F_N`
    pub fn trajectory(&self, model: &MdpModel, support: &RewardSupport) -> Result<Vec<JointDistribution>> {
        let mut out = Vec::with_capacity(self.kernels.len() + 1);
        out.push(JointDistribution::initial(model));
        for (n, pi) in self.kernels.iter().enumerate() {
            let next = apply_transition(&out[n], pi, model, support)?;
            out.push(next);
        }
        Ok(out)
    }
}

/// One step of the lifted dynamics from stage `n` to `n + 1`.
pub fn apply_transition(
    f: &JointDistribution,
    pi: &KernelAction,
    model: &MdpModel,
    support: &RewardSupport,
) -> Result<JointDistribution> {
    let n = f.stage;
    if n >= model.horizon() {
        return Err(Error::StageOutOfRange {
            stage: n + 1,
            horizon: model.horizon(),
        });
    }
    f.check_support(support)?;
    if pi.stage != n || pi.width != f.width || pi.n_states != f.n_states || pi.n_actions != model.n_actions() {
        return Err(Error::Shape(format!(
            "kernel for stage {} ({} rewards) applied to distribution at stage {} ({} rewards)",
            pi.stage, pi.width, n, f.width
        )));
    }
    let mut out = JointDistribution::zeros(n + 1, f.n_states, support.len(n + 1));
    push_forward(f, pi, model, support, &mut out);
    Ok(out)
}

/// Adds `T^pi(f)` into `out` without shape checks.
pub(crate) fn push_forward(
    f: &JointDistribution,
    pi: &KernelAction,
    model: &MdpModel,
    support: &RewardSupport,
    out: &mut JointDistribution,
) {
    let n = f.stage;
    let next_width = out.width;
    for x in 0..f.n_states {
        for s in 0..f.width {
            let m = f.get(x, s);
            if m == 0.0 {
                continue;
            }
            for (a, &p) in pi.row(x, s).iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let w = m * p;
                let s_next = support.successor(n, s, x, a);
                for (x_next, &q) in model.transition_row(x, a).iter().enumerate() {
                    if q != 0.0 {
                        out.mass[x_next * next_width + s_next] += q * w;
                    }
                }
            }
        }
    }
}

/// Marginal dynamics on `P(E)`: `T^pi(F)(x') = sum_x sum_a q(x'|x,a) pi(a|x) F(x)`,
/// using the stage-0 transition (transitions are stage independent).
pub fn apply_marginal_transition(f: &[f64], pi: &[Vec<f64>], model: &MdpModel) -> Result<Vec<f64>> {
    let ns = model.n_states();
    if f.len() != ns || pi.len() != ns || pi.iter().any(|r| r.len() != model.n_actions()) {
        return Err(Error::Shape("marginal transition inputs do not match the model".into()));
    }
    let mut out = vec![0.0; ns];
    for (x, &m) in f.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        for (a, &p) in pi[x].iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (o, q) in out.iter_mut().zip(model.transition_row(x, a)) {
                *o += q * p * m;
            }
        }
    }
    Ok(out)
}

/// `pi~(a|x) = sum_s pi(a|x,s) F(x,s) / sum_s F(x,s)`; uniform where `F(x, S) = 0`.
pub fn collapse_kernel(f: &JointDistribution, pi: &KernelAction) -> Vec<Vec<f64>> {
    (0..f.n_states)
        .map(|x| {
            let total: f64 = (0..f.width).map(|s| f.get(x, s)).sum();
            if total == 0.0 {
                return vec![1.0 / pi.n_actions as f64; pi.n_actions];
            }
            let mut row = vec![0.0; pi.n_actions];
            for s in 0..f.width {
                let m = f.get(x, s);
                for (r, p) in row.iter_mut().zip(pi.row(x, s)) {
                    *r += p * m;
                }
            }
            row.iter_mut().for_each(|r| *r /= total);
            row
        })
        .collect()
}

/// Kernels `pi_n(a|x,s) = P(A_n = a | X_n = x, R_{n-1} = s)` whose lifted
/// trajectory reproduces the joint laws of `policy` at every stage.
///
/// Rows on null events are uniform.
pub fn policy_lift(
    model: &MdpModel,
    support: &RewardSupport,
    policy: &dyn HistoryPolicy,
) -> Result<LiftedActionSequence> {
    policy_lift_capped(model, support, policy, DEFAULT_PATH_CAP)
}

pub fn policy_lift_capped(
    model: &MdpModel,
    support: &RewardSupport,
    policy: &dyn HistoryPolicy,
    cap: u64,
) -> Result<LiftedActionSequence> {
    let horizon = model.horizon();
    check_cap(model, horizon, cap)?;
    let (ns, na) = (model.n_states(), model.n_actions());
    // joint[n][(x * |S_n| + s) * A + a] = P(X_n = x, R_{n-1} = s, A_n = a)
    let mut joint: Vec<Vec<f64>> = (0..horizon).map(|n| vec![0.0; ns * support.len(n) * na]).collect();
    let mut missing = None;
    walk_paths(model, policy, horizon, &mut |node| {
        let Some(sigma) = node.decision else { return };
        let n = node.history.stage();
        let Some(s) = support.stage(n).index_of(node.reward) else {
            missing = Some(n);
            return;
        };
        let cell = node.history.current_state() * support.len(n) + s;
        for (a, p) in sigma.iter().enumerate() {
            joint[n][cell * na + a] += node.probability * p;
        }
    })?;
    if let Some(stage) = missing {
        return Err(Error::RewardNotInSupport { stage });
    }
    let kernels = joint
        .into_iter()
        .enumerate()
        .map(|(n, table)| {
            let width = support.len(n);
            let mut probs = Vec::with_capacity(table.len());
            for row in table.chunks(na) {
                let total: f64 = row.iter().sum();
                if total > 0.0 {
                    probs.extend(row.iter().map(|p| p / total));
                } else {
                    probs.extend(std::iter::repeat_n(1.0 / na as f64, na));
                }
            }
            KernelAction {
                stage: n,
                n_states: ns,
                width,
                n_actions: na,
                probs,
            }
        })
        .collect();
    Ok(LiftedActionSequence { kernels })
}

/// `sigma_n(a | h_n) = pi_n(a | x_n, sum_{k<n} r_k(x_k, a_k))`.
#[derive(Debug, Clone)]
pub struct ProjectedPolicy<'m> {
    model: &'m MdpModel,
    support: &'m RewardSupport,
    sequence: LiftedActionSequence,
}

impl<'m> ProjectedPolicy<'m> {
    pub fn sequence(&self) -> &LiftedActionSequence {
        &self.sequence
    }
}

pub fn policy_project<'m>(
    sequence: &LiftedActionSequence,
    model: &'m MdpModel,
    support: &'m RewardSupport,
) -> Result<ProjectedPolicy<'m>> {
    if sequence.len() != model.horizon() {
        return Err(Error::Shape(format!(
            "action sequence has {} kernels, horizon is {}",
            sequence.len(),
            model.horizon()
        )));
    }
    for (n, pi) in sequence.kernels.iter().enumerate() {
        if pi.stage != n || pi.width != support.len(n) {
            return Err(Error::Shape(format!("kernel {n} is not indexed by S_{n}")));
        }
    }
    Ok(ProjectedPolicy {
        model,
        support,
        sequence: sequence.clone(),
    })
}

impl HistoryPolicy for ProjectedPolicy<'_> {
    fn distribution(&self, history: &History) -> Result<Vec<f64>> {
        let n = history.stage();
        let pi = self
            .sequence
            .kernels
            .get(n)
            .ok_or_else(|| Error::StageOutOfRange {
                stage: n,
                horizon: self.model.horizon(),
            })?;
        let mut acc = RewardValue::zero(self.model.arithmetic());
        for k in 0..n {
            acc = acc.add(self.model.canonical_reward(k, history.states[k], history.actions[k]));
        }
        let s = self
            .support
            .stage(n)
            .index_of(&acc)
            .ok_or(Error::RewardNotInSupport { stage: n })?;
        Ok(pi.row(history.current_state(), s).to_vec())
    }
}

/// CSV rows `stage,x,s,mass` for a trajectory (zero cells omitted).
pub fn trajectory_csv(trajectory: &[JointDistribution], support: &RewardSupport) -> String {
    let mut out = String::from("stage,x,s,mass\n");
    for f in trajectory {
        let values = support.stage(f.stage).floats();
        for x in 0..f.n_states {
            for (s, v) in values.iter().enumerate() {
                let m = f.get(x, s);
                if m != 0.0 {
                    let _ = writeln!(out, "{},{},{},{}", f.stage, x, v, m);
                }
            }
        }
    }
    out
}

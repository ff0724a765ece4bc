//! Steering a histogram on `{1, ..., K}` toward a target with a controlled
//! nearest-neighbour random walk.
//!
//! States are stored 0-based: index `x` is grid point `x + 1`. Stage `n`
//! (0-based) charges `c_n` per unit of mass moved one step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::lp_transport_oracle;
use crate::solver::ContinuousActionModel;
use crate::wasserstein::wasserstein_1d;

/// Differences below this are treated as zero by the greedy step.
pub const SNAP: f64 = 1e-14;

const DISTRIBUTION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportInstance {
    pub k: usize,
    pub horizon: usize,
    /// `c_0 <= c_1 <= ... <= c_{N-1}`, each in `(0, 1]`.
    pub costs: Vec<f64>,
    pub target: Vec<f64>,
    pub initial: Vec<f64>,
}

fn check_distribution(what: &str, p: &[f64], k: usize) -> Result<()> {
    if p.len() != k {
        return Err(Error::Shape(format!("{what} has {} entries, K = {k}", p.len())));
    }
    if let Some((x, v)) = p.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("{what}: entry {} is {v}", x + 1)));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > DISTRIBUTION_TOLERANCE {
        return Err(Error::InvalidParameter(format!("{what}: row sum {total}")));
    }
    Ok(())
}

impl TransportInstance {
    pub fn new(k: usize, horizon: usize, costs: Vec<f64>, target: Vec<f64>, initial: Vec<f64>) -> Result<Self> {
        let inst = TransportInstance {
            k,
            horizon,
            costs,
            target,
            initial,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Same cost `c` at every stage.
    pub fn uniform_cost(k: usize, horizon: usize, cost: f64, target: Vec<f64>, initial: Vec<f64>) -> Result<Self> {
        Self::new(k, horizon, vec![cost; horizon], target, initial)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidParameter(format!("grid size K = {} must be at least 2", self.k)));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        if self.costs.len() != self.horizon {
            return Err(Error::Shape(format!(
                "{} stage costs for horizon {}",
                self.costs.len(),
                self.horizon
            )));
        }
        if let Some(c) = self.costs.iter().find(|c| !(**c > 0.0 && **c <= 1.0)) {
            return Err(Error::InvalidParameter(format!("stage cost {c} outside (0, 1]")));
        }
        if self.costs.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("stage costs must be nondecreasing".into()));
        }
        check_distribution("target", &self.target, self.k)?;
        check_distribution("initial", &self.initial, self.k)
    }
}

/// Masses moved up (`x -> x+1`) and down (`x -> x-1`) at one stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassMovePlan {
    pub up: Vec<f64>,
    pub down: Vec<f64>,
}

impl MassMovePlan {
    pub fn zeros(k: usize) -> Self {
        MassMovePlan {
            up: vec![0.0; k],
            down: vec![0.0; k],
        }
    }

    pub fn moved(&self, x: usize) -> f64 {
        self.up[x] + self.down[x]
    }

    pub fn total_moved(&self) -> f64 {
        self.up.iter().chain(&self.down).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.up.iter().chain(&self.down).all(|m| *m == 0.0)
    }

    /// Kernel probabilities `(a^1, a^2) = (up, down) / F(x)`, or `(0, 0)` where
    /// `F(x) = 0`.
    pub fn kernel(&self, f: &[f64]) -> Vec<[f64; 2]> {
        f.iter()
            .enumerate()
            .map(|(x, &m)| {
                if m > 0.0 {
                    [(self.up[x] / m).min(1.0), (self.down[x] / m).min(1.0)]
                } else {
                    [0.0, 0.0]
                }
            })
            .collect()
    }

    /// `F'(x) = F(x) - up(x) - down(x) + up(x-1) + down(x+1)`
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let k = f.len();
        (0..k)
            .map(|x| {
                let mut v = f[x] - self.up[x] - self.down[x];
                if x > 0 {
                    v += self.up[x - 1];
                }
                if x + 1 < k {
                    v += self.down[x + 1];
                }
                if v.abs() <= SNAP {
                    0.0
                } else {
                    v
                }
            })
            .collect()
    }
}

/// `Delta F^l(x) = sum_{j<x} F(j) - sum_{j<x} G(j)` (0-based `x`).
pub fn delta_lower(f: &[f64], g: &[f64], x: usize) -> f64 {
    f[..x].iter().sum::<f64>() - g[..x].iter().sum::<f64>()
}

/// `Delta F^u(x) = sum_{j>x} F(j) - sum_{j>x} G(j)` (0-based `x`).
pub fn delta_upper(f: &[f64], g: &[f64], x: usize) -> f64 {
    f[x + 1..].iter().sum::<f64>() - g[x + 1..].iter().sum::<f64>()
}

fn snap(v: f64) -> f64 {
    if v.abs() <= SNAP {
        0.0
    } else {
        v
    }
}

/// One greedy step: mass at `x` moves toward the side where mass is missing.
///
/// | `Delta^l` | `Delta^u` | move                                   |
/// |-----------|-----------|----------------------------------------|
/// | `>= 0`    | `>= 0`    | none                                   |
/// | `>= 0`    | `< 0`     | up `min(F(x), -Delta^u)`               |
/// | `< 0`     | `>= 0`    | down `min(F(x), -Delta^l)`             |
/// | `< 0`     | `< 0`     | up `-Delta^u`, down `-Delta^l`         |
pub fn algorithm1_step(f: &[f64], g: &[f64]) -> Result<(MassMovePlan, Vec<f64>)> {
    if f.len() != g.len() {
        return Err(Error::Shape(format!("histograms of length {} and {}", f.len(), g.len())));
    }
    let k = f.len();
    let mut plan = MassMovePlan::zeros(k);
    // running sums of F - G below and above x
    let diff: Vec<f64> = f.iter().zip(g).map(|(a, b)| a - b).collect();
    let mut below = 0.0;
    let total: f64 = diff.iter().sum();
    for x in 0..k {
        let lower = snap(below);
        let upper = snap(total - below - diff[x]);
        below += diff[x];
        let m = f[x];
        if m <= 0.0 {
            continue;
        }
        let take = |want: f64| if want >= m - SNAP { m } else { want };
        match (lower >= 0.0, upper >= 0.0) {
            (true, true) => {}
            (true, false) => plan.up[x] = take(-upper),
            (false, true) => plan.down[x] = take(-lower),
            (false, false) => {
                plan.up[x] = -upper;
                plan.down[x] = -lower;
                if plan.up[x] + plan.down[x] >= m - SNAP {
                    let scale = m / (plan.up[x] + plan.down[x]);
                    plan.up[x] *= scale;
                    plan.down[x] = m - plan.up[x];
                }
            }
        }
        if x == 0 {
            debug_assert_eq!(plan.down[x], 0.0);
        }
        if x + 1 == k {
            debug_assert_eq!(plan.up[x], 0.0);
        }
        if plan.moved(x) > m + DISTRIBUTION_TOLERANCE {
            return Err(Error::Infeasible(format!(
                "moving {} out of state {} which holds {m}",
                plan.moved(x),
                x + 1
            )));
        }
    }
    let next = plan.apply(f);
    Ok((plan, next))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Algorithm1Trace {
    /// `F_0, ..., F_N`
    pub distributions: Vec<Vec<f64>>,
    pub plans: Vec<MassMovePlan>,
    /// `m_n = sum_x up(x) + down(x)`
    pub moved: Vec<f64>,
    /// `c_n m_n`
    pub stage_costs: Vec<f64>,
    /// `W_1(F_n, G)` for `n = 0..=N`
    pub distances: Vec<f64>,
    pub total_cost: f64,
    pub terminal_distance: f64,
    /// `total_cost + terminal_distance`
    pub objective: f64,
}

pub fn run_algorithm1(instance: &TransportInstance) -> Result<Algorithm1Trace> {
    instance.validate()?;
    let g = &instance.target;
    let mut distributions = vec![instance.initial.clone()];
    let mut plans = Vec::with_capacity(instance.horizon);
    let mut distances = vec![wasserstein_1d(&instance.initial, g)?];
    for _ in 0..instance.horizon {
        let (plan, next) = algorithm1_step(distributions.last().expect("F_0 present"), g)?;
        distances.push(wasserstein_1d(&next, g)?);
        plans.push(plan);
        distributions.push(next);
    }
    let moved: Vec<f64> = plans.iter().map(MassMovePlan::total_moved).collect();
    let stage_costs: Vec<f64> = moved.iter().zip(&instance.costs).map(|(m, c)| m * c).collect();
    let total_cost = stage_costs.iter().sum();
    let terminal_distance = *distances.last().expect("F_N present");
    Ok(Algorithm1Trace {
        distributions,
        plans,
        moved,
        stage_costs,
        distances,
        total_cost,
        terminal_distance,
        objective: total_cost + terminal_distance,
    })
}

/// CSV rows `stage,state,mass,up_move,down_move,stage_cost,w1_to_target`,
/// one per grid point and stage (states 1-based; stage `N` has no moves).
pub fn trace_csv(trace: &Algorithm1Trace) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("stage,state,mass,up_move,down_move,stage_cost,w1_to_target\n");
    for (n, f) in trace.distributions.iter().enumerate() {
        let plan = trace.plans.get(n);
        let cost = trace.stage_costs.get(n).copied().unwrap_or(0.0);
        for (x, m) in f.iter().enumerate() {
            let (up, down) = plan.map_or((0.0, 0.0), |p| (p.up[x], p.down[x]));
            writeln!(out, "{n},{},{m},{up},{down},{cost},{}", x + 1, trace.distances[n]).expect("write to string");
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinkViolation {
    /// 1-based grid point.
    pub state: usize,
    pub retained_at: usize,
    pub outflow_at: usize,
    pub outflow: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructuralReport {
    pub sink_violations: Vec<SinkViolation>,
    pub feasibility_violations: Vec<(usize, usize)>,
    /// `(sum_n m_n, LP value)` when the run reaches the target.
    pub transport_identity: Option<(f64, f64)>,
    /// Stages and states where both deficits were negative but the state did
    /// not end at `G(x)`; informational.
    pub both_sided_mismatches: Vec<(usize, usize)>,
}

impl StructuralReport {
    pub fn passed(&self) -> bool {
        self.sink_violations.is_empty()
            && self.feasibility_violations.is_empty()
            && self
                .transport_identity
                .is_none_or(|(work, lp)| (work - lp).abs() <= 1e-9)
    }
}

/// Checks the sink property (a state that keeps part of its mass at some stage
/// never sends mass out again), per-step feasibility, and, once the horizon
/// is at least `K - 1`, that the total moved mass equals the LP optimum.
pub fn structural_check(instance: &TransportInstance, trace: &Algorithm1Trace) -> Result<StructuralReport> {
    let k = instance.k;
    let mut sink_violations = Vec::new();
    let mut feasibility_violations = Vec::new();
    let mut both_sided_mismatches = Vec::new();
    let mut retained: Vec<Option<usize>> = vec![None; k];
    for (n, plan) in trace.plans.iter().enumerate() {
        let f = &trace.distributions[n];
        for x in 0..k {
            let moved = plan.moved(x);
            if moved > f[x] + DISTRIBUTION_TOLERANCE {
                feasibility_violations.push((n, x + 1));
            }
            if let Some(r) = retained[x] {
                if moved != 0.0 {
                    sink_violations.push(SinkViolation {
                        state: x + 1,
                        retained_at: r,
                        outflow_at: n,
                        outflow: moved,
                    });
                }
            }
            if f[x] > 0.0 && moved < f[x] && retained[x].is_none() {
                retained[x] = Some(n);
            }
            if plan.up[x] > 0.0 && plan.down[x] > 0.0
                && (trace.distributions[n + 1][x] - instance.target[x]).abs() > 1e-12
            {
                both_sided_mismatches.push((n, x + 1));
            }
        }
    }
    let transport_identity = if instance.horizon + 1 >= k {
        let lp = lp_transport_oracle(&instance.initial, &instance.target)?;
        Some((trace.moved.iter().sum(), lp.value))
    } else {
        None
    };
    Ok(StructuralReport {
        sink_violations,
        feasibility_violations,
        transport_identity,
        both_sided_mismatches,
    })
}

/// `G(j) ~ exp(-(j - K/2)^2 / (2 sigma^2))` on `j = 1..K`, normalized.
pub fn rescaled_normal_target(k: usize, sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma = {sigma} must be positive")));
    }
    let centre = k as f64 / 2.0;
    normalize((1..=k).map(|j| (-((j as f64 - centre) / sigma).powi(2) / 2.0).exp()).collect())
}

/// `G(j) ~ lambda exp(-lambda (j - K/2))` for `j > K/2`, zero below, normalized.
pub fn shifted_exponential_target(k: usize, lambda: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} must be positive")));
    }
    let shift = k as f64 / 2.0;
    normalize(
        (1..=k)
            .map(|j| {
                let x = j as f64;
                if x > shift {
                    lambda * (-lambda * (x - shift)).exp()
                } else {
                    0.0
                }
            })
            .collect(),
    )
}

fn normalize(mut w: Vec<f64>) -> Result<Vec<f64>> {
    let total: f64 = w.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::InvalidParameter("target has no mass on the grid".into()));
    }
    for v in &mut w {
        *v /= total;
    }
    Ok(w)
}

/// Raw draws behind [`sample_initial`]: `K` independent uniforms on
/// `{0, ..., 10}` from ChaCha8 seeded with `seed`, redrawn while all are zero.
pub fn sample_initial_counts(k: usize, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let draws: Vec<u32> = (0..k).map(|_| rng.gen_range(0..=10)).collect();
        if draws.iter().any(|&d| d > 0) {
            return draws;
        }
    }
}

pub fn sample_initial(k: usize, seed: u64) -> Vec<f64> {
    let draws = sample_initial_counts(k, seed);
    let total: u32 = draws.iter().sum();
    draws.iter().map(|&d| d as f64 / total as f64).collect()
}

/// The walk as a model with actions `(a^1, a^2)` in `[0, 1]^2`, `a^1 + a^2 <= 1`:
/// up with probability `a^1`, down with `a^2`. The bottom state cannot move
/// down and the top state cannot move up, so those coordinates must be zero.
#[derive(Debug, Clone)]
pub struct RandomWalkModel {
    instance: TransportInstance,
}

pub fn make_random_walk_model(instance: &TransportInstance) -> Result<RandomWalkModel> {
    instance.validate()?;
    Ok(RandomWalkModel {
        instance: instance.clone(),
    })
}

impl RandomWalkModel {
    pub fn instance(&self) -> &TransportInstance {
        &self.instance
    }
}

impl ContinuousActionModel for RandomWalkModel {
    fn n_states(&self) -> usize {
        self.instance.k
    }

    fn horizon(&self) -> usize {
        self.instance.horizon
    }

    fn action_box(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0), (0.0, 1.0)]
    }

    fn feasible(&self, x: usize, a: &[f64]) -> bool {
        let k = self.instance.k;
        a.len() == 2
            && a.iter().all(|v| (0.0..=1.0).contains(v))
            && a[0] + a[1] <= 1.0 + 1e-12
            && !(x == 0 && a[1] != 0.0)
            && !(x + 1 == k && a[0] != 0.0)
    }

    fn transition(&self, x: usize, a: &[f64]) -> Vec<f64> {
        let k = self.instance.k;
        let mut row = vec![0.0; k];
        let up = if x + 1 < k { a[0] } else { 0.0 };
        let down = if x > 0 { a[1] } else { 0.0 };
        row[x] = 1.0 - up - down;
        if up > 0.0 {
            row[x + 1] = up;
        }
        if down > 0.0 {
            row[x - 1] = down;
        }
        row
    }

    /// `-c_n (a^1 + a^2)`
    fn reward(&self, stage: usize, _x: usize, a: &[f64]) -> f64 {
        -self.instance.costs[stage] * (a[0] + a[1])
    }

    fn initial(&self) -> &[f64] {
        &self.instance.initial
    }
}

//! Random instances and independent reference computations shared by the
//! integration tests.
//!
//! Nothing here calls the solvers: values are computed on the tree of
//! histories with path sums recomputed from scratch, in exact rationals.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use lifted_mdp::policy::{point_mass, History};
use lifted_mdp::{MdpModel, ModelSpec, TabularPolicy};

pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.numer().to_f64().unwrap() / r.denom().to_f64().unwrap()
}

/// A model with every number kept as an exact ratio as well.
#[derive(Debug, Clone)]
pub struct ExactModel {
    pub spec: ModelSpec,
    /// `reward[n][x][a]`, one table per stage.
    pub reward: Vec<Vec<Vec<BigRational>>>,
    pub terminal: Vec<BigRational>,
    pub transition: Vec<Vec<Vec<BigRational>>>,
    pub initial: Vec<BigRational>,
}

impl ExactModel {
    pub fn model(&self) -> MdpModel {
        MdpModel::new(self.spec.clone()).expect("generated models are valid")
    }

    pub fn from_parts(
        reward: Vec<Vec<Vec<BigRational>>>,
        terminal: Vec<BigRational>,
        transition: Vec<Vec<Vec<BigRational>>>,
        initial: Vec<BigRational>,
    ) -> Self {
        let f1 = |v: &Vec<BigRational>| v.iter().map(to_f64).collect::<Vec<f64>>();
        let f2 = |m: &Vec<Vec<BigRational>>| m.iter().map(f1).collect::<Vec<_>>();
        let spec = ModelSpec {
            n_states: initial.len(),
            n_actions: transition[0].len(),
            horizon: reward.len(),
            reward: reward.iter().map(f2).collect(),
            terminal: f1(&terminal),
            transition: transition.iter().map(f2).collect(),
            initial: f1(&initial),
            positions: None,
        };
        ExactModel {
            spec,
            reward,
            terminal,
            transition,
            initial,
        }
    }
}

/// Probability vector with small integer weights (some zero) over `len` cells.
pub fn random_distribution<R: Rng>(rng: &mut R, len: usize) -> Vec<BigRational> {
    let mut w: Vec<i64> = (0..len).map(|_| if rng.gen_bool(0.3) { 0 } else { rng.gen_range(1..6) }).collect();
    if w.iter().all(|v| *v == 0) {
        w[rng.gen_range(0..len)] = 1;
    }
    let total: i64 = w.iter().sum();
    w.into_iter().map(|v| ratio(v, total)).collect()
}

/// Random model with rational rewards in quarters; stationary rewards when
/// `stationary` is set, otherwise one table per stage.
pub fn random_exact_model<R: Rng>(rng: &mut R, ns: usize, na: usize, horizon: usize, stationary: bool) -> ExactModel {
    let table = |rng: &mut R| -> Vec<Vec<BigRational>> {
        (0..ns)
            .map(|_| (0..na).map(|_| ratio(rng.gen_range(-8..=8), 4)).collect())
            .collect()
    };
    let reward = if stationary {
        let t = table(rng);
        vec![t; horizon]
    } else {
        (0..horizon).map(|_| table(rng)).collect()
    };
    let terminal = (0..ns).map(|_| ratio(rng.gen_range(-6..=6), 3)).collect();
    let transition = (0..ns)
        .map(|_| (0..na).map(|_| random_distribution(rng, ns)).collect())
        .collect();
    let initial = random_distribution(rng, ns);
    ExactModel::from_parts(reward, terminal, transition, initial)
}

pub fn random_model<R: Rng>(rng: &mut R, ns: usize, na: usize, horizon: usize) -> MdpModel {
    let stationary = rng.gen_bool(0.5);
    random_exact_model(rng, ns, na, horizon, stationary).model()
}

/// `max over deterministic history-dependent policies of E[w(X_N, R_{N-1})]`,
/// by backward maximization over the tree of histories. Decisions at distinct
/// histories are chosen independently, which is exactly the policy class.
pub fn expectimax(m: &ExactModel, w: &dyn Fn(usize, &BigRational) -> BigRational) -> BigRational {
    fn node(
        m: &ExactModel,
        w: &dyn Fn(usize, &BigRational) -> BigRational,
        x: usize,
        stage: usize,
        acc: &BigRational,
    ) -> BigRational {
        if stage == m.reward.len() {
            return w(x, acc);
        }
        let mut best: Option<BigRational> = None;
        for a in 0..m.transition[x].len() {
            let acc_next = acc + &m.reward[stage][x][a];
            let mut v = BigRational::zero();
            for (y, q) in m.transition[x][a].iter().enumerate() {
                if !q.is_zero() {
                    v += q * node(m, w, y, stage + 1, &acc_next);
                }
            }
            if best.as_ref().is_none_or(|b| v > *b) {
                best = Some(v);
            }
        }
        best.expect("at least one action")
    }
    let mut total = BigRational::zero();
    for (x, p) in m.initial.iter().enumerate() {
        if !p.is_zero() {
            total += p * node(m, w, x, 0, &BigRational::zero());
        }
    }
    total
}

/// `max over Markov deterministic policies of E[sum r + g]` in exact arithmetic.
pub fn exact_classical(m: &ExactModel) -> BigRational {
    let ns = m.initial.len();
    let mut v = m.terminal.clone();
    for n in (0..m.reward.len()).rev() {
        v = (0..ns)
            .map(|x| {
                (0..m.transition[x].len())
                    .map(|a| {
                        let mut t = m.reward[n][x][a].clone();
                        for (y, q) in m.transition[x][a].iter().enumerate() {
                            t += q * &v[y];
                        }
                        t
                    })
                    .max()
                    .unwrap()
            })
            .collect();
    }
    m.initial.iter().zip(&v).map(|(p, v)| p * v).fold(BigRational::zero(), |a, b| a + b)
}

/// Every history `h_n` with `n < horizon`, shortest first.
pub fn histories(ns: usize, na: usize, horizon: usize) -> Vec<History> {
    let mut out = Vec::new();
    lifted_mdp::policy::for_each_history(ns, na, horizon, |h| out.push(h.clone()));
    out
}

/// All `|A|^{#histories}` deterministic history-dependent policies.
pub fn all_deterministic_policies(model: &MdpModel) -> impl Iterator<Item = TabularPolicy> {
    let hs = histories(model.n_states(), model.n_actions(), model.horizon());
    let na = model.n_actions();
    let total = (na as u64).pow(hs.len() as u32);
    (0..total).map(move |mut code| {
        let mut p = TabularPolicy::new();
        for h in &hs {
            p.insert(h.clone(), point_mass((code % na as u64) as usize, na));
            code /= na as u64;
        }
        p
    })
}

/// Samples `(X_n, R_{n-1})` along one path, with `R` as a float.
pub fn simulate<R: Rng>(
    model: &MdpModel,
    policy: &TabularPolicy,
    stage: usize,
    rng: &mut R,
) -> (usize, f64) {
    use lifted_mdp::HistoryPolicy;
    let pick = |rng: &mut R, p: &[f64]| -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, v) in p.iter().enumerate() {
            acc += v;
            if u < acc {
                return i;
            }
        }
        p.iter().rposition(|v| *v > 0.0).unwrap()
    };
    let x0 = pick(rng, model.initial());
    let mut h = History::start(x0);
    let mut reward = 0.0;
    for n in 0..stage {
        let x = h.current_state();
        let a = pick(rng, &policy.distribution(&h).unwrap());
        reward += model.reward(n, x, a);
        let y = pick(rng, model.transition_row(x, a));
        h.push(a, y);
    }
    (h.current_state(), reward)
}

/// `E[w(X_N, R_{N-1})]` of the deterministic policy `choose`, exactly.
pub fn evaluate_deterministic(
    m: &ExactModel,
    choose: &dyn Fn(&History) -> usize,
    w: &dyn Fn(usize, &BigRational) -> BigRational,
) -> BigRational {
    fn walk(
        m: &ExactModel,
        choose: &dyn Fn(&History) -> usize,
        w: &dyn Fn(usize, &BigRational) -> BigRational,
        h: &mut History,
        acc: &BigRational,
    ) -> BigRational {
        let x = h.current_state();
        if h.stage() == m.reward.len() {
            return w(x, acc);
        }
        let a = choose(h);
        let acc_next = acc + &m.reward[h.stage()][x][a];
        let mut v = BigRational::zero();
        for (y, q) in m.transition[x][a].iter().enumerate() {
            if !q.is_zero() {
                h.push(a, y);
                v += q * walk(m, choose, w, h, &acc_next);
                h.pop();
            }
        }
        v
    }
    let mut total = BigRational::zero();
    for (x, p) in m.initial.iter().enumerate() {
        if !p.is_zero() {
            total += p * walk(m, choose, w, &mut History::start(x), &BigRational::zero());
        }
    }
    total
}

/// Values of every deterministic history-dependent policy, one entry per
/// assignment of actions to the histories reached with positive probability.
/// Policies differing only on unreachable histories share a value, so the
/// maximum over this list is the maximum over all deterministic policies.
pub fn all_policy_values(m: &ExactModel, w: &dyn Fn(usize, &BigRational) -> BigRational) -> Vec<BigRational> {
    fn node(
        m: &ExactModel,
        w: &dyn Fn(usize, &BigRational) -> BigRational,
        x: usize,
        stage: usize,
        acc: &BigRational,
    ) -> Vec<BigRational> {
        if stage == m.reward.len() {
            return vec![w(x, acc)];
        }
        let mut out = Vec::new();
        for a in 0..m.transition[x].len() {
            let acc_next = acc + &m.reward[stage][x][a];
            let mut combos = vec![BigRational::zero()];
            for (y, q) in m.transition[x][a].iter().enumerate() {
                if q.is_zero() {
                    continue;
                }
                let child = node(m, w, y, stage + 1, &acc_next);
                combos = combos
                    .iter()
                    .flat_map(|c| child.iter().map(move |v| c + q * v))
                    .collect();
            }
            out.extend(combos);
        }
        out
    }
    let mut combos = vec![BigRational::zero()];
    for (x, p) in m.initial.iter().enumerate() {
        if p.is_zero() {
            continue;
        }
        let child = node(m, w, x, 0, &BigRational::zero());
        combos = combos
            .iter()
            .flat_map(|c| child.iter().map(move |v| c + p * v))
            .collect();
    }
    combos
}

/// Randomized history-dependent policy defined by hashing the history, so
/// it needs no table and stays cheap for long horizons.
#[derive(Debug, Clone, Copy)]
pub struct HashPolicy {
    pub seed: u64,
    pub n_actions: usize,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl lifted_mdp::HistoryPolicy for HashPolicy {
    fn distribution(&self, h: &History) -> lifted_mdp::Result<Vec<f64>> {
        let mut z = splitmix(self.seed);
        for x in &h.states {
            z = splitmix(z ^ (*x as u64 + 1));
        }
        for a in &h.actions {
            z = splitmix(z ^ ((*a as u64 + 1) << 32));
        }
        if z % 3 == 0 {
            return Ok(point_mass((z >> 8) as usize % self.n_actions, self.n_actions));
        }
        let w: Vec<f64> = (0..self.n_actions)
            .map(|a| (splitmix(z + a as u64) % 7) as f64 + 1.0)
            .collect();
        let total: f64 = w.iter().sum();
        Ok(w.into_iter().map(|v| v / total).collect())
    }
}

pub fn one() -> BigRational {
    BigRational::one()
}

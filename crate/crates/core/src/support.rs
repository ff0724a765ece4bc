//! Reachable accumulated-reward values per stage.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::model::MdpModel;
use crate::value::{Arithmetic, RewardValue};

/// Default cap on the size of any single `S_n`.
pub const DEFAULT_SUPPORT_CAP: usize = 200_000;

/// The sorted, deduplicated set `S_n` for one stage.
#[derive(Debug, Clone)]
pub struct StageSupport {
    values: Vec<RewardValue>,
    floats: Vec<f64>,
    index: HashMap<RewardValue, usize>,
}

impl StageSupport {
    fn new(values: Vec<RewardValue>) -> Self {
        let floats = values.iter().map(RewardValue::to_f64).collect();
        let index = values.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
        StageSupport { values, floats, index }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[RewardValue] {
        &self.values
    }

    /// Floating-point view of the values, same order.
    pub fn floats(&self) -> &[f64] {
        &self.floats
    }

    pub fn index_of(&self, value: &RewardValue) -> Option<usize> {
        self.index.get(value).copied()
    }
}

/// `S_0 = {0}` and `S_{n+1} = { s + r_n(x, a) }`, with the successor index of
/// every `(s, x, a)` precomputed so the lifted transition never compares values.
#[derive(Debug, Clone)]
pub struct RewardSupport {
    stages: Vec<StageSupport>,
    successor: Vec<Vec<usize>>,
    n_states: usize,
    n_actions: usize,
    arithmetic: Arithmetic,
}

impl RewardSupport {
    pub fn horizon(&self) -> usize {
        self.stages.len() - 1
    }

    pub fn stage(&self, n: usize) -> &StageSupport {
        &self.stages[n]
    }

    pub fn len(&self, n: usize) -> usize {
        self.stages[n].len()
    }

    pub fn arithmetic(&self) -> Arithmetic {
        self.arithmetic
    }

    /// Index in `S_{n+1}` of `S_n[s] + r_n(x, a)`.
    #[inline]
    pub fn successor(&self, n: usize, s: usize, x: usize, a: usize) -> usize {
        self.successor[n][(s * self.n_states + x) * self.n_actions + a]
    }

    /// Total number of `(x, s)` cells summed over stages `0..N`.
    pub fn total_cells(&self) -> usize {
        self.stages[..self.horizon()].iter().map(|s| s.len() * self.n_states).sum()
    }
}

pub fn compute_reward_support(model: &MdpModel) -> Result<RewardSupport> {
    compute_reward_support_capped(model, DEFAULT_SUPPORT_CAP)
}

pub fn compute_reward_support_capped(model: &MdpModel, cap: usize) -> Result<RewardSupport> {
    let (ns, na) = (model.n_states(), model.n_actions());
    let mode = model.arithmetic();
    let mut stages = vec![StageSupport::new(vec![RewardValue::zero(mode)])];
    let mut successor = Vec::with_capacity(model.horizon());
    for n in 0..model.horizon() {
        let current = &stages[n];
        let mut sums = Vec::with_capacity(current.len() * ns * na);
        for s in current.values() {
            for x in 0..ns {
                for a in 0..na {
                    sums.push(s.add(model.canonical_reward(n, x, a)));
                }
            }
        }
        let next: BTreeSet<RewardValue> = sums.iter().cloned().collect();
        if next.len() > cap {
            return Err(Error::SupportOverflow {
                stage: n + 1,
                size: next.len(),
                cap,
            });
        }
        let next = StageSupport::new(next.into_iter().collect());
        successor.push(sums.iter().map(|v| next.index_of(v).expect("value inserted above")).collect());
        stages.push(next);
    }
    Ok(RewardSupport {
        stages,
        successor,
        n_states: ns,
        n_actions: na,
        arithmetic: mode,
    })
}

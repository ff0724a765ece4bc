//! Finite MDP data model.

use serde::{Deserialize, Serialize};

use crate::error::ValidationError;
use crate::value::{detect_arithmetic, Arithmetic, RewardValue};

/// Tolerance for probability rows summing to one.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// Plain description of a finite-horizon MDP, before validation.
///
/// `reward` holds either one `|E| x |A|` table per stage (`horizon` tables)
/// or a single table used at every stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n_states: usize,
    pub n_actions: usize,
    pub horizon: usize,
    /// `reward[n][x][a]`
    pub reward: Vec<Vec<Vec<f64>>>,
    pub terminal: Vec<f64>,
    /// `transition[x][a][x']`
    pub transition: Vec<Vec<Vec<f64>>>,
    pub initial: Vec<f64>,
    /// Numeric embedding of the states; defaults to the state index.
    #[serde(default)]
    pub positions: Option<Vec<f64>>,
}

/// A validated finite MDP with stage-dependent rewards.
#[derive(Debug, Clone)]
pub struct MdpModel {
    n_states: usize,
    n_actions: usize,
    horizon: usize,
    reward: Vec<f64>,
    canonical: Vec<RewardValue>,
    arithmetic: Arithmetic,
    terminal: Vec<f64>,
    transition: Vec<f64>,
    initial: Vec<f64>,
    positions: Vec<f64>,
    max_abs_reward: f64,
}

/// Checks every [`MdpModel`] invariant, reporting the first violation.
pub fn validate_model(spec: &ModelSpec) -> Result<(), ValidationError> {
    let (ns, na) = (spec.n_states, spec.n_actions);
    if ns == 0 {
        return Err(ValidationError::Empty("state"));
    }
    if na == 0 {
        return Err(ValidationError::Empty("action"));
    }
    if spec.horizon == 0 {
        return Err(ValidationError::ZeroHorizon);
    }
    if spec.reward.len() != 1 && spec.reward.len() != spec.horizon {
        return Err(shape("reward stages", spec.horizon, spec.reward.len()));
    }
    for (n, table) in spec.reward.iter().enumerate() {
        if table.len() != ns {
            return Err(shape(&format!("reward[{n}]"), ns, table.len()));
        }
        for (x, row) in table.iter().enumerate() {
            if row.len() != na {
                return Err(shape(&format!("reward[{n}][{x}]"), na, row.len()));
            }
            for (a, &value) in row.iter().enumerate() {
                if !value.is_finite() {
                    return Err(ValidationError::NonFiniteReward { stage: n, state: x, action: a, value });
                }
            }
        }
    }
    if spec.terminal.len() != ns {
        return Err(shape("terminal", ns, spec.terminal.len()));
    }
    if let Some((state, &value)) = spec.terminal.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(ValidationError::NonFiniteTerminal { state, value });
    }
    if spec.transition.len() != ns {
        return Err(shape("transition", ns, spec.transition.len()));
    }
    for (x, rows) in spec.transition.iter().enumerate() {
        if rows.len() != na {
            return Err(shape(&format!("transition[{x}]"), na, rows.len()));
        }
        for (a, row) in rows.iter().enumerate() {
            if row.len() != ns {
                return Err(shape(&format!("transition[{x}][{a}]"), ns, row.len()));
            }
            if let Some((next, &value)) = row.iter().enumerate().find(|(_, p)| !(**p >= 0.0)) {
                return Err(ValidationError::NegativeProbability { state: x, action: a, next, value });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
                return Err(ValidationError::RowSum { state: x, action: a, sum });
            }
        }
    }
    if spec.initial.len() != ns {
        return Err(shape("initial", ns, spec.initial.len()));
    }
    if let Some((state, &value)) = spec.initial.iter().enumerate().find(|(_, p)| !(**p >= 0.0)) {
        return Err(ValidationError::NegativeInitial { state, value });
    }
    let sum: f64 = spec.initial.iter().sum();
    if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(ValidationError::InitialSum { sum });
    }
    if let Some(pos) = &spec.positions {
        if pos.len() != ns {
            return Err(shape("positions", ns, pos.len()));
        }
        if let Some((state, &value)) = pos.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(ValidationError::NonFinitePosition { state, value });
        }
    }
    Ok(())
}

fn shape(field: &str, expected: usize, actual: usize) -> ValidationError {
    ValidationError::Shape {
        field: field.to_string(),
        expected,
        actual,
    }
}

impl MdpModel {
    pub fn new(spec: ModelSpec) -> Result<Self, ValidationError> {
        validate_model(&spec)?;
        let (ns, na, horizon) = (spec.n_states, spec.n_actions, spec.horizon);
        let mut reward = Vec::with_capacity(horizon * ns * na);
        for n in 0..horizon {
            let table = if spec.reward.len() == 1 { &spec.reward[0] } else { &spec.reward[n] };
            for row in table {
                reward.extend_from_slice(row);
            }
        }
        let arithmetic = detect_arithmetic(&reward);
        let canonical = reward
            .iter()
            .map(|&v| RewardValue::from_f64(v, arithmetic).expect("mode detected from these values"))
            .collect();
        let max_abs_reward = reward.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let transition = spec.transition.iter().flatten().flatten().copied().collect();
        let positions = spec.positions.unwrap_or_else(|| (0..ns).map(|x| x as f64).collect());
        Ok(MdpModel {
            n_states: ns,
            n_actions: na,
            horizon,
            reward,
            canonical,
            arithmetic,
            terminal: spec.terminal,
            transition,
            initial: spec.initial,
            positions,
            max_abs_reward,
        })
    }

    /// Rebuilds the plain description (stage-dependent reward layout).
    pub fn to_spec(&self) -> ModelSpec {
        let (ns, na) = (self.n_states, self.n_actions);
        ModelSpec {
            n_states: ns,
            n_actions: na,
            horizon: self.horizon,
            reward: (0..self.horizon)
                .map(|n| (0..ns).map(|x| (0..na).map(|a| self.reward(n, x, a)).collect()).collect())
                .collect(),
            terminal: self.terminal.clone(),
            transition: (0..ns)
                .map(|x| (0..na).map(|a| self.transition_row(x, a).to_vec()).collect())
                .collect(),
            initial: self.initial.clone(),
            positions: Some(self.positions.clone()),
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    pub fn reward(&self, stage: usize, state: usize, action: usize) -> f64 {
        self.reward[(stage * self.n_states + state) * self.n_actions + action]
    }

    #[inline]
    pub fn canonical_reward(&self, stage: usize, state: usize, action: usize) -> &RewardValue {
        &self.canonical[(stage * self.n_states + state) * self.n_actions + action]
    }

    pub fn arithmetic(&self) -> Arithmetic {
        self.arithmetic
    }

    pub fn terminal(&self) -> &[f64] {
        &self.terminal
    }

    /// `q(.|x, a)`
    #[inline]
    pub fn transition_row(&self, state: usize, action: usize) -> &[f64] {
        let start = (state * self.n_actions + action) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// `M = max |r_n(x, a)|`
    pub fn max_abs_reward(&self) -> f64 {
        self.max_abs_reward
    }

    /// True when every stage uses the same reward table.
    pub fn is_stationary(&self) -> bool {
        let block = self.n_states * self.n_actions;
        self.reward.chunks(block).all(|c| c == &self.reward[..block])
    }

    /// Same model with a different initial distribution.
    pub fn with_initial(&self, initial: Vec<f64>) -> Result<Self, ValidationError> {
        let mut spec = self.to_spec();
        spec.initial = initial;
        MdpModel::new(spec)
    }
}

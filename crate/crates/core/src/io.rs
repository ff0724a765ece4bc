//! JSON input files for models, objectives and transport instances.
//!
//! Numbers may be JSON numbers or strings holding a decimal (`"0.25"`) or a
//! fraction (`"1/3"`).

use serde_json::Value;
use thiserror::Error;

use crate::error::{Error, ValidationError};
use crate::model::{MdpModel, ModelSpec};
use crate::objective::{MarginalFunctional, Objective, Weights};
use crate::sweep::TargetKind;
use crate::transport::{sample_initial, TransportInstance};

#[derive(Debug, Error)]
pub enum InputError {
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {detail}")]
    Field { path: String, detail: String },
    #[error("{0}")]
    Validation(#[from] ValidationError),
    #[error("{0}")]
    Invalid(#[from] Error),
}

type Result<T> = std::result::Result<T, InputError>;

fn field(path: &str, detail: impl Into<String>) -> InputError {
    InputError::Field {
        path: path.to_string(),
        detail: detail.into(),
    }
}

/// A number given as a JSON number, a decimal string or a fraction string.
pub fn parse_number(v: &Value, path: &str) -> Result<f64> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| field(path, "number out of range")),
        Value::String(s) => {
            let s = s.trim();
            let parsed = match s.split_once('/') {
                Some((p, q)) => match (p.trim().parse::<f64>(), q.trim().parse::<f64>()) {
                    (Ok(p), Ok(q)) if q != 0.0 => Ok(p / q),
                    _ => Err(()),
                },
                None => s.parse::<f64>().map_err(|_| ()),
            };
            parsed.map_err(|_| field(path, format!("cannot read {s:?} as a number")))
        }
        other => Err(field(path, format!("expected a number, found {other}"))),
    }
}

fn get<'a>(obj: &'a Value, key: &str, path: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| field(path, format!("missing key {key:?}")))
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| field(path, "expected an array"))
}

fn vector(v: &Value, path: &str) -> Result<Vec<f64>> {
    array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| parse_number(x, &format!("{path}[{i}]")))
        .collect()
}

fn matrix(v: &Value, path: &str) -> Result<Vec<Vec<f64>>> {
    array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, row)| vector(row, &format!("{path}[{i}]")))
        .collect()
}

fn tensor(v: &Value, path: &str) -> Result<Vec<Vec<Vec<f64>>>> {
    array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, m)| matrix(m, &format!("{path}[{i}]")))
        .collect()
}

fn count(v: &Value, path: &str) -> Result<usize> {
    match v {
        Value::Array(items) => Ok(items.len()),
        Value::Number(n) => n
            .as_u64()
            .map(|n| n as usize)
            .ok_or_else(|| field(path, "expected a nonnegative integer")),
        _ => Err(field(path, "expected a count or a list of labels")),
    }
}

fn depth(v: &Value) -> usize {
    match v {
        Value::Array(items) => 1 + items.first().map_or(0, depth),
        _ => 0,
    }
}

pub fn parse_model_value(doc: &Value) -> Result<ModelSpec> {
    let n_states = count(get(doc, "states", "model")?, "states")?;
    let n_actions = count(get(doc, "actions", "model")?, "actions")?;
    let horizon = get(doc, "horizon", "model")?
        .as_u64()
        .ok_or_else(|| field("horizon", "expected a positive integer"))? as usize;
    let reward_value = get(doc, "reward", "model")?;
    let reward = match depth(reward_value) {
        2 => vec![matrix(reward_value, "reward")?],
        3 => tensor(reward_value, "reward")?,
        _ => return Err(field("reward", "expected an |E| x |A| or N x |E| x |A| array")),
    };
    let terminal = match doc.get("terminal") {
        Some(v) => vector(v, "terminal")?,
        None => vec![0.0; n_states],
    };
    let positions = doc.get("positions").map(|v| vector(v, "positions")).transpose()?;
    Ok(ModelSpec {
        n_states,
        n_actions,
        horizon,
        reward,
        terminal,
        transition: tensor(get(doc, "transition", "model")?, "transition")?,
        initial: vector(get(doc, "initial", "model")?, "initial")?,
        positions,
    })
}

/// Parses and validates a model document.
pub fn parse_model(text: &str) -> Result<MdpModel> {
    let doc: Value = serde_json::from_str(text)?;
    Ok(MdpModel::new(parse_model_value(&doc)?)?)
}

/// `{"type": "linear_terminal" | "threshold" | "wasserstein" | "expected_plus_terminal" | "mean", ...}`
pub fn parse_objective(v: &Value) -> Result<Objective> {
    let kind = get(v, "type", "objective")?
        .as_str()
        .ok_or_else(|| field("objective.type", "expected a string"))?;
    match kind {
        "linear_terminal" => match v.get("weights") {
            None => Ok(Objective::classical()),
            Some(Value::String(s)) if s == "classical" => Ok(Objective::classical()),
            Some(w) => Ok(Objective::LinearTerminal(Weights::Affine {
                state: vector(get(w, "state", "objective.weights")?, "objective.weights.state")?,
                reward: match w.get("reward") {
                    Some(r) => parse_number(r, "objective.weights.reward")?,
                    None => 1.0,
                },
            })),
        },
        "threshold" => {
            let t = v
                .get("t")
                .or_else(|| v.get("threshold"))
                .ok_or_else(|| field("objective", "missing key \"t\""))?;
            Ok(Objective::ThresholdProbability {
                threshold: parse_number(t, "objective.t")?,
            })
        }
        "wasserstein" => Ok(Objective::WassersteinToTarget {
            target: vector(get(v, "target", "objective")?, "objective.target")?,
        }),
        "expected_plus_terminal" => {
            if let Some(t) = v.get("wasserstein_target") {
                Ok(Objective::ExpectedRewardPlusTerminal(MarginalFunctional::NegWasserstein(vector(
                    t,
                    "objective.wasserstein_target",
                )?)))
            } else {
                Ok(Objective::ExpectedRewardPlusTerminal(MarginalFunctional::Linear(vector(
                    get(v, "terminal", "objective")?,
                    "objective.terminal",
                )?)))
            }
        }
        "mean" => {
            let n = v.get("states").map(|s| count(s, "objective.states")).transpose()?;
            Ok(Objective::mean_reward(n.unwrap_or(0)))
        }
        other => Err(field("objective.type", format!("unknown objective {other:?}"))),
    }
}

/// Fills in state counts that an objective can only learn from the model.
pub fn fit_objective(objective: Objective, model: &MdpModel) -> Objective {
    match objective {
        Objective::LinearTerminal(Weights::Affine { state, reward }) if state.is_empty() => {
            Objective::LinearTerminal(Weights::Affine {
                state: vec![0.0; model.n_states()],
                reward,
            })
        }
        other => other,
    }
}

/// A model file together with its optional `objective` block.
pub fn parse_model_with_objective(text: &str) -> Result<(MdpModel, Option<Objective>)> {
    let doc: Value = serde_json::from_str(text)?;
    let model = MdpModel::new(parse_model_value(&doc)?)?;
    let objective = doc
        .get("objective")
        .map(parse_objective)
        .transpose()?
        .map(|o| fit_objective(o, &model));
    Ok((model, objective))
}

/// `{K, N, costs, target, initial}`; see the README for the accepted forms.
pub fn parse_instance(text: &str) -> Result<TransportInstance> {
    let doc: Value = serde_json::from_str(text)?;
    let k = get(&doc, "K", "instance")?
        .as_u64()
        .ok_or_else(|| field("K", "expected a positive integer"))? as usize;
    let horizon = get(&doc, "N", "instance")?
        .as_u64()
        .ok_or_else(|| field("N", "expected a positive integer"))? as usize;
    let costs = match doc.get("costs") {
        None => vec![1.0; horizon],
        Some(Value::String(s)) if s == "uniform" => vec![1.0; horizon],
        Some(v @ (Value::Number(_) | Value::String(_))) => vec![parse_number(v, "costs")?; horizon],
        Some(v) => vector(v, "costs")?,
    };
    let target = match get(&doc, "target", "instance")? {
        v @ Value::Array(_) => vector(v, "target")?,
        v => {
            let kind = get(v, "kind", "target")?
                .as_str()
                .ok_or_else(|| field("target.kind", "expected a string"))?;
            let kind = TargetKind::parse(kind)?;
            kind.target(k, parse_number(get(v, "parameter", "target")?, "target.parameter")?)?
        }
    };
    let initial = match get(&doc, "initial", "instance")? {
        v @ Value::Array(_) => vector(v, "initial")?,
        v => {
            let seed = get(v, "seed", "initial")?
                .as_u64()
                .ok_or_else(|| field("initial.seed", "expected an unsigned integer"))?;
            sample_initial(k, seed)
        }
    };
    Ok(TransportInstance::new(k, horizon, costs, target, initial)?)
}

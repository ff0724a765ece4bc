use thiserror::Error;

/// The first invariant a model (or distribution input) fails.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("model must have at least one {0}")]
    Empty(&'static str),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("{field}: expected length {expected}, got {actual}")]
    Shape {
        field: String,
        expected: usize,
        actual: usize,
    },
    #[error("transition row (x={state}, a={action}): negative probability {value} for x'={next}")]
    NegativeProbability {
        state: usize,
        action: usize,
        next: usize,
        value: f64,
    },
    #[error("transition row (x={state}, a={action}): row sum {sum}")]
    RowSum { state: usize, action: usize, sum: f64 },
    #[error("initial distribution: negative probability {value} at x={state}")]
    NegativeInitial { state: usize, value: f64 },
    #[error("initial distribution: row sum {sum}")]
    InitialSum { sum: f64 },
    #[error("reward (n={stage}, x={state}, a={action}): non-finite reward {value}")]
    NonFiniteReward {
        stage: usize,
        state: usize,
        action: usize,
        value: f64,
    },
    #[error("terminal reward at x={state}: non-finite value {value}")]
    NonFiniteTerminal { state: usize, value: f64 },
    #[error("state position at x={state}: non-finite value {value}")]
    NonFinitePosition { state: usize, value: f64 },
    #[error("{what}: {detail}")]
    Distribution { what: String, detail: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    Validation(#[from] ValidationError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("stage {stage} out of range 0..={horizon}")]
    StageOutOfRange { stage: usize, horizon: usize },
    #[error("reward support at stage {stage} has {size} values, cap is {cap}")]
    SupportOverflow { stage: usize, size: usize, cap: usize },
    #[error("path enumeration needs {paths} paths, cap is {cap}")]
    EnumerationCap { paths: f64, cap: u64 },
    #[error("search budget exceeded: {needed} > {budget}")]
    BudgetExceeded { needed: f64, budget: u64 },
    #[error("objective lacks the regularity needed here: {0}")]
    Regularity(String),
    #[error("history at stage {stage} has accumulated reward outside the support")]
    RewardNotInSupport { stage: usize },
    #[error("policy has no decision for history {0}")]
    MissingDecision(String),
    #[error("cannot rationalize masses: {0}")]
    Rationalization(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
}

impl Error {
    /// Budget-style refusals (instance too large for the requested exact mode).
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            Error::SupportOverflow { .. } | Error::EnumerationCap { .. } | Error::BudgetExceeded { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

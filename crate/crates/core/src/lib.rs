//! Finite-horizon MDPs with objectives on the joint law of the terminal state
//! and the accumulated reward, solved on the lifted (distribution-valued)
//! control problem.

pub mod error;
pub mod infinite;
pub mod io;
pub mod lifted;
pub mod lp;
pub mod model;
pub mod objective;
pub mod oracle;
pub mod policy;
pub mod solver;
pub mod support;
pub mod sweep;
pub mod transport;
pub mod value;
pub mod wasserstein;

pub use error::{Error, Result, ValidationError};
pub use lifted::{
    apply_marginal_transition, apply_transition, collapse_kernel, policy_lift, policy_project, JointDistribution,
    KernelAction, LiftedActionSequence,
};
pub use lp::lp_transport_oracle;
pub use model::{validate_model, MdpModel, ModelSpec};
pub use objective::{Objective, Regularity, Sense, Weights};
pub use oracle::exact_joint_distribution;
pub use policy::{History, HistoryPolicy, MarkovPolicy, TabularPolicy};
pub use solver::{
    classical_bellman, compact_grid_value_iteration, lifted_value_iteration, linear_terminal_dp, quantile_dp,
    SearchConfig, SolveReport, Strategy, ValueTables,
};
pub use support::{compute_reward_support, RewardSupport};
pub use wasserstein::wasserstein_1d;

//! Backward recursions and the lifted sequence search.

mod compact;
mod lifted_search;
mod linear;

pub use compact::{compact_grid_value_iteration, ActionGrid, CompactReport, ContinuousActionModel};
pub use lifted_search::{lifted_value_iteration, SearchConfig, SearchStats, SolveReport, Strategy};
pub use linear::{classical_bellman, linear_terminal_dp, quantile_dp, ValueTables, TIE_EPSILON};

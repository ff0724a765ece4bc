//! Parameter sweeps of the greedy transport over random initial histograms.
//!
//! Sample `i` uses seed `base_seed + i` for every parameter value, so all
//! parameters see the same initial histograms. Rows are computed in a worker
//! pool and sorted by `(parameter, N, sample_id)` before writing, which makes
//! the output independent of the worker count.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::transport::{
    rescaled_normal_target, run_algorithm1, sample_initial, shifted_exponential_target, structural_check,
    Algorithm1Trace, StructuralReport, TransportInstance,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TargetKind {
    Normal,
    Exponential,
}

impl TargetKind {
    pub fn name(self) -> &'static str {
        match self {
            TargetKind::Normal => "normal",
            TargetKind::Exponential => "exponential",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(TargetKind::Normal),
            "exponential" => Ok(TargetKind::Exponential),
            other => Err(Error::InvalidParameter(format!(
                "unknown target kind {other:?} (expected normal or exponential)"
            ))),
        }
    }

    pub fn target(self, k: usize, parameter: f64) -> Result<Vec<f64>> {
        match self {
            TargetKind::Normal => rescaled_normal_target(k, parameter),
            TargetKind::Exponential => shifted_exponential_target(k, parameter),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub k: usize,
    pub kind: TargetKind,
    pub parameters: Vec<f64>,
    pub samples: usize,
    /// Horizons `1..=max_horizon`.
    pub max_horizon: usize,
    /// Stage at which the boxplot view is taken.
    pub box_stage: usize,
    /// Cost `c_n` for stages `n = 0..max_horizon`.
    pub costs: Vec<f64>,
    pub base_seed: u64,
    pub workers: usize,
}

impl SweepConfig {
    /// `m = 100`, `N = 1..=K/2 + 5`, unit costs.
    pub fn standard(k: usize, kind: TargetKind, parameters: Vec<f64>, base_seed: u64) -> Self {
        let max_horizon = k / 2 + 5;
        SweepConfig {
            k,
            kind,
            parameters,
            samples: 100,
            max_horizon,
            box_stage: if k >= 100 { 30 } else { 15 },
            costs: vec![1.0; max_horizon],
            base_seed,
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidParameter("sample count must be at least 1".into()));
        }
        if self.max_horizon == 0 {
            return Err(Error::InvalidParameter("horizon range is empty".into()));
        }
        if self.parameters.is_empty() || self.parameters.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidParameter("parameters must be a nonempty list of positive numbers".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidParameter("worker count must be at least 1".into()));
        }
        if self.costs.len() != self.max_horizon {
            return Err(Error::Shape(format!(
                "{} stage costs for {} stages",
                self.costs.len(),
                self.max_horizon
            )));
        }
        if self.k < 2 {
            return Err(Error::InvalidParameter(format!("grid size K = {} must be at least 2", self.k)));
        }
        Ok(())
    }

    pub fn seed(&self, sample_id: usize) -> u64 {
        self.base_seed.wrapping_add(sample_id as u64)
    }

    pub fn instance(&self, parameter: f64, sample_id: usize) -> Result<TransportInstance> {
        TransportInstance::new(
            self.k,
            self.max_horizon,
            self.costs.clone(),
            self.kind.target(self.k, parameter)?,
            sample_initial(self.k, self.seed(sample_id)),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub k: usize,
    pub target_kind: TargetKind,
    pub parameter: f64,
    pub horizon: usize,
    pub sample_id: usize,
    pub seed: u64,
    pub w1_terminal: f64,
    pub total_cost: f64,
}

/// One sample at the longest horizon; shorter horizons are prefixes of it
/// because the greedy step never reads `N`.
#[derive(Debug, Clone)]
pub struct SampleRun {
    pub parameter: f64,
    pub sample_id: usize,
    pub instance: TransportInstance,
    pub trace: Algorithm1Trace,
    pub structure: StructuralReport,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub rows: Vec<SweepRow>,
    pub runs: Vec<SampleRun>,
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = (0..config.parameters.len())
        .flat_map(|p| (0..config.samples).map(move |i| (p, i)))
        .collect();
    let work = || -> Result<Vec<SampleRun>> {
        jobs.par_iter()
            .map(|&(p, i)| {
                let parameter = config.parameters[p];
                let instance = config.instance(parameter, i)?;
                let trace = run_algorithm1(&instance)?;
                let structure = structural_check(&instance, &trace)?;
                Ok(SampleRun {
                    parameter,
                    sample_id: i,
                    instance,
                    trace,
                    structure,
                })
            })
            .collect()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {} workers: {e}", config.workers)))?;
    let runs = pool.install(work)?;
    let mut rows = Vec::with_capacity(runs.len() * config.max_horizon);
    for run in &runs {
        let mut cost = 0.0;
        for n in 1..=config.max_horizon {
            cost += run.trace.stage_costs[n - 1];
            rows.push(SweepRow {
                k: config.k,
                target_kind: config.kind,
                parameter: run.parameter,
                horizon: n,
                sample_id: run.sample_id,
                seed: config.seed(run.sample_id),
                w1_terminal: run.trace.distances[n],
                total_cost: cost,
            });
        }
    }
    rows.sort_by(|a, b| {
        a.parameter
            .total_cmp(&b.parameter)
            .then(a.horizon.cmp(&b.horizon))
            .then(a.sample_id.cmp(&b.sample_id))
    });
    Ok(SweepResult {
        config: config.clone(),
        rows,
        runs,
    })
}

pub const SWEEP_HEADER: &str = "K,target_kind,parameter,N,sample_id,seed,w1_terminal,total_cost";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.k,
            r.target_kind.name(),
            r.parameter,
            r.horizon,
            r.sample_id,
            r.seed,
            r.w1_terminal,
            r.total_cost
        )
        .expect("write to string");
    }
    out
}

/// Mean terminal distance per `(parameter, N)`, parameters in config order.
pub fn mean_w1(result: &SweepResult) -> Vec<(f64, Vec<f64>)> {
    let c = &result.config;
    c.parameters
        .iter()
        .map(|&p| {
            let mut sums = vec![0.0; c.max_horizon];
            for r in result.rows.iter().filter(|r| r.parameter == p) {
                sums[r.horizon - 1] += r.w1_terminal;
            }
            (p, sums.into_iter().map(|s| s / c.samples as f64).collect())
        })
        .collect()
}

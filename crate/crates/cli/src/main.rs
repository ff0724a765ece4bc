//! `lifted-mdp`: solve models from JSON files and run the transport experiments.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 invalid input,
//! 3 instance too large for the requested exact mode.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use lifted_mdp::infinite::solve_to_tolerance;
use lifted_mdp::io::{parse_instance, parse_model_with_objective, parse_objective, fit_objective, InputError};
use lifted_mdp::lifted::trajectory_csv;
use lifted_mdp::sweep::{run_sweep, sweep_csv, SweepConfig, TargetKind};
use lifted_mdp::transport::{run_algorithm1, structural_check, trace_csv};
use lifted_mdp::{
    classical_bellman, compute_reward_support, lifted_value_iteration, quantile_dp, Error, MdpModel, Objective,
    SearchConfig, Strategy,
};

#[derive(Parser)]
#[command(name = "lifted-mdp", version, about = "Distributional objectives for finite MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Directory for report and CSV files (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// What to print on stdout when no output directory is given
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Auto,
    Exhaustive,
    Ascent,
}

#[derive(Subcommand)]
enum Command {
    /// Lifted value iteration for the model's objective block (or --objective)
    Solve {
        model: PathBuf,
        /// Objective JSON, overriding the block in the model file
        #[arg(long)]
        objective: Option<String>,
        #[arg(long, value_enum, default_value_t = StrategyArg::Auto)]
        strategy: StrategyArg,
        #[arg(long, default_value_t = 10_000_000)]
        budget: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Expected total reward by the Bellman recursion
    Classical {
        model: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Largest probability that reward plus terminal reward reaches a threshold
    Quantile {
        model: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        threshold: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Discounted problem truncated with a certified tail bound
    Infinite {
        model: PathBuf,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        epsilon: f64,
        /// Lipschitz constant of the objective; defaults to its declared one
        #[arg(long)]
        lipschitz: Option<f64>,
        /// Objective JSON; defaults to the mean discounted reward
        #[arg(long)]
        objective: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Greedy transport on one instance file
    TransportRun {
        instance: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Greedy transport over random initial histograms and target parameters
    TransportSweep {
        #[arg(long = "K", alias = "k", default_value_t = 50)]
        k: usize,
        #[arg(long, default_value = "normal")]
        kind: String,
        /// Comma-separated target parameters
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,5")]
        parameters: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Largest horizon (default K/2 + 5)
        #[arg(long)]
        max_horizon: Option<usize>,
        /// Cost per unit of moved mass, the same at every stage
        #[arg(long, default_value_t = 1.0)]
        cost: f64,
        #[command(flatten)]
        common: Common,
    },
}

enum Failure {
    Io(String),
    Input(String),
    Budget(String),
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        match e {
            InputError::Invalid(e) => e.into(),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_budget() {
            Failure::Budget(e.to_string())
        } else {
            match e {
                Error::Validation(_) | Error::InvalidParameter(_) | Error::Shape(_) | Error::Regularity(_) => {
                    Failure::Input(e.to_string())
                }
                other => Failure::Io(other.to_string()),
            }
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn with_path<T>(path: &Path, r: Result<T, InputError>) -> Result<T, Failure> {
    r.map_err(|e| match Failure::from(e) {
        Failure::Input(m) => Failure::Input(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Writes `report` and optional CSV into `--out`, or prints one of them.
fn emit(common: &Common, report: &Value, csv: Option<(&str, String)>) -> Result<(), Failure> {
    let json = serde_json::to_string_pretty(report).map_err(|e| Failure::Io(e.to_string()))?;
    match &common.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
            let write = |name: &str, body: &str| {
                let p = dir.join(name);
                fs::write(&p, body).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))
            };
            write("report.json", &json)?;
            if let Some((name, body)) = csv {
                write(name, &body)?;
            }
        }
        None => match (common.format, csv) {
            (Format::Csv, Some((_, body))) => print!("{body}"),
            _ => println!("{json}"),
        },
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<(MdpModel, Option<Objective>), Failure> {
    with_path(path, parse_model_with_objective(&read(path)?))
}

fn objective_arg(text: &str, model: &MdpModel) -> Result<Objective, Failure> {
    let v: Value = serde_json::from_str(text).map_err(|e| Failure::Input(format!("--objective: {e}")))?;
    let o = parse_objective(&v).map_err(|e| Failure::Input(format!("--objective: {e}")))?;
    Ok(fit_objective(o, model))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve {
            model,
            objective,
            strategy,
            budget,
            common,
        } => {
            let (m, from_file) = load_model(&model)?;
            let h = match objective {
                Some(text) => objective_arg(&text, &m)?,
                None => from_file.unwrap_or_else(Objective::classical),
            };
            let support = compute_reward_support(&m)?;
            let config = SearchConfig {
                strategy: match strategy {
                    StrategyArg::Auto => Strategy::Auto,
                    StrategyArg::Exhaustive => Strategy::Exhaustive,
                    StrategyArg::Ascent => Strategy::CoordinateAscent,
                },
                budget,
                seed: common.seed,
                ..Default::default()
            };
            let pool = rayon_pool(common.workers)?;
            let r = pool.install(|| lifted_value_iteration(&m, &support, &h, &config))?;
            let report = json!({
                "command": "solve",
                "objective": format!("{h:?}"),
                "value": r.value,
                "score": r.score,
                "strategy": r.strategy,
                "certified": r.certified,
                "stats": r.stats,
                "horizon": m.horizon(),
                "arithmetic": support.arithmetic(),
                "sequence": r.sequence,
            });
            emit(&common, &report, Some(("trajectory.csv", trajectory_csv(&r.trajectory, &support))))
        }
        Command::Classical { model, common } => {
            let (m, _) = load_model(&model)?;
            let t = classical_bellman(&m);
            let report = json!({
                "command": "classical",
                "value": t.value_from(m.initial()),
                "values": t.values,
                "policy": t.argmax,
            });
            emit(&common, &report, None)
        }
        Command::Quantile {
            model,
            threshold,
            common,
        } => {
            let (m, _) = load_model(&model)?;
            let support = compute_reward_support(&m)?;
            let t = quantile_dp(&m, &support, threshold)?;
            let v0: Vec<f64> = (0..m.n_states()).map(|x| t.value(0, x, 0)).collect();
            let report = json!({
                "command": "quantile",
                "threshold": threshold,
                "value": t.value_from(m.initial()),
                "initial_values": v0,
            });
            let sequence = t.action_sequence(m.n_states(), m.n_actions());
            let trajectory = sequence.trajectory(&m, &support)?;
            emit(&common, &report, Some(("trajectory.csv", trajectory_csv(&trajectory, &support))))
        }
        Command::Infinite {
            model,
            beta,
            epsilon,
            lipschitz,
            objective,
            common,
        } => {
            let (m, _) = load_model(&model)?;
            let h = match objective {
                Some(text) => objective_arg(&text, &m)?,
                None => Objective::mean_reward(m.n_states()),
            };
            let config = SearchConfig {
                seed: common.seed,
                ..Default::default()
            };
            let r = solve_to_tolerance(&m, &h, lipschitz, beta, epsilon, &config)?;
            let report = json!({
                "command": "infinite",
                "value": r.solve.value,
                "horizon": r.horizon,
                "requested_epsilon": r.requested_epsilon,
                "achieved_epsilon": r.achieved_epsilon,
                "certified_gap": r.certified_gap(),
                "solver_certified": r.solve.certified,
                "beta": r.spec.beta,
                "reward_bound": r.spec.reward_bound,
                "lipschitz": r.spec.lipschitz,
            });
            emit(&common, &report, None)
        }
        Command::TransportRun { instance, common } => {
            let inst = with_path(&instance, parse_instance(&read(&instance)?))?;
            let trace = run_algorithm1(&inst)?;
            let check = structural_check(&inst, &trace)?;
            let report = json!({
                "command": "transport-run",
                "K": inst.k,
                "N": inst.horizon,
                "objective": trace.objective,
                "total_cost": trace.total_cost,
                "terminal_distance": trace.terminal_distance,
                "moved": trace.moved,
                "structural_check": {
                    "passed": check.passed(),
                    "sink_violations": check.sink_violations,
                    "transport_identity": check.transport_identity,
                },
            });
            emit(&common, &report, Some(("trace.csv", trace_csv(&trace))))
        }
        Command::TransportSweep {
            k,
            kind,
            parameters,
            samples,
            max_horizon,
            cost,
            common,
        } => {
            let kind = TargetKind::parse(&kind)?;
            let mut config = SweepConfig::standard(k, kind, parameters, common.seed);
            config.samples = samples;
            if let Some(n) = max_horizon {
                config.max_horizon = n;
            }
            config.costs = vec![cost; config.max_horizon];
            config.workers = common.workers;
            let result = run_sweep(&config)?;
            let failed = result.runs.iter().filter(|r| !r.structure.passed()).count();
            let report = json!({
                "command": "transport-sweep",
                "config": config,
                "rows": result.rows.len(),
                "structural_failures": failed,
            });
            emit(&common, &report, Some(("sweep.csv", sweep_csv(&result.rows))))
        }
    }
}

fn rayon_pool(workers: usize) -> Result<rayon::ThreadPool, Failure> {
    if workers == 0 {
        return Err(Failure::Input("--workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::Io(e.to_string()))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Budget(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

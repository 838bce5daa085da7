use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info};
use serde::Serialize;

use scenario_nash::config::ExperimentConfig;
use scenario_nash::experiments::{self, fresh_seed};
use scenario_nash::io::{self, EvInstance};
use scenario_nash_core::certificate::{eps_a_priori, Certificate, CertificateKind};
use scenario_nash_core::compression::{greedy_compression, support_compression, support_from_weights};
use scenario_nash_core::validation::{
    certificate_conformance, empirical_violation_cost, empirical_violation_ne, fresh_uncertain_costs,
};
use scenario_nash_core::{EvGame, EvScenario, ScenarioGame, ScenarioSet, Verification};

#[derive(Parser)]
#[command(name = "scenario-nash", version, about = "Robust Nash equilibria of scenario-based games")]
struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the agent count N.
    #[arg(long = "agents")]
    num_agents: Option<usize>,
    /// Override the slot count n.
    #[arg(long = "dim")]
    n: Option<usize>,
    /// Override the scenario count M.
    #[arg(long = "scenarios")]
    num_scenarios: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    gamma_out: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.num_agents {
            cfg.num_agents = v;
        }
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = self.num_scenarios {
            cfg.num_scenarios = v;
        }
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if let Some(v) = self.tau {
            cfg.solver.tau = v;
        }
        if let Some(v) = self.gamma_out {
            cfg.solver.gamma_out = v;
        }
        if let Some(v) = &self.out {
            cfg.output_dir = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// An instance read from file, or sampled from the configuration and a seed.
#[derive(Args, Clone)]
struct InstanceArgs {
    /// EV instance JSON; sampled from the configuration when absent.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Seed for sampling the instance.
    #[arg(long, required_unless_present = "instance")]
    seed: Option<u64>,
}

impl InstanceArgs {
    fn load(&self, cfg: &ExperimentConfig) -> Result<(EvGame, ScenarioSet<EvScenario>)> {
        match (&self.instance, self.seed) {
            (Some(p), _) => EvInstance::read(p)?.into_parts(),
            (None, Some(seed)) => experiments::sample_instance(cfg, cfg.n, cfg.num_scenarios, seed),
            (None, None) => bail!("either --instance or --seed is required"),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Split,
    WaitAndJudge,
    APriori,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Support,
    Greedy,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Cost,
    Ne,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the equilibrium of one instance.
    Solve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        instance: InstanceArgs,
        /// Also write the sampled instance as JSON.
        #[arg(long)]
        save_instance: bool,
    },
    /// Print a robustness certificate as JSON.
    Certify {
        #[arg(long = "M")]
        m: usize,
        #[arg(long)]
        beta: f64,
        /// Compression size (a posteriori kinds).
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum, default_value = "split")]
        kind: KindArg,
        /// Agent count (a priori kind).
        #[arg(long = "agents")]
        num_agents: Option<usize>,
        /// Slot count (a priori kind).
        #[arg(long = "dim")]
        n: Option<usize>,
        /// Declare f_i and g separately convex (a priori kind).
        #[arg(long)]
        separable: bool,
        /// Declare the problem non-degenerate (a priori kind).
        #[arg(long)]
        non_degenerate: bool,
    },
    /// Extract a compression set.
    Compress {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, value_enum, default_value = "support")]
        method: MethodArg,
    },
    /// Estimate the violation rate on fresh draws and compare with the bound.
    Validate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, value_enum, default_value = "cost")]
        estimator: EstimatorArg,
        /// Fresh draws; defaults to the configuration.
        #[arg(long)]
        trials: Option<usize>,
        /// Write per-draw uncertain costs to this CSV.
        #[arg(long)]
        draws_csv: Option<PathBuf>,
    },
    /// Certificate table grouped by compression size.
    Table {
        #[command(flatten)]
        common: Common,
        /// First run seed; runs use consecutive seeds.
        #[arg(long)]
        seed: u64,
        /// Number of runs; defaults to the number of configured seeds.
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Compression size over the configured n and M lists.
    Scaling {
        #[command(flatten)]
        common: Common,
        /// First run seed; runs use consecutive seeds.
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Per-iteration convergence trace of one solve.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
    },
}

/// Outcome of a command: `Ok(true)` when every assertion held.
type Outcome = Result<bool>;

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn reseed(cfg: &mut ExperimentConfig, first: u64, runs: Option<usize>) {
    let count = runs.unwrap_or(cfg.seeds.len());
    cfg.seeds = (first..first + count as u64).collect();
}

#[derive(Serialize)]
struct SolveSummary {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    gamma: f64,
    outer_iterations: usize,
    final_residual: f64,
    last_change: f64,
}

fn solve(common: &Common, inst: &InstanceArgs, save_instance: bool) -> Outcome {
    let cfg = common.load()?;
    let (game, scenarios) = inst.load(&cfg)?;
    let solver = cfg.solver_config();
    let sol = experiments::solve_checked(&game, &scenarios, &solver)?;
    let dir = &cfg.output_dir;
    io::write_trace_csv(&dir.join("trace.csv"), &sol.trace)?;
    if save_instance {
        EvInstance::from_parts(&game, &scenarios).write(&dir.join("instance.json"))?;
    }
    let summary = SolveSummary {
        x: sol.x.blocks().map(<[f64]>::to_vec).collect(),
        y: sol.y.as_slice().to_vec(),
        gamma: sol.gamma,
        outer_iterations: sol.trace.outer_iterations(),
        final_residual: sol.trace.final_residual,
        last_change: sol.trace.last_change().unwrap_or(f64::NAN),
    };
    io::write_json(&dir.join("solution.json"), &summary)?;
    print_json(&summary)?;
    Ok(summary.last_change <= solver.gamma_out && sol.x.is_feasible(game.agents(), 1e-9))
}

#[allow(clippy::too_many_arguments)]
fn certify(
    m: usize,
    beta: f64,
    k: Option<usize>,
    kind: KindArg,
    num_agents: Option<usize>,
    n: Option<usize>,
    separable: bool,
    non_degenerate: bool,
) -> Outcome {
    let cert = match kind {
        KindArg::APriori => {
            let (Some(na), Some(n)) = (num_agents, n) else {
                bail!("--agents and --dim are required for the a priori bound");
            };
            eps_a_priori(na, n, m, beta, separable, non_degenerate)?
        }
        KindArg::Split | KindArg::WaitAndJudge => {
            let k = k.context("--k is required for a posteriori bounds")?;
            let kind = if matches!(kind, KindArg::Split) {
                CertificateKind::Split
            } else {
                CertificateKind::WaitAndJudge
            };
            Certificate::a_posteriori(m, beta, k, kind)?
        }
    };
    print_json(&cert)?;
    Ok((0.0..=1.0).contains(&cert.epsilon))
}

fn compress(common: &Common, inst: &InstanceArgs, method: MethodArg) -> Outcome {
    let cfg = common.load()?;
    let (game, scenarios) = inst.load(&cfg)?;
    let solver = cfg.solver_config();
    let sol = experiments::solve_checked(&game, &scenarios, &solver)?;
    let tol = cfg.equality_tol_for(game.dim());
    let report = match method {
        MethodArg::Support => support_compression(&game, &scenarios, &sol, &solver, cfg.support_tol, tol)?,
        MethodArg::Greedy => greedy_compression(&game, &scenarios, &sol, &solver, tol)?,
    };
    io::write_json(&cfg.output_dir.join("compression.json"), &report)?;
    print_json(&report)?;
    Ok(report.verification == Verification::Verified)
}

#[derive(Serialize)]
struct ValidationSummary {
    estimate: scenario_nash_core::ViolationEstimate,
    d_star: usize,
    certificate: Certificate,
    conforms: bool,
}

fn validate(
    common: &Common,
    inst: &InstanceArgs,
    estimator: EstimatorArg,
    trials: Option<usize>,
    draws_csv: Option<&Path>,
) -> Outcome {
    let cfg = common.load()?;
    let seed = inst.seed.context("--seed is required for fresh draws")?;
    let (game, scenarios) = inst.load(&cfg)?;
    let n = game.dim();
    let solver = cfg.solver_config();
    let sol = experiments::solve_checked(&game, &scenarios, &solver)?;
    let d_star = support_from_weights(sol.y.as_slice(), cfg.support_tol)?.len();
    let draw_seed = fresh_seed(seed);
    let mut sampler = cfg.sampler.sampler(n)?;
    let estimate = match estimator {
        EstimatorArg::Cost => {
            let trials = trials.unwrap_or(cfg.fresh_draws);
            if let Some(path) = draws_csv {
                let costs = fresh_uncertain_costs(&game, &sol.x, &mut sampler, trials, draw_seed);
                io::write_draws_csv(path, &costs, sol.gamma)?;
            }
            empirical_violation_cost(&game, &sol.x, sol.gamma, &mut sampler, trials, draw_seed)
        }
        EstimatorArg::Ne => {
            let trials = trials.unwrap_or(cfg.ne_trials);
            let tol = cfg.equality_tol_for(n);
            empirical_violation_ne(&game, &scenarios, &sol.x, &mut sampler, trials, &solver, tol, draw_seed)?
        }
    };
    let certificate = Certificate::a_posteriori(scenarios.len(), cfg.beta, d_star, CertificateKind::WaitAndJudge)?;
    let conforms = certificate_conformance(&estimate, &certificate);
    let summary = ValidationSummary {
        estimate,
        d_star,
        certificate,
        conforms,
    };
    io::write_json(&cfg.output_dir.join("validation.json"), &summary)?;
    print_json(&summary)?;
    Ok(conforms)
}

fn table(common: &Common, seed: u64, runs: Option<usize>) -> Outcome {
    let mut cfg = common.load()?;
    reseed(&mut cfg, seed, runs);
    let report = experiments::run_certificate_table(&cfg)?;
    report.write(&cfg.output_dir)?;
    for row in &report.rows {
        println!(
            "d* = {:>3}  runs = {:>3}  empirical = {:>6.3}%  wait-and-judge = {:>6.3}%  split = {:>6.3}%",
            row.d_star, row.runs, row.empirical_pct, row.eps_wait_judge_pct, row.eps_split_pct
        );
    }
    Ok(report.all_rows_ordered() && report.all_runs_conform())
}

fn scaling(common: &Common, seed: u64, runs: Option<usize>) -> Outcome {
    let mut cfg = common.load()?;
    reseed(&mut cfg, seed, runs);
    let report = experiments::run_dstar_scaling(&cfg)?;
    report.write(&cfg.output_dir)?;
    for row in &report.rows {
        println!(
            "n = {:>3}  M = {:>5}  mean d* = {:>6.2}  max d* = {:>3}  (n+1)N = {:>4}  d* <= n: {}",
            row.n, row.m, row.mean_d_star, row.max_d_star, row.bound, row.d_star_le_n
        );
    }
    Ok(report.within_bound())
}

fn trace(common: &Common, seed: u64) -> Outcome {
    let cfg = common.load()?;
    let report = experiments::run_convergence_trace(&cfg, seed)?;
    let path = cfg.output_dir.join("convergence.csv");
    report.write_csv(&path)?;
    info!(
        "{} outer iterations, at most {} inner sweeps, written to {}",
        report.points.len(),
        report.max_inner_iters(),
        path.display()
    );
    Ok(report.converged())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Solve {
            common,
            instance,
            save_instance,
        } => solve(&common, &instance, save_instance),
        Command::Certify {
            m,
            beta,
            k,
            kind,
            num_agents,
            n,
            separable,
            non_degenerate,
        } => certify(m, beta, k, kind, num_agents, n, separable, non_degenerate),
        Command::Compress {
            common,
            instance,
            method,
        } => compress(&common, &instance, method),
        Command::Validate {
            common,
            instance,
            estimator,
            trials,
            draws_csv,
        } => validate(&common, &instance, estimator, trials, draws_csv.as_deref()),
        Command::Table { common, seed, runs } => table(&common, seed, runs),
        Command::Scaling { common, seed, runs } => scaling(&common, seed, runs),
        Command::Trace { common, seed } => trace(&common, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            error!("one or more checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            error!("{e:#}");
            ExitCode::from(2)
        }
    }
}

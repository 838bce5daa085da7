//! End-to-end experiments: certificate tables, compression-size sweeps and
//! convergence traces. Seeds run in parallel; results are merged in seed
//! order so every output is a deterministic function of the configuration.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use scenario_nash_core::certificate::{eps_split, eps_wait_judge};
use scenario_nash_core::compression::support_compression;
use scenario_nash_core::ev::{ev_sample_agents, EvGame};
use scenario_nash_core::game::{self, monotonicity_probe};
use scenario_nash_core::rng::derive_seed;
use scenario_nash_core::solver::{solve_ne, solve_ne_observed};
use scenario_nash_core::validation::empirical_violation_cost;
use scenario_nash_core::{
    EvScenario, NeSolution, ScenarioGame, ScenarioSampler, ScenarioSet, SolverConfig, Verification,
};

use crate::config::ExperimentConfig;
use crate::io;

/// Largest tolerated share of failed seeds in a multi-seed run.
pub const MAX_FAILED_SHARE: f64 = 0.2;

const PROBE_TRIALS: usize = 20;

/// Seed of the agents' feasible sets for a run seed.
pub fn agent_seed(seed: u64) -> u64 {
    derive_seed(seed, 1)
}

/// Seed of the training scenarios for a run seed.
pub fn scenario_seed(seed: u64) -> u64 {
    derive_seed(seed, 2)
}

/// Seed of the fresh validation draws for a run seed.
pub fn fresh_seed(seed: u64) -> u64 {
    derive_seed(seed, 3)
}

/// Samples the EV game and its `M` training scenarios with `n` slots.
pub fn sample_instance(cfg: &ExperimentConfig, n: usize, m: usize, seed: u64) -> Result<(EvGame, ScenarioSet<EvScenario>)> {
    let agents = ev_sample_agents(cfg.num_agents, n, cfg.power_range, cfg.energy_per_12_slots, agent_seed(seed))?;
    let game = EvGame::with_nominal_prices(agents)?;
    let mut sampler = cfg.sampler.sampler(n)?;
    let mut rng = scenario_nash_core::rng::seeded(scenario_seed(seed));
    let scenarios = ScenarioSet::new((0..m).map(|_| sampler.draw(&mut rng)).collect())?;
    Ok((game, scenarios))
}

/// Solves after a monotonicity probe; a failed probe is logged, not fatal.
pub fn solve_checked<G: ScenarioGame + ?Sized>(
    game: &G,
    scenarios: &ScenarioSet<G::Scenario>,
    cfg: &SolverConfig,
) -> Result<NeSolution> {
    let probe = monotonicity_probe(game, scenarios, PROBE_TRIALS, 0)?;
    if !probe.passed {
        warn!(
            "pseudo-gradient failed the monotonicity probe (min inner product {:.3e}); the solver may not converge",
            probe.min_inner_product
        );
    }
    Ok(solve_ne(game, scenarios, cfg)?)
}

/// One seed of the certificate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub d_star: usize,
    pub gamma: f64,
    pub outer_iterations: usize,
    pub trials: usize,
    pub violations: usize,
    pub empirical_rate: f64,
    pub eps_split: f64,
    pub eps_wait_judge: f64,
    /// `empirical_rate ≤ eps_wait_judge`.
    pub conforms: bool,
}

/// Runs grouped by compression size, rates in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub d_star: usize,
    pub runs: usize,
    pub empirical_pct: f64,
    pub eps_split_pct: f64,
    pub eps_wait_judge_pct: f64,
}

impl TableRow {
    /// `empirical ≤ eps_wait_judge ≤ eps_split`.
    pub fn ordered(&self) -> bool {
        self.empirical_pct <= self.eps_wait_judge_pct && self.eps_wait_judge_pct <= self.eps_split_pct
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedSeed {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub runs: Vec<RunRecord>,
    pub rows: Vec<TableRow>,
    pub failed: Vec<FailedSeed>,
}

impl TableReport {
    pub fn all_rows_ordered(&self) -> bool {
        self.rows.iter().all(TableRow::ordered)
    }

    pub fn all_runs_conform(&self) -> bool {
        self.runs.iter().all(|r| r.conforms)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        io::write_csv(&dir.join("table.csv"), &self.rows)?;
        io::write_csv(&dir.join("table_runs.csv"), &self.runs)
    }
}

/// Solves one seeded instance, extracts a verified support compression set
/// and compares the fresh-draw cost-violation rate with both bounds.
pub fn certificate_run(cfg: &ExperimentConfig, seed: u64) -> Result<RunRecord> {
    let solver = cfg.solver_config();
    let m = cfg.num_scenarios;
    let (game, scenarios) = sample_instance(cfg, cfg.n, m, seed)?;
    let sol = solve_checked(&game, &scenarios, &solver)?;
    let report = support_compression(&game, &scenarios, &sol, &solver, cfg.support_tol, cfg.equality_tol_for(cfg.n))?;
    if report.verification != Verification::Verified {
        bail!("support set {:?} does not reproduce the equilibrium", report.indices);
    }
    let d = report.cardinality;
    let mut sampler = cfg.sampler.sampler(cfg.n)?;
    let est = empirical_violation_cost(&game, &sol.x, sol.gamma, &mut sampler, cfg.fresh_draws, fresh_seed(seed));
    let eps_s = eps_split(m, cfg.beta, d)?;
    let eps_w = eps_wait_judge(m, cfg.beta, d)?;
    Ok(RunRecord {
        seed,
        d_star: d,
        gamma: sol.gamma,
        outer_iterations: sol.trace.outer_iterations(),
        trials: est.trials,
        violations: est.violations,
        empirical_rate: est.rate,
        eps_split: eps_s,
        eps_wait_judge: eps_w,
        conforms: est.rate <= eps_w,
    })
}

fn split_failures<T>(seeds: &[u64], results: Vec<Result<T>>, what: &str) -> Result<(Vec<T>, Vec<FailedSeed>)> {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (&seed, r) in seeds.iter().zip(results) {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                warn!("{what}: seed {seed} failed: {e:#}");
                failed.push(FailedSeed {
                    seed,
                    error: format!("{e:#}"),
                });
            }
        }
    }
    if failed.len() as f64 > MAX_FAILED_SHARE * seeds.len() as f64 {
        bail!("{what}: {} of {} seeds failed", failed.len(), seeds.len());
    }
    Ok((ok, failed))
}

/// Per-seed runs grouped by `d*`, with mean empirical rates per group.
pub fn run_certificate_table(cfg: &ExperimentConfig) -> Result<TableReport> {
    cfg.validate()?;
    let results: Vec<Result<RunRecord>> = cfg.seeds.par_iter().map(|&s| certificate_run(cfg, s)).collect();
    let (runs, failed) = split_failures(&cfg.seeds, results, "certificate table")?;
    let mut groups: BTreeMap<usize, Vec<&RunRecord>> = BTreeMap::new();
    for r in &runs {
        groups.entry(r.d_star).or_default().push(r);
    }
    let rows = groups
        .into_iter()
        .map(|(d, members)| {
            let mean = members.iter().map(|r| r.empirical_rate).sum::<f64>() / members.len() as f64;
            TableRow {
                d_star: d,
                runs: members.len(),
                empirical_pct: 100.0 * mean,
                eps_split_pct: 100.0 * members[0].eps_split,
                eps_wait_judge_pct: 100.0 * members[0].eps_wait_judge,
            }
        })
        .collect();
    info!("certificate table: {} runs, {} failed", runs.len(), failed.len());
    Ok(TableReport { runs, rows, failed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub seed: u64,
    pub d_star: usize,
}

/// Summary of one `(n, M)` cell of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub runs: usize,
    pub mean_d_star: f64,
    pub max_d_star: usize,
    /// `(n + 1) N`.
    pub bound: usize,
    /// Every `d* ≤ (n + 1) N`.
    pub within_bound: bool,
    /// Every `d* ≤ n`; informative only.
    pub d_star_le_n: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub records: Vec<ScalingRecord>,
    pub rows: Vec<ScalingRow>,
    pub failed: Vec<FailedSeed>,
}

impl ScalingReport {
    pub fn within_bound(&self) -> bool {
        self.rows.iter().all(|r| r.within_bound)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        io::write_csv(&dir.join("scaling.csv"), &self.rows)?;
        io::write_csv(&dir.join("scaling_runs.csv"), &self.records)
    }
}

fn scaling_run(cfg: &ExperimentConfig, n: usize, m: usize, seed: u64) -> Result<ScalingRecord> {
    let solver = cfg.solver_config();
    let (game, scenarios) = sample_instance(cfg, n, m, seed)?;
    let sol = solve_checked(&game, &scenarios, &solver)?;
    let report = support_compression(&game, &scenarios, &sol, &solver, cfg.support_tol, cfg.equality_tol_for(n))?;
    if report.verification != Verification::Verified {
        bail!("support set {:?} does not reproduce the equilibrium", report.indices);
    }
    Ok(ScalingRecord {
        n,
        m,
        seed,
        d_star: report.cardinality,
    })
}

/// `d*` over every `(n, M)` pair of the configured lists and every seed.
pub fn run_dstar_scaling(cfg: &ExperimentConfig) -> Result<ScalingReport> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize, u64)> = cfg
        .n_list
        .iter()
        .flat_map(|&n| cfg.m_list.iter().flat_map(move |&m| cfg.seeds.iter().map(move |&s| (n, m, s))))
        .collect();
    let results: Vec<Result<ScalingRecord>> = jobs.par_iter().map(|&(n, m, s)| scaling_run(cfg, n, m, s)).collect();
    let job_seeds: Vec<u64> = jobs.iter().map(|j| j.2).collect();
    let (records, failed) = split_failures(&job_seeds, results, "d* sweep")?;
    let mut rows = Vec::new();
    for &n in &cfg.n_list {
        for &m in &cfg.m_list {
            let cell: Vec<usize> = records.iter().filter(|r| r.n == n && r.m == m).map(|r| r.d_star).collect();
            if cell.is_empty() {
                continue;
            }
            let bound = (n + 1) * cfg.num_agents;
            let max = cell.iter().copied().max().unwrap_or(0);
            let row = ScalingRow {
                n,
                m,
                runs: cell.len(),
                mean_d_star: cell.iter().sum::<usize>() as f64 / cell.len() as f64,
                max_d_star: max,
                bound,
                within_bound: max <= bound,
                d_star_le_n: max <= n,
            };
            if !row.d_star_le_n {
                info!("n = {n}, M = {m}: max d* = {max} exceeds n (soft check)");
            }
            rows.push(row);
        }
    }
    Ok(ScalingReport { records, rows, failed })
}

/// One outer iteration of a convergence trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub k: usize,
    pub residual: f64,
    pub inner_iters: usize,
    pub eta: f64,
    /// `J_i` at the current centre, one entry per agent.
    pub agent_costs: Vec<f64>,
    /// `ĝ(x̄, ȳ)`.
    pub coordinator_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub seed: u64,
    pub points: Vec<TracePoint>,
    pub gamma: f64,
    pub final_residual: f64,
    pub gamma_out: f64,
}

impl TraceReport {
    /// Whether the last recorded change is within `γ_out`.
    pub fn converged(&self) -> bool {
        self.points.last().is_some_and(|p| p.residual <= self.gamma_out)
    }

    pub fn max_inner_iters(&self) -> usize {
        self.points.iter().map(|p| p.inner_iters).max().unwrap_or(0)
    }

    /// CSV with `k,residual,inner_iters,eta,J_1..J_N,coordinator_objective`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        let num_agents = self.points.first().map_or(0, |p| p.agent_costs.len());
        let mut header = vec!["k".to_string(), "residual".into(), "inner_iters".into(), "eta".into()];
        header.extend((1..=num_agents).map(|i| format!("J_{i}")));
        header.push("coordinator_objective".into());
        w.write_record(&header)?;
        for p in &self.points {
            let mut rec = vec![p.k.to_string(), p.residual.to_string(), p.inner_iters.to_string(), p.eta.to_string()];
            rec.extend(p.agent_costs.iter().map(f64::to_string));
            rec.push(p.coordinator_objective.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Records agent costs and the coordinator objective at every outer iterate
/// for the first configured seed.
pub fn run_convergence_trace(cfg: &ExperimentConfig, seed: u64) -> Result<TraceReport> {
    cfg.validate()?;
    let solver = cfg.solver_config();
    let (game, scenarios) = sample_instance(cfg, cfg.n, cfg.num_scenarios, seed)?;
    let mut points = Vec::new();
    let sol = solve_ne_observed(&game, &scenarios, &solver, |z, rec| {
        let agent_costs = (0..game.num_agents())
            .map(|i| game::eval_agent_cost(&game, i, &z.x, &scenarios).unwrap_or(f64::NAN))
            .collect();
        let coordinator_objective = game::eval_ghat(&game, &z.x, z.y.as_slice(), &scenarios).unwrap_or(f64::NAN);
        points.push(TracePoint {
            k: rec.k,
            residual: rec.change,
            inner_iters: rec.inner_iters,
            eta: rec.eta,
            agent_costs,
            coordinator_objective,
        });
    })?;
    Ok(TraceReport {
        seed,
        points,
        gamma: sol.gamma,
        final_residual: sol.trace.final_residual,
        gamma_out: solver.gamma_out,
    })
}

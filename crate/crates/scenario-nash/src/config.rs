//! Experiment configuration, read from JSON. Every field has a default, so a
//! config file only needs the values it changes.

use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use serde::{Deserialize, Serialize};

use scenario_nash_core::ev::{EvScenarioSampler, DEFAULT_ENERGY_PER_12_SLOTS, DEFAULT_POWER_RANGE};
use scenario_nash_core::solver::StopRule;
use scenario_nash_core::subproblem::SubproblemOptions;
use scenario_nash_core::{InitRule, SolverConfig};

/// Overrides for [`SolverConfig`]; the initial point is always the default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub tau: f64,
    pub eta0: f64,
    pub gamma_inn: f64,
    pub gamma_out: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub stop: StopRule,
    pub subproblem_tol: f64,
    pub subproblem_max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self::from(&SolverConfig::default())
    }
}

impl From<&SolverConfig> for SolverSettings {
    fn from(c: &SolverConfig) -> Self {
        Self {
            tau: c.tau,
            eta0: c.eta0,
            gamma_inn: c.gamma_inn,
            gamma_out: c.gamma_out,
            max_inner: c.max_inner,
            max_outer: c.max_outer,
            stop: c.stop,
            subproblem_tol: c.subproblem.tol,
            subproblem_max_iter: c.subproblem.max_iter,
        }
    }
}

impl SolverSettings {
    pub fn to_config(&self) -> SolverConfig {
        SolverConfig {
            tau: self.tau,
            eta0: self.eta0,
            gamma_inn: self.gamma_inn,
            gamma_out: self.gamma_out,
            max_inner: self.max_inner,
            max_outer: self.max_outer,
            init: InitRule::default(),
            stop: self.stop,
            subproblem: SubproblemOptions {
                tol: self.subproblem_tol,
                max_iter: self.subproblem_max_iter,
            },
        }
    }
}

/// Lognormal slopes and uniform offsets of the price scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSettings {
    pub log_mean: f64,
    pub log_std: f64,
    pub b_lo: f64,
    pub b_hi: f64,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        let s = EvScenarioSampler::with_defaults(1);
        Self {
            log_mean: s.log_mean,
            log_std: s.log_std,
            b_lo: s.offset_low,
            b_hi: s.offset_high,
        }
    }
}

impl SamplerSettings {
    pub fn sampler(&self, n: usize) -> Result<EvScenarioSampler> {
        Ok(EvScenarioSampler::new(n, self.log_mean, self.log_std, self.b_lo, self.b_hi)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "N")]
    pub num_agents: usize,
    pub n: usize,
    #[serde(rename = "M")]
    pub num_scenarios: usize,
    pub beta: f64,
    pub seeds: Vec<u64>,
    pub solver: SolverSettings,
    pub sampler: SamplerSettings,
    pub power_range: (f64, f64),
    pub energy_per_12_slots: f64,
    /// Fresh draws per seed for the cost-violation estimate.
    pub fresh_draws: usize,
    /// Fresh draws per seed for the equilibrium-change estimate.
    pub ne_trials: usize,
    /// Support threshold on `y*`.
    pub support_tol: f64,
    /// `δ_eq`; derived from the solver tolerance when absent.
    pub equality_tol: Option<f64>,
    /// `n` values of the d* sweep.
    pub n_list: Vec<usize>,
    /// `M` values of the d* sweep.
    pub m_list: Vec<usize>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            num_agents: 5,
            n: 6,
            num_scenarios: 500,
            beta: 1e-6,
            seeds: (0..20).collect(),
            solver: SolverSettings::default(),
            sampler: SamplerSettings::default(),
            power_range: DEFAULT_POWER_RANGE,
            energy_per_12_slots: DEFAULT_ENERGY_PER_12_SLOTS,
            fresh_draws: 10_000,
            ne_trials: 200,
            support_tol: scenario_nash_core::compression::DEFAULT_SUPPORT_TOL,
            equality_tol: None,
            n_list: vec![2, 6, 12],
            m_list: vec![100, 500],
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.num_agents > 0 && self.n > 0 && self.num_scenarios > 0, "N, n and M must be positive");
        ensure!(self.beta > 0.0 && self.beta < 1.0, "beta must lie in (0, 1)");
        ensure!(!self.seeds.is_empty(), "at least one seed is required");
        ensure!(self.fresh_draws > 0, "fresh_draws must be positive");
        ensure!(!self.n_list.is_empty() && !self.m_list.is_empty(), "sweep lists must be nonempty");
        ensure!(self.n_list.iter().chain(&self.m_list).all(|&v| v > 0), "sweep values must be positive");
        self.solver.to_config().validate()?;
        self.sampler.sampler(self.n)?;
        Ok(())
    }

    pub fn solver_config(&self) -> SolverConfig {
        self.solver.to_config()
    }

    /// `δ_eq` for an instance with `n` slots.
    pub fn equality_tol_for(&self, n: usize) -> f64 {
        self.equality_tol.unwrap_or_else(|| {
            scenario_nash_core::compression::default_equality_tolerance(&self.solver_config(), n, self.num_agents)
        })
    }
}

//! Decentralised equilibrium seeking for the augmented min-max game.
//!
//! The outer loop is a proximal-point iteration `z̄ ← S^τ(z̄)`, where
//! `S^τ(z̄)` is the unique equilibrium of the game regularised with a
//! Tikhonov weight `η^(k)` and a proximal weight `τ` around `z̄`. The inner
//! loop finds `S^τ(z̄)` by Jacobi sweeps: every agent and the coordinator best
//! respond to the previous sweep's state. With `η^(k) → 0` and `Σ η^(k) = ∞`
//! the iterates approach the minimum-norm equilibrium, so the map from a
//! scenario sample to the returned equilibrium is single valued.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ev::FeasibleSet;
use crate::game::{
    self, check_profile, check_scenarios, AugmentedPoint, ScenarioGame, ScenarioSet, SimplexWeights,
    StrategyProfile,
};
use crate::num;
use crate::projection;
use crate::subproblem::{self, SubproblemOptions};

/// How the first regularisation centre `x̄^(0)` is chosen. `ȳ^(0)` is uniform.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitRule {
    /// `x_i = (E_i / n) 1`.
    #[default]
    EvenSplit,
    /// `x_i = P_i 1`.
    FullPower,
    /// Earliest slots first: `P_i` per slot until `E_i` is reached.
    FrontLoaded,
    /// An explicit profile, projected onto the feasible sets.
    Profile(StrategyProfile),
}

/// When the outer loop may stop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StopRule {
    /// `‖z̄^(k) − z̄^(k−1)‖ ≤ γ_out`.
    Change,
    /// The change test, and additionally the geometric-tail estimate
    /// `c_k q̂ / (1 − q̂)` of the remaining distance is at most `γ_out`, with
    /// `q̂ = (c_k / c_{k−w})^{1/w}` over the last `w = TAIL_WINDOW` changes.
    #[default]
    TailEstimate,
}

/// Window used by [`StopRule::TailEstimate`] to estimate the contraction.
pub const TAIL_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Proximal weight `τ`.
    pub tau: f64,
    /// Tikhonov schedule `η^(k) = eta0 / (k + 1)`. Larger values bias the
    /// early outer iterations towards the origin.
    pub eta0: f64,
    /// Inner-loop exit threshold on `‖z^(l) − z^(l−1)‖`.
    pub gamma_inn: f64,
    /// Outer-loop exit threshold on `‖z̄^(k) − z̄^(k−1)‖`.
    pub gamma_out: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub init: InitRule,
    pub stop: StopRule,
    pub subproblem: SubproblemOptions,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tau: 5.0,
            eta0: 1e-6,
            gamma_inn: 1e-14,
            gamma_out: 1e-5,
            max_inner: 10_000,
            max_outer: 20_000,
            init: InitRule::EvenSplit,
            stop: StopRule::default(),
            subproblem: SubproblemOptions::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::invalid("tau", "must be positive"));
        }
        if !(self.eta0 > 0.0) || !self.eta0.is_finite() {
            return Err(Error::invalid("eta0", "must be positive"));
        }
        if !(self.gamma_inn > 0.0) || !(self.gamma_out > 0.0) {
            return Err(Error::invalid("gamma", "exit thresholds must be positive"));
        }
        if self.gamma_inn >= self.gamma_out {
            return Err(Error::invalid("gamma_inn", "must be smaller than gamma_out"));
        }
        if self.max_inner == 0 || self.max_outer == 0 {
            return Err(Error::invalid("max iterations", "must be positive"));
        }
        if !(self.subproblem.tol > 0.0) || self.subproblem.max_iter == 0 {
            return Err(Error::invalid("subproblem", "tolerance and iteration cap must be positive"));
        }
        Ok(())
    }

    /// Tikhonov weight at outer iteration `k`.
    pub fn eta(&self, k: usize) -> f64 {
        self.eta0 / (k as f64 + 1.0)
    }

    /// Whether the outer loop may stop after the recorded changes.
    pub fn outer_converged(&self, records: &[TraceRecord]) -> bool {
        let Some(last) = records.last() else {
            return false;
        };
        if last.change > self.gamma_out {
            return false;
        }
        match self.stop {
            StopRule::Change => true,
            StopRule::TailEstimate => tail_estimate(records).is_some_and(|d| d <= self.gamma_out),
        }
    }
}

/// `c_k q̂ / (1 − q̂)`, or `None` before the window fills or when the changes
/// are not contracting.
pub fn tail_estimate(records: &[TraceRecord]) -> Option<f64> {
    if records.len() <= TAIL_WINDOW {
        return None;
    }
    let last = records[records.len() - 1].change;
    let first = records[records.len() - 1 - TAIL_WINDOW].change;
    if last == 0.0 {
        return Some(0.0);
    }
    if !(first > last) {
        return None;
    }
    let q = num::exp(num::log(last / first) / TAIL_WINDOW as f64);
    Some(last * q / (1.0 - q))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceRecord {
    /// Outer iteration, starting at 1.
    pub k: usize,
    /// `‖z̄^(k) − z̄^(k−1)‖`.
    pub change: f64,
    pub inner_iters: usize,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
    /// Natural VI residual of the returned point.
    pub final_residual: f64,
}

impl SolveTrace {
    pub fn outer_iterations(&self) -> usize {
        self.records.len()
    }

    pub fn last_change(&self) -> Option<f64> {
        self.records.last().map(|r| r.change)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeSolution {
    pub x: StrategyProfile,
    pub y: SimplexWeights,
    /// `γ* = max_m g(x*, θ_m)`.
    pub gamma: f64,
    pub trace: SolveTrace,
}

impl NeSolution {
    pub fn point(&self) -> AugmentedPoint {
        AugmentedPoint::new(self.x.clone(), self.y.clone())
    }
}

fn initial_block(rule: &InitRule, fs: &FeasibleSet) -> Vec<f64> {
    let n = fs.dim;
    match rule {
        InitRule::EvenSplit => vec![(fs.budget / n as f64).min(fs.cap).max(0.0); n],
        InitRule::FullPower => vec![fs.cap; n],
        InitRule::FrontLoaded => {
            let mut left = fs.budget;
            (0..n)
                .map(|_| {
                    let v = left.min(fs.cap);
                    left -= v;
                    v
                })
                .collect()
        }
        InitRule::Profile(_) => unreachable!("handled by the caller"),
    }
}

/// The starting point `z̄^(0)` prescribed by `rule`.
pub fn initial_point<G: ScenarioGame + ?Sized>(
    game: &G,
    num_scenarios: usize,
    rule: &InitRule,
) -> Result<AugmentedPoint> {
    if num_scenarios == 0 {
        return Err(Error::EmptyScenarioSet);
    }
    let mut x = StrategyProfile::zeros(game.num_agents(), game.dim());
    if let InitRule::Profile(p) = rule {
        check_profile(game, p)?;
    }
    for i in 0..game.num_agents() {
        let fs = game.feasible_set(i);
        let block = match rule {
            InitRule::Profile(p) => projection::project_box_budget(p.block(i), fs)?,
            other => initial_block(other, fs),
        };
        x.block_mut(i).copy_from_slice(&block);
    }
    Ok(AugmentedPoint::new(x, SimplexWeights::uniform(num_scenarios)))
}

/// Solves the regularised game around `centre` by Jacobi sweeps, starting
/// from `centre`. Returns the equilibrium and the number of sweeps used.
pub fn inner_loop<G: ScenarioGame + ?Sized>(
    game: &G,
    scenarios: &ScenarioSet<G::Scenario>,
    centre: &AugmentedPoint,
    eta: f64,
    cfg: &SolverConfig,
) -> Result<(AugmentedPoint, usize)> {
    check_profile(game, &centre.x)?;
    Error::check_len("simplex weights", scenarios.len(), centre.y.len())?;
    let s = scenarios.as_slice();
    let mut z = centre.clone();
    let mut change = f64::INFINITY;
    for l in 0..cfg.max_inner {
        let mut x_next = z.x.clone();
        for i in 0..game.num_agents() {
            let block = subproblem::solve_agent_subproblem(
                game,
                i,
                centre.x.block(i),
                &z.x,
                s,
                z.y.as_slice(),
                eta,
                cfg.tau,
                &cfg.subproblem,
            )?;
            x_next.block_mut(i).copy_from_slice(&block);
        }
        let y_next =
            subproblem::solve_coordinator_subproblem(game, &z.x, centre.y.as_slice(), eta, cfg.tau, s)?;
        let next = AugmentedPoint::new(x_next, y_next);
        change = next.distance(&z);
        z = next;
        if change <= cfg.gamma_inn {
            return Ok((z, l + 1));
        }
    }
    Err(Error::NoConvergence {
        stage: "inner loop",
        iterations: cfg.max_inner,
        residual: change,
    })
}

/// Computes the minimum-norm equilibrium `x*`, the coordinator weights `y*`
/// and the worst-case uncertain cost `γ*`.
pub fn solve_ne<G: ScenarioGame + ?Sized>(
    game: &G,
    scenarios: &ScenarioSet<G::Scenario>,
    cfg: &SolverConfig,
) -> Result<NeSolution> {
    solve_ne_observed(game, scenarios, cfg, |_, _| {})
}

/// [`solve_ne`] calling `observer` with each new centre `z̄^(k)` and its
/// trace record.
pub fn solve_ne_observed<G, F>(
    game: &G,
    scenarios: &ScenarioSet<G::Scenario>,
    cfg: &SolverConfig,
    mut observer: F,
) -> Result<NeSolution>
where
    G: ScenarioGame + ?Sized,
    F: FnMut(&AugmentedPoint, &TraceRecord),
{
    cfg.validate()?;
    check_scenarios(game, scenarios)?;
    let mut centre = initial_point(game, scenarios.len(), &cfg.init)?;
    let mut records = Vec::new();
    for k in 0..cfg.max_outer {
        let eta = cfg.eta(k);
        let (z, inner_iters) = inner_loop(game, scenarios, &centre, eta, cfg)?;
        let change = z.distance(&centre);
        let record = TraceRecord {
            k: k + 1,
            change,
            inner_iters,
            eta,
        };
        records.push(record);
        centre = z;
        observer(&centre, &record);
        if cfg.outer_converged(&records) {
            let (gamma, _) = game::max_uncertain_cost(game, &centre.x, scenarios)?;
            let final_residual = vi_residual(game, scenarios, &centre)?;
            let AugmentedPoint { x, y } = centre;
            return Ok(NeSolution {
                x,
                y,
                gamma,
                trace: SolveTrace {
                    records,
                    final_residual,
                },
            });
        }
    }
    Err(Error::NoConvergence {
        stage: "outer loop",
        iterations: cfg.max_outer,
        residual: records.last().map_or(f64::INFINITY, |r| r.change),
    })
}

/// Natural residual `‖z − Proj_{X×Δ}(z − F(z))‖`; zero exactly at solutions
/// of the equilibrium variational inequality.
pub fn vi_residual<G: ScenarioGame + ?Sized>(
    game: &G,
    scenarios: &ScenarioSet<G::Scenario>,
    z: &AugmentedPoint,
) -> Result<f64> {
    let f = game::pseudo_gradient(game, z, scenarios)?;
    let n = game.dim();
    let nn = n * game.num_agents();
    let zs = z.stacked();
    let step: Vec<f64> = zs.iter().zip(&f).map(|(a, b)| a - b).collect();
    let mut projected = vec![0.0; zs.len()];
    for i in 0..game.num_agents() {
        projection::project_box_budget_into(
            &step[i * n..(i + 1) * n],
            game.feasible_set(i),
            &mut projected[i * n..(i + 1) * n],
        )?;
    }
    let y = projection::project_simplex(&step[nn..])?;
    projected[nn..].copy_from_slice(y.as_slice());
    Ok(num::dist(&zs, &projected))
}

/// Agent `i`'s incentive to deviate from `x`:
/// `J_i(x) − min_{ν ∈ X_i} J_i(ν, x_{-i})`, clamped at zero.
///
/// The inner minimum is the epigraph problem `min f_i + γ s.t. g_m ≤ γ`,
/// solved as the one-agent min-max game with the other agents frozen.
pub fn best_response_gap<G: ScenarioGame + ?Sized>(
    game: &G,
    scenarios: &ScenarioSet<G::Scenario>,
    x: &StrategyProfile,
    i: usize,
    cfg: &SolverConfig,
) -> Result<f64> {
    check_profile(game, x)?;
    let current = game::eval_agent_cost(game, i, x, scenarios)?;
    let best = best_response(game, scenarios, x, i, cfg)?;
    let mut deviated = x.clone();
    deviated.block_mut(i).copy_from_slice(&best);
    let best_cost = game::eval_agent_cost(game, i, &deviated, scenarios)?;
    Ok((current - best_cost).max(0.0))
}

/// Agent `i`'s (minimum-norm) best response to `x_{-i}` in the original game.
pub fn best_response<G: ScenarioGame + ?Sized>(
    game: &G,
    scenarios: &ScenarioSet<G::Scenario>,
    x: &StrategyProfile,
    i: usize,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    check_profile(game, x)?;
    if i >= game.num_agents() {
        return Err(Error::DimensionMismatch {
            what: "agent index",
            expected: game.num_agents(),
            found: i,
        });
    }
    let frozen = FrozenOthers {
        game,
        agent: i,
        base: x.clone(),
    };
    let mut local_cfg = cfg.clone();
    local_cfg.init = InitRule::Profile(StrategyProfile::from_vec(game.dim(), x.block(i).to_vec())?);
    let sol = solve_ne(&frozen, scenarios, &local_cfg)?;
    Ok(sol.x.into_vec())
}

/// One-agent view of a game with every other agent held fixed.
struct FrozenOthers<'a, G: ?Sized> {
    game: &'a G,
    agent: usize,
    base: StrategyProfile,
}

impl<G: ScenarioGame + ?Sized> FrozenOthers<'_, G> {
    fn full(&self, local: &StrategyProfile) -> StrategyProfile {
        let mut x = self.base.clone();
        x.block_mut(self.agent).copy_from_slice(local.as_slice());
        x
    }
}

impl<G: ScenarioGame + ?Sized> ScenarioGame for FrozenOthers<'_, G> {
    type Scenario = G::Scenario;

    fn num_agents(&self) -> usize {
        1
    }

    fn dim(&self) -> usize {
        self.game.dim()
    }

    fn feasible_set(&self, _i: usize) -> &FeasibleSet {
        self.game.feasible_set(self.agent)
    }

    fn agent_cost(&self, _i: usize, x: &StrategyProfile) -> f64 {
        self.game.agent_cost(self.agent, &self.full(x))
    }

    fn agent_cost_grad(&self, _i: usize, x: &StrategyProfile, out: &mut [f64]) {
        self.game.agent_cost_grad(self.agent, &self.full(x), out)
    }

    fn uncertain_cost(&self, x: &StrategyProfile, scenario: &Self::Scenario) -> f64 {
        self.game.uncertain_cost(&self.full(x), scenario)
    }

    fn uncertain_cost_grad(&self, _i: usize, x: &StrategyProfile, scenario: &Self::Scenario, out: &mut [f64]) {
        self.game.uncertain_cost_grad(self.agent, &self.full(x), scenario, out)
    }

    fn weighted_uncertain_grad(
        &self,
        _i: usize,
        x: &StrategyProfile,
        scenarios: &[Self::Scenario],
        y: &[f64],
        out: &mut [f64],
    ) {
        self.game
            .weighted_uncertain_grad(self.agent, &self.full(x), scenarios, y, out)
    }

    fn curvature_bound(&self, _i: usize, x: &StrategyProfile, scenarios: &[Self::Scenario], y: &[f64]) -> f64 {
        self.game.curvature_bound(self.agent, &self.full(x), scenarios, y)
    }

    fn check_scenario(&self, scenario: &Self::Scenario) -> Result<()> {
        self.game.check_scenario(scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records(changes: &[f64]) -> Vec<TraceRecord> {
        changes
            .iter()
            .enumerate()
            .map(|(k, &change)| TraceRecord {
                k: k + 1,
                change,
                inner_iters: 1,
                eta: 1.0,
            })
            .collect()
    }

    #[test]
    fn tail_estimate_of_geometric_sequence() {
        let changes: Vec<f64> = (0..20).map(|k| 0.5f64.powi(k)).collect();
        let est = tail_estimate(&records(&changes)).unwrap();
        // Σ_{j≥1} c_k 2^{-j} = c_k.
        assert!((est - changes[19]).abs() <= 1e-12);
    }

    #[test]
    fn tail_estimate_needs_a_full_contracting_window() {
        assert_eq!(tail_estimate(&records(&[1.0; 5])), None);
        assert_eq!(tail_estimate(&records(&[1.0; 20])), None);
        assert_eq!(tail_estimate(&records(&[0.0; 20])), Some(0.0));
    }

    #[test]
    fn change_rule_ignores_the_tail() {
        let cfg = SolverConfig {
            stop: StopRule::Change,
            ..SolverConfig::default()
        };
        assert!(cfg.outer_converged(&records(&[1.0, 1e-6])));
        assert!(!SolverConfig::default().outer_converged(&records(&[1.0, 1e-6])));
        assert!(!cfg.outer_converged(&[]));
    }
}

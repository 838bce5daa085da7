//! Empirical violation rates against fresh scenario draws.
//!
//! Two estimators are provided. The cost estimator counts draws with
//! `g(x*, θ) > γ*`; it needs one evaluation per draw and upper-bounds the
//! equilibrium-change rate, since a draw that does not raise the worst case
//! leaves `x*` an equilibrium of the enlarged game. The equilibrium-change
//! estimator re-solves the game with the draw appended and compares.

use alloc::vec::Vec;

use rand::Rng;

use crate::certificate::Certificate;
use crate::error::Result;
use crate::game::{ScenarioGame, ScenarioSet, StrategyProfile};
use crate::num;
use crate::rng;
use crate::solver::{self, SolverConfig};

/// Source of i.i.d. scenarios.
pub trait ScenarioSampler<S> {
    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> S;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ViolationKind {
    CostViolation,
    NeChange,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ViolationEstimate {
    /// Draws that entered the rate.
    pub trials: usize,
    pub violations: usize,
    pub rate: f64,
    pub kind: ViolationKind,
    pub seed: u64,
    /// Draws whose re-solve failed; excluded from `trials`.
    pub failures: usize,
}

impl ViolationEstimate {
    fn from_counts(kind: ViolationKind, seed: u64, trials: usize, violations: usize, failures: usize) -> Self {
        Self {
            trials,
            violations,
            rate: if trials == 0 {
                0.0
            } else {
                violations as f64 / trials as f64
            },
            kind,
            seed,
            failures,
        }
    }

    /// Heuristic `1/√trials` width of the rate.
    pub fn heuristic_width(&self) -> f64 {
        if self.trials == 0 {
            1.0
        } else {
            1.0 / num::sqrt(self.trials as f64)
        }
    }
}

/// `trials` fresh draws from `sampler` seeded with `seed`.
pub fn draw_scenarios<S, P: ScenarioSampler<S>>(sampler: &mut P, trials: usize, seed: u64) -> Vec<S> {
    let mut rng = rng::seeded(seed);
    (0..trials).map(|_| sampler.draw(&mut rng)).collect()
}

/// `g(x*, θ)` for `trials` fresh draws.
pub fn fresh_uncertain_costs<G, P>(game: &G, x_star: &StrategyProfile, sampler: &mut P, trials: usize, seed: u64) -> Vec<f64>
where
    G: ScenarioGame + ?Sized,
    P: ScenarioSampler<G::Scenario>,
{
    let mut rng = rng::seeded(seed);
    (0..trials)
        .map(|_| {
            let theta = sampler.draw(&mut rng);
            game.uncertain_cost(x_star, &theta)
        })
        .collect()
}

/// Per-draw flags `g(x*, θ) > γ*`.
pub fn cost_violation_flags<G: ScenarioGame + ?Sized>(
    game: &G,
    x_star: &StrategyProfile,
    gamma_star: f64,
    draws: &[G::Scenario],
) -> Vec<bool> {
    draws.iter().map(|t| game.uncertain_cost(x_star, t) > gamma_star).collect()
}

/// Per-draw flags `‖Φ(S ∪ {θ}) − x*‖_∞ > δ_eq`; `None` where the re-solve failed.
pub fn ne_change_flags<G: ScenarioGame + ?Sized>(
    game: &G,
    scenarios: &ScenarioSet<G::Scenario>,
    x_star: &StrategyProfile,
    draws: &[G::Scenario],
    cfg: &SolverConfig,
    equality_tol: f64,
) -> Vec<Option<bool>>
where
    G::Scenario: Clone,
{
    draws
        .iter()
        .map(|theta| {
            let enlarged = scenarios.with_extra(theta.clone());
            solver::solve_ne(game, &enlarged, cfg)
                .ok()
                .map(|sol| sol.x.dist_inf(x_star) > equality_tol)
        })
        .collect()
}

/// Fraction of fresh draws whose uncertain cost exceeds the in-sample worst
/// case `γ*`.
pub fn empirical_violation_cost<G, P>(
    game: &G,
    x_star: &StrategyProfile,
    gamma_star: f64,
    sampler: &mut P,
    trials: usize,
    seed: u64,
) -> ViolationEstimate
where
    G: ScenarioGame + ?Sized,
    P: ScenarioSampler<G::Scenario>,
{
    let costs = fresh_uncertain_costs(game, x_star, sampler, trials, seed);
    let violations = costs.iter().filter(|&&c| c > gamma_star).count();
    ViolationEstimate::from_counts(ViolationKind::CostViolation, seed, trials, violations, 0)
}

/// Fraction of fresh draws that move the equilibrium by more than `δ_eq`.
#[allow(clippy::too_many_arguments)]
pub fn empirical_violation_ne<G, P>(
    game: &G,
    scenarios: &ScenarioSet<G::Scenario>,
    x_star: &StrategyProfile,
    sampler: &mut P,
    trials: usize,
    cfg: &SolverConfig,
    equality_tol: f64,
    seed: u64,
) -> Result<ViolationEstimate>
where
    G: ScenarioGame + ?Sized,
    G::Scenario: Clone,
    P: ScenarioSampler<G::Scenario>,
{
    cfg.validate()?;
    let draws = draw_scenarios(sampler, trials, seed);
    let flags = ne_change_flags(game, scenarios, x_star, &draws, cfg, equality_tol);
    let failures = flags.iter().filter(|f| f.is_none()).count();
    let violations = flags.iter().filter(|f| **f == Some(true)).count();
    Ok(ViolationEstimate::from_counts(
        ViolationKind::NeChange,
        seed,
        trials - failures,
        violations,
        failures,
    ))
}

/// Whether the observed rate respects the certificate's `ε`.
pub fn certificate_conformance(estimate: &ViolationEstimate, cert: &Certificate) -> bool {
    estimate.rate <= cert.epsilon
}

//! The two regularised best responses of the augmented game: an agent's
//! proximal minimisation over its feasible set and the coordinator's
//! proximal maximisation over the simplex.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::game::{ScenarioGame, SimplexWeights, StrategyProfile};
use crate::num;
use crate::projection;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SubproblemOptions {
    /// Exit when the projected-gradient residual `L ‖ν⁺ − ν‖` drops to this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SubproblemOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100_000,
        }
    }
}

/// Minimises over `ν ∈ X_i`
///
/// ```text
/// f_i(ν, x_{-i}) + ĝ(ν, x_{-i}, y) + (η/2)‖(ν, x_{-i}, y)‖² + (τ/2)‖ν − x̄_i‖²
/// ```
///
/// by projected gradient with constant Nesterov momentum and fixed step
/// `1/L`. The objective is `(η + τ)`-strongly convex whenever `f_i + g` is
/// convex in `x_i`. Block `i` of `x` is the warm start and is returned as is
/// when it already meets the tolerance.
#[allow(clippy::too_many_arguments)]
pub fn solve_agent_subproblem<G: ScenarioGame + ?Sized>(
    game: &G,
    i: usize,
    centre: &[f64],
    x: &StrategyProfile,
    scenarios: &[G::Scenario],
    y: &[f64],
    eta: f64,
    tau: f64,
    opts: &SubproblemOptions,
) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(Error::invalid("tau", "must be positive"));
    }
    if !(eta >= 0.0) {
        return Err(Error::invalid("eta", "must be nonnegative"));
    }
    let n = game.dim();
    Error::check_len("proximal centre", n, centre.len())?;
    Error::check_len("simplex weights", scenarios.len(), y.len())?;
    let fs = game.feasible_set(i);

    let lipschitz = game.curvature_bound(i, x, scenarios, y) + eta + tau;
    let strong = eta + tau;
    let momentum = {
        let (a, b) = (num::sqrt(lipschitz), num::sqrt(strong));
        ((a - b) / (a + b)).max(0.0)
    };

    let mut work = x.clone();
    let mut cur = x.block(i).to_vec();
    if !fs.contains(&cur, 1e-10) {
        cur = projection::project_box_budget(&cur, fs)?;
    }
    let mut prev = cur.clone();
    let mut w = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut step = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;

    for k in 0..opts.max_iter {
        for j in 0..n {
            w[j] = cur[j] + momentum * (cur[j] - prev[j]);
        }
        work.block_mut(i).copy_from_slice(&w);
        game.agent_cost_grad(i, &work, &mut grad);
        game.weighted_uncertain_grad(i, &work, scenarios, y, &mut tmp);
        for j in 0..n {
            grad[j] += tmp[j] + eta * w[j] + tau * (w[j] - centre[j]);
            step[j] = w[j] - grad[j] / lipschitz;
        }
        projection::project_box_budget_into(&step, fs, &mut next)?;
        residual = lipschitz * num::dist(&next, &w);
        if residual <= opts.tol {
            return Ok(if k == 0 { cur } else { next });
        }
        core::mem::swap(&mut prev, &mut cur);
        cur.copy_from_slice(&next);
    }
    Err(Error::NoConvergence {
        stage: "agent subproblem",
        iterations: opts.max_iter,
        residual,
    })
}

/// Maximises `ĝ(x, ν) − (η/2)‖(x, ν)‖² − (τ/2)‖ν − ȳ‖²` over the simplex.
///
/// `ĝ` is linear in `ν`, so the maximiser is the simplex projection of
/// `(c + τ ȳ) / (η + τ)` with `c_m = g(x, θ_m)`.
pub fn solve_coordinator_subproblem<G: ScenarioGame + ?Sized>(
    game: &G,
    x: &StrategyProfile,
    centre: &[f64],
    eta: f64,
    tau: f64,
    scenarios: &[G::Scenario],
) -> Result<SimplexWeights> {
    if !(eta + tau > 0.0) {
        return Err(Error::invalid("eta + tau", "must be positive"));
    }
    Error::check_len("coordinator centre", scenarios.len(), centre.len())?;
    if scenarios.is_empty() {
        return Err(Error::EmptyScenarioSet);
    }
    let scale = 1.0 / (eta + tau);
    let v: Vec<f64> = scenarios
        .iter()
        .zip(centre)
        .map(|(s, c)| (game.uncertain_cost(x, s) + tau * c) * scale)
        .collect();
    projection::project_simplex(&v)
}

//! Compression sets: subsets of the scenarios that reproduce the same
//! equilibrium.
//!
//! Two extraction routes are offered. [`support_from_weights`] reads the
//! support of the coordinator weights `y*` (scenarios with `y*_m > 0` are the
//! active worst cases), which costs nothing beyond the solve.
//! [`greedy_compression`] drops scenarios one at a time and keeps a removal
//! only if re-solving leaves `x*` unchanged; it costs up to `M` solves.
//! Equality of equilibria is judged in the sup norm against `δ_eq`.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::game::{ScenarioGame, ScenarioSet, StrategyProfile};
use crate::num;
use crate::solver::{self, NeSolution, SolverConfig};

/// Default weight threshold for support membership.
pub const DEFAULT_SUPPORT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CompressionMethod {
    SupportInspection,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Verification {
    Verified,
    Unverified,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CompressionReport {
    /// Zero-based scenario indices, ascending.
    pub indices: Vec<usize>,
    /// `d* = |indices|`.
    pub cardinality: usize,
    pub method: CompressionMethod,
    pub verification: Verification,
    pub equality_tol: f64,
    /// Scenarios examined before the report was produced.
    pub examined: usize,
}

impl CompressionReport {
    fn new(mut indices: Vec<usize>, method: CompressionMethod, equality_tol: f64, examined: usize) -> Self {
        indices.sort_unstable();
        Self {
            cardinality: indices.len(),
            indices,
            method,
            verification: Verification::Unverified,
            equality_tol,
            examined,
        }
    }
}

/// `δ_eq = max(1e-6, 10 γ_out √(nN))`.
pub fn default_equality_tolerance(cfg: &SolverConfig, dim: usize, num_agents: usize) -> f64 {
    (10.0 * cfg.gamma_out * num::sqrt((dim * num_agents) as f64)).max(1e-6)
}

/// Indices `{m : y*_m > tol}`.
pub fn support_from_weights(y: &[f64], tol: f64) -> Result<Vec<usize>> {
    let support: Vec<usize> = y
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > tol)
        .map(|(m, _)| m)
        .collect();
    if support.is_empty() {
        return Err(Error::DegenerateWeights);
    }
    Ok(support)
}

/// Whether `Φ(C) = x*` within `δ_eq` in the sup norm.
pub fn verify_compression<G: ScenarioGame + ?Sized>(
    game: &G,
    scenarios: &ScenarioSet<G::Scenario>,
    indices: &[usize],
    x_star: &StrategyProfile,
    cfg: &SolverConfig,
    equality_tol: f64,
) -> Result<bool>
where
    G::Scenario: Clone,
{
    let subset = scenarios.subset(indices)?;
    let sol = solver::solve_ne(game, &subset, cfg)?;
    Ok(sol.x.dist_inf(x_star) <= equality_tol)
}

/// Support-inspection compression set, verified by one re-solve on the subset.
pub fn support_compression<G: ScenarioGame + ?Sized>(
    game: &G,
    scenarios: &ScenarioSet<G::Scenario>,
    solution: &NeSolution,
    cfg: &SolverConfig,
    support_tol: f64,
    equality_tol: f64,
) -> Result<CompressionReport>
where
    G::Scenario: Clone,
{
    let indices = support_from_weights(solution.y.as_slice(), support_tol)?;
    let mut report = CompressionReport::new(
        indices,
        CompressionMethod::SupportInspection,
        equality_tol,
        scenarios.len(),
    );
    report.verification = if verify_compression(game, scenarios, &report.indices, &solution.x, cfg, equality_tol)? {
        Verification::Verified
    } else {
        Verification::Failed
    };
    Ok(report)
}

/// Greedy elimination. Scenarios are visited in ascending order of their
/// weight in `solution.y` (ties by index); a scenario is dropped when the
/// equilibrium of the remaining ones matches `solution.x` within
/// `equality_tol`. The last remaining scenario is never dropped.
pub fn greedy_compression<G: ScenarioGame + ?Sized>(
    game: &G,
    scenarios: &ScenarioSet<G::Scenario>,
    solution: &NeSolution,
    cfg: &SolverConfig,
    equality_tol: f64,
) -> Result<CompressionReport>
where
    G::Scenario: Clone,
{
    let m = scenarios.len();
    Error::check_len("simplex weights", m, solution.y.len())?;
    let weights = solution.y.as_slice();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| weights[a].total_cmp(&weights[b]).then(a.cmp(&b)));

    let mut keep = alloc::vec![true; m];
    let mut kept = m;
    for (step, &candidate) in order.iter().enumerate() {
        if kept == 1 {
            break;
        }
        keep[candidate] = false;
        let trial: Vec<usize> = (0..m).filter(|&j| keep[j]).collect();
        match verify_compression(game, scenarios, &trial, &solution.x, cfg, equality_tol) {
            Ok(true) => kept -= 1,
            Ok(false) => keep[candidate] = true,
            Err(e) => {
                keep[candidate] = true;
                let indices = (0..m).filter(|&j| keep[j]).collect();
                let partial = CompressionReport::new(indices, CompressionMethod::Greedy, equality_tol, step);
                return Err(Error::CompressionAborted {
                    partial: Box::new(partial),
                    source: Box::new(e),
                });
            }
        }
    }
    let indices = (0..m).filter(|&j| keep[j]).collect();
    let mut report = CompressionReport::new(indices, CompressionMethod::Greedy, equality_tol, m);
    // Every accepted removal was checked against x*, and C = S needs no check.
    report.verification = Verification::Verified;
    Ok(report)
}

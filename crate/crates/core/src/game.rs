//! Scenario games, their augmented min-max form and assumption probes.
//!
//! A game is described by [`ScenarioGame`]: per-agent deterministic costs
//! `f_i`, a shared uncertain cost `g(x, θ)` and per-agent feasible sets. Each
//! agent minimises `f_i(x) + max_m g(x, θ_m)`. The maximum over scenarios is
//! rewritten as a maximum over simplex weights `y`, which turns the game into
//! an `N + 1` player game whose pseudo-gradient is [`pseudo_gradient`].

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::ev::FeasibleSet;
use crate::num;
use crate::projection;
use crate::rng;

/// Simplex membership tolerances: entries may dip below zero by this much...
pub const SIMPLEX_NEG_TOL: f64 = 1e-12;
/// ...and the entries must sum to one within this much.
pub const SIMPLEX_SUM_TOL: f64 = 1e-9;

/// Stacked agent decisions `x = (x_1, ..., x_N)`, each block of length `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile {
    dim: usize,
    data: Vec<f64>,
}

impl StrategyProfile {
    pub fn zeros(num_agents: usize, dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; num_agents * dim],
        }
    }

    pub fn from_vec(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                what: "strategy profile",
                expected: (data.len() / dim + 1) * dim,
                found: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn from_blocks(blocks: &[Vec<f64>]) -> Result<Self> {
        let dim = blocks.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(dim * blocks.len());
        for b in blocks {
            Error::check_len("strategy block", dim, b.len())?;
            data.extend_from_slice(b);
        }
        Self::from_vec(dim, data)
    }

    pub fn num_agents(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim)
    }

    /// Aggregate strategy `σ(x) = Σ_i x_i`.
    pub fn aggregate(&self) -> Vec<f64> {
        let mut sigma = vec![0.0; self.dim];
        for b in self.blocks() {
            for (s, v) in sigma.iter_mut().zip(b) {
                *s += v;
            }
        }
        sigma
    }

    /// Whether every block lies in its feasible set up to `tol`.
    pub fn is_feasible(&self, sets: &[FeasibleSet], tol: f64) -> bool {
        sets.len() == self.num_agents() && self.blocks().zip(sets).all(|(b, fs)| fs.contains(b, tol))
    }

    pub fn dist_inf(&self, other: &Self) -> f64 {
        num::dist_inf(&self.data, &other.data)
    }
}

/// Coordinator weights on the probability simplex in `R^M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("weights", "simplex weights must be nonempty"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < -SIMPLEX_NEG_TOL) {
            return Err(Error::invalid("weights", "entries must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(Error::invalid("weights", "entries must sum to one"));
        }
        Ok(Self(weights))
    }

    pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
        debug_assert!(Self::new(weights.clone()).is_ok());
        Self(weights)
    }

    pub fn uniform(len: usize) -> Self {
        assert!(len > 0, "uniform weights need at least one entry");
        Self(vec![1.0 / len as f64; len])
    }

    pub fn basis(len: usize, k: usize) -> Self {
        assert!(k < len, "basis index out of range");
        let mut w = vec![0.0; len];
        w[k] = 1.0;
        Self(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// The `M`-multisample `(θ_1, ..., θ_M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet<S>(Vec<S>);

impl<S> ScenarioSet<S> {
    pub fn new(scenarios: Vec<S>) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(Error::EmptyScenarioSet);
        }
        Ok(Self(scenarios))
    }

    pub fn as_slice(&self) -> &[S] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, S> {
        self.0.iter()
    }

    pub fn into_vec(self) -> Vec<S> {
        self.0
    }
}

impl<S: Clone> ScenarioSet<S> {
    /// Scenarios at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&m| m >= self.0.len()) {
            return Err(Error::DimensionMismatch {
                what: "scenario index",
                expected: self.0.len(),
                found: bad,
            });
        }
        Self::new(indices.iter().map(|&m| self.0[m].clone()).collect())
    }

    /// The enlarged sample `S ∪ {θ}`, with `θ` appended last.
    pub fn with_extra(&self, scenario: S) -> Self {
        let mut v = self.0.clone();
        v.push(scenario);
        Self(v)
    }
}

/// A point `z = (x, y)` of the augmented game.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPoint {
    pub x: StrategyProfile,
    pub y: SimplexWeights,
}

impl AugmentedPoint {
    pub fn new(x: StrategyProfile, y: SimplexWeights) -> Self {
        Self { x, y }
    }

    /// `(x, y)` as one vector of length `nN + M`.
    pub fn stacked(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.x.as_slice().len() + self.y.len());
        v.extend_from_slice(self.x.as_slice());
        v.extend_from_slice(self.y.as_slice());
        v
    }

    /// Euclidean distance between stacked points.
    pub fn distance(&self, other: &Self) -> f64 {
        let dx = num::dist(self.x.as_slice(), other.x.as_slice());
        let dy = num::dist(self.y.as_slice(), other.y.as_slice());
        num::sqrt(dx * dx + dy * dy)
    }
}

/// Evaluators of a scenario game.
///
/// Gradients are analytic. Implementations must be pure: the solver calls
/// them with trial profiles and relies on identical inputs giving identical
/// outputs.
pub trait ScenarioGame {
    /// Payload of one uncertainty realisation `θ`.
    type Scenario;

    fn num_agents(&self) -> usize;

    /// Per-agent decision dimension `n`.
    fn dim(&self) -> usize;

    fn feasible_set(&self, i: usize) -> &FeasibleSet;

    /// Deterministic cost `f_i(x)`.
    fn agent_cost(&self, i: usize, x: &StrategyProfile) -> f64;

    /// `∇_{x_i} f_i(x)` written into `out` (length `n`).
    fn agent_cost_grad(&self, i: usize, x: &StrategyProfile, out: &mut [f64]);

    /// Shared uncertain cost `g(x, θ)`.
    fn uncertain_cost(&self, x: &StrategyProfile, scenario: &Self::Scenario) -> f64;

    /// `∇_{x_i} g(x, θ)` written into `out` (length `n`).
    fn uncertain_cost_grad(
        &self,
        i: usize,
        x: &StrategyProfile,
        scenario: &Self::Scenario,
        out: &mut [f64],
    );

    /// `∇_{x_i} ĝ(x, y) = Σ_m y_m ∇_{x_i} g(x, θ_m)` written into `out`.
    fn weighted_uncertain_grad(
        &self,
        i: usize,
        x: &StrategyProfile,
        scenarios: &[Self::Scenario],
        y: &[f64],
        out: &mut [f64],
    ) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut tmp = vec![0.0; out.len()];
        for (s, &w) in scenarios.iter().zip(y) {
            if w == 0.0 {
                continue;
            }
            self.uncertain_cost_grad(i, x, s, &mut tmp);
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o += w * t;
            }
        }
    }

    /// Upper bound on the spectral norm of the Hessian of
    /// `ν_i ↦ f_i(ν_i, x_{-i}) + ĝ(ν_i, x_{-i}, y)` over `X_i`.
    fn curvature_bound(
        &self,
        i: usize,
        x: &StrategyProfile,
        scenarios: &[Self::Scenario],
        y: &[f64],
    ) -> f64;

    /// Monotonicity constants `(χ^f, χ^g)` when known in closed form.
    fn monotonicity_constants(&self) -> Option<(f64, f64)> {
        None
    }

    /// Dimension check for a scenario payload.
    fn check_scenario(&self, _scenario: &Self::Scenario) -> Result<()> {
        Ok(())
    }
}

pub(crate) fn check_profile<G: ScenarioGame + ?Sized>(game: &G, x: &StrategyProfile) -> Result<()> {
    Error::check_len("per-agent dimension", game.dim(), x.dim())?;
    Error::check_len("agent count", game.num_agents(), x.num_agents())
}

pub(crate) fn check_scenarios<G: ScenarioGame + ?Sized>(
    game: &G,
    scenarios: &ScenarioSet<G::Scenario>,
) -> Result<()> {
    if scenarios.is_empty() {
        return Err(Error::EmptyScenarioSet);
    }
    scenarios.iter().try_for_each(|s| game.check_scenario(s))
}

/// `g(x, θ_m)` for every scenario.
pub fn uncertain_costs<G: ScenarioGame + ?Sized>(
    game: &G,
    x: &StrategyProfile,
    scenarios: &[G::Scenario],
) -> Vec<f64> {
    scenarios.iter().map(|s| game.uncertain_cost(x, s)).collect()
}

/// Worst-case uncertain cost `γ = max_m g(x, θ_m)` and the first maximising index.
pub fn max_uncertain_cost<G: ScenarioGame + ?Sized>(
    game: &G,
    x: &StrategyProfile,
    scenarios: &ScenarioSet<G::Scenario>,
) -> Result<(f64, usize)> {
    check_profile(game, x)?;
    check_scenarios(game, scenarios)?;
    let mut best = (f64::NEG_INFINITY, 0);
    for (m, s) in scenarios.iter().enumerate() {
        let v = game.uncertain_cost(x, s);
        if v > best.0 {
            best = (v, m);
        }
    }
    Ok(best)
}

/// Agent cost `J_i(x) = f_i(x) + max_m g(x, θ_m)`.
pub fn eval_agent_cost<G: ScenarioGame + ?Sized>(
    game: &G,
    i: usize,
    x: &StrategyProfile,
    scenarios: &ScenarioSet<G::Scenario>,
) -> Result<f64> {
    if i >= game.num_agents() {
        return Err(Error::DimensionMismatch {
            what: "agent index",
            expected: game.num_agents(),
            found: i,
        });
    }
    let (gamma, _) = max_uncertain_cost(game, x, scenarios)?;
    Ok(game.agent_cost(i, x) + gamma)
}

/// `ĝ(x, y) = Σ_m y_m g(x, θ_m)`.
pub fn eval_ghat<G: ScenarioGame + ?Sized>(
    game: &G,
    x: &StrategyProfile,
    y: &[f64],
    scenarios: &ScenarioSet<G::Scenario>,
) -> Result<f64> {
    check_profile(game, x)?;
    check_scenarios(game, scenarios)?;
    Error::check_len("simplex weights", scenarios.len(), y.len())?;
    Ok(scenarios
        .iter()
        .zip(y)
        .map(|(s, w)| w * game.uncertain_cost(x, s))
        .sum())
}

fn check_point<G: ScenarioGame + ?Sized>(
    game: &G,
    z: &AugmentedPoint,
    scenarios: &ScenarioSet<G::Scenario>,
) -> Result<()> {
    check_profile(game, &z.x)?;
    check_scenarios(game, scenarios)?;
    Error::check_len("simplex weights", scenarios.len(), z.y.len())
}

/// Pseudo-gradient `F(x, y)` of the augmented game: the stacked
/// `∇_{x_i} f_i + ∇_{x_i} ĝ` followed by `-(g(x, θ_m))_m`.
pub fn pseudo_gradient<G: ScenarioGame + ?Sized>(
    game: &G,
    z: &AugmentedPoint,
    scenarios: &ScenarioSet<G::Scenario>,
) -> Result<Vec<f64>> {
    check_point(game, z, scenarios)?;
    Ok(pseudo_gradient_unchecked(game, z, scenarios.as_slice()))
}

pub(crate) fn pseudo_gradient_unchecked<G: ScenarioGame + ?Sized>(
    game: &G,
    z: &AugmentedPoint,
    scenarios: &[G::Scenario],
) -> Vec<f64> {
    let n = game.dim();
    let nn = n * game.num_agents();
    let mut out = vec![0.0; nn + scenarios.len()];
    let mut tmp = vec![0.0; n];
    for i in 0..game.num_agents() {
        let block = &mut out[i * n..(i + 1) * n];
        game.agent_cost_grad(i, &z.x, block);
        game.weighted_uncertain_grad(i, &z.x, scenarios, z.y.as_slice(), &mut tmp);
        for (b, t) in block.iter_mut().zip(&tmp) {
            *b += t;
        }
    }
    for (o, s) in out[nn..].iter_mut().zip(scenarios) {
        *o = -game.uncertain_cost(&z.x, s);
    }
    out
}

/// `F(z) + η z + τ (z − z̄)`, the operator of the regularised game.
pub fn regularized_pseudo_gradient<G: ScenarioGame + ?Sized>(
    game: &G,
    z: &AugmentedPoint,
    scenarios: &ScenarioSet<G::Scenario>,
    eta: f64,
    tau: f64,
    centre: &AugmentedPoint,
) -> Result<Vec<f64>> {
    check_point(game, centre, scenarios)?;
    let mut f = pseudo_gradient(game, z, scenarios)?;
    let zs = z.stacked();
    for ((f, zv), cv) in f.iter_mut().zip(&zs).zip(centre.stacked()) {
        *f += eta * zv + tau * (zv - cv);
    }
    Ok(f)
}

/// Draws a feasible strategy profile and simplex weights at random.
pub fn random_augmented_point<G: ScenarioGame + ?Sized, R: Rng + ?Sized>(
    game: &G,
    num_scenarios: usize,
    rng: &mut R,
) -> AugmentedPoint {
    let n = game.dim();
    let mut x = StrategyProfile::zeros(game.num_agents(), n);
    for i in 0..game.num_agents() {
        let fs = game.feasible_set(i);
        let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * fs.cap).collect();
        let p = projection::project_box_budget(&v, fs).expect("feasible set was validated");
        x.block_mut(i).copy_from_slice(&p);
    }
    // Normalised exponentials are uniform on the simplex.
    let mut w: Vec<f64> = (0..num_scenarios)
        .map(|_| -num::log(1.0 - rng.random::<f64>()))
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    AugmentedPoint::new(x, SimplexWeights::from_raw(w))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MonotonicityReport {
    pub trials: usize,
    /// Smallest `(u − v)ᵀ(F(u) − F(v))` observed.
    pub min_inner_product: f64,
    pub passed: bool,
}

/// Samples pairs of feasible augmented points and checks the pseudo-gradient
/// for monotonicity. A trial fails when the inner product drops below
/// `-1e-8 (1 + ‖u − v‖²)`.
pub fn monotonicity_probe<G: ScenarioGame + ?Sized>(
    game: &G,
    scenarios: &ScenarioSet<G::Scenario>,
    trials: usize,
    seed: u64,
) -> Result<MonotonicityReport> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    check_scenarios(game, scenarios)?;
    let mut rng = rng::seeded(seed);
    let mut min_ip = f64::INFINITY;
    let mut passed = true;
    for _ in 0..trials {
        let u = random_augmented_point(game, scenarios.len(), &mut rng);
        let v = random_augmented_point(game, scenarios.len(), &mut rng);
        let ip = operator_inner_product(&u, &v, |z| pseudo_gradient_unchecked(game, z, scenarios.as_slice()));
        let d = u.distance(&v);
        if ip < -1e-8 * (1.0 + d * d) {
            passed = false;
        }
        min_ip = min_ip.min(ip);
    }
    Ok(MonotonicityReport {
        trials,
        min_inner_product: min_ip,
        passed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StrongMonotonicityReport {
    pub trials: usize,
    /// Smallest `(u − v)ᵀ(F^τ(u) − F^τ(v)) / ‖u − v‖²` observed.
    pub min_modulus: f64,
    /// Smallest `(u − v)ᵀ(F^τ(u) − F^τ(v)) − τ‖u − v‖²` observed.
    pub min_slack: f64,
    pub passed: bool,
}

/// Checks strong monotonicity of the regularised operator
/// `F(z) + η z + τ (z − z̄)` with modulus `τ`, on random feasible pairs and a
/// random centre `z̄`.
pub fn strong_monotonicity_probe<G: ScenarioGame + ?Sized>(
    game: &G,
    scenarios: &ScenarioSet<G::Scenario>,
    eta: f64,
    tau: f64,
    trials: usize,
    seed: u64,
) -> Result<StrongMonotonicityReport> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    if !(tau > 0.0) || eta < 0.0 {
        return Err(Error::invalid("tau", "need tau > 0 and eta >= 0"));
    }
    check_scenarios(game, scenarios)?;
    let mut rng = rng::seeded(seed);
    let centre = random_augmented_point(game, scenarios.len(), &mut rng).stacked();
    let mut min_modulus = f64::INFINITY;
    let mut min_slack = f64::INFINITY;
    for _ in 0..trials {
        let u = random_augmented_point(game, scenarios.len(), &mut rng);
        let v = random_augmented_point(game, scenarios.len(), &mut rng);
        let ip = operator_inner_product(&u, &v, |z| {
            let mut f = pseudo_gradient_unchecked(game, z, scenarios.as_slice());
            for ((f, zv), cv) in f.iter_mut().zip(z.stacked()).zip(&centre) {
                *f += eta * zv + tau * (zv - cv);
            }
            f
        });
        let d = u.distance(&v);
        if d > 0.0 {
            min_modulus = min_modulus.min(ip / (d * d));
        }
        min_slack = min_slack.min(ip - tau * d * d);
    }
    Ok(StrongMonotonicityReport {
        trials,
        min_modulus,
        min_slack,
        passed: min_slack >= -1e-8,
    })
}

fn operator_inner_product(
    u: &AugmentedPoint,
    v: &AugmentedPoint,
    op: impl Fn(&AugmentedPoint) -> Vec<f64>,
) -> f64 {
    let fu = op(u);
    let fv = op(v);
    u.stacked()
        .iter()
        .zip(v.stacked())
        .zip(fu.iter().zip(&fv))
        .map(|((a, b), (fa, fb))| (a - b) * (fa - fb))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_weights_reject_bad_input() {
        assert!(SimplexWeights::new(vec![]).is_err());
        assert!(SimplexWeights::new(vec![0.5, 0.4]).is_err());
        assert!(SimplexWeights::new(vec![1.1, -0.1]).is_err());
        assert!(SimplexWeights::new(vec![1.0 + 1e-10, -1e-13]).is_ok());
    }

    #[test]
    fn profile_blocks_and_aggregate() {
        let x = StrategyProfile::from_blocks(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(x.num_agents(), 2);
        assert_eq!(x.block(1), &[3.0, 4.0]);
        assert_eq!(x.aggregate(), vec![4.0, 6.0]);
        assert!(StrategyProfile::from_vec(2, vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn scenario_set_must_be_nonempty() {
        assert!(matches!(ScenarioSet::<u8>::new(vec![]), Err(Error::EmptyScenarioSet)));
        let s = ScenarioSet::new(vec![1u8, 2, 3]).unwrap();
        assert_eq!(s.subset(&[2, 0]).unwrap().as_slice(), &[3, 1]);
        assert!(s.subset(&[3]).is_err());
        assert!(s.subset(&[]).is_err());
        assert_eq!(s.with_extra(9).len(), 4);
    }
}

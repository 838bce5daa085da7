//! Electric-vehicle charging game.
//!
//! Each of `N` vehicles picks a charging profile `x_i ∈ R^n` over `n` hourly
//! slots. Prices are affine in the aggregate demand `σ = Σ_i x_i`:
//!
//! ```text
//! f_i(x)    = x_iᵀ (A_0 σ + b_0)
//! g(x, θ_m) = σᵀ (A_m σ + b_m) / N
//! ```
//!
//! with diagonal `A_m` stored as vectors. The feasible set of vehicle `i` is
//! `{x : 1ᵀx ≥ E_i, 0 ≤ x ≤ P_i}`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Uniform};

use crate::error::{Error, Result};
use crate::game::{ScenarioGame, ScenarioSet, StrategyProfile};
use crate::num;
use crate::rng;
use crate::validation::ScenarioSampler;

/// Synthetic winter-weekday price slope over 24 hourly slots, £/kW².
/// Low overnight, a morning shoulder and an evening peak.
pub const NOMINAL_PRICE_PROFILE_24H: [f64; 24] = [
    0.040, 0.035, 0.032, 0.030, 0.030, 0.033, 0.045, 0.070, 0.090, 0.088, 0.080, 0.075, //
    0.072, 0.070, 0.070, 0.078, 0.095, 0.115, 0.120, 0.110, 0.092, 0.075, 0.060, 0.048,
];

/// Default charger power range, kW.
pub const DEFAULT_POWER_RANGE: (f64, f64) = (6.0, 15.0);
/// Default upper bound on requested energy per 12 slots, kWh.
pub const DEFAULT_ENERGY_PER_12_SLOTS: f64 = 35.0;

/// Nominal price slopes for `n` slots: the 24-hour profile itself when
/// `n = 24`, otherwise the periodic profile linearly interpolated at the
/// midpoints of `n` equal slots spanning the day.
pub fn nominal_price_profile(n: usize) -> Vec<f64> {
    if n == 24 {
        return NOMINAL_PRICE_PROFILE_24H.to_vec();
    }
    (0..n)
        .map(|j| {
            let t = (j as f64 + 0.5) * 24.0 / n as f64 - 0.5;
            let t = if t < 0.0 { t + 24.0 } else { t };
            let lo = libm::floor(t) as usize % 24;
            let hi = (lo + 1) % 24;
            let w = t - libm::floor(t);
            (1.0 - w) * NOMINAL_PRICE_PROFILE_24H[lo] + w * NOMINAL_PRICE_PROFILE_24H[hi]
        })
        .collect()
}

/// `X_i = {x ∈ R^n : 1ᵀx ≥ E, 0 ≤ x_j ≤ P}`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeasibleSet {
    /// Requested energy `E`, kWh.
    pub budget: f64,
    /// Charger power cap `P`, kW.
    pub cap: f64,
    /// Number of slots `n`.
    pub dim: usize,
}

impl FeasibleSet {
    pub fn new(budget: f64, cap: f64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        if !(cap > 0.0) || !cap.is_finite() {
            return Err(Error::invalid("P", "charger cap must be positive"));
        }
        if !(budget >= 0.0) {
            return Err(Error::invalid("E", "energy demand must be nonnegative"));
        }
        if budget > dim as f64 * cap {
            return Err(Error::InfeasibleSet {
                budget,
                capacity: dim as f64 * cap,
            });
        }
        Ok(Self { budget, cap, dim })
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim
            && x.iter().all(|&v| v >= -tol && v <= self.cap + tol)
            && x.iter().sum::<f64>() >= self.budget - tol
    }
}

/// One price scenario: diagonal slopes `a` and offsets `b`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvScenario {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl EvScenario {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        Error::check_len("scenario offsets", a.len(), b.len())?;
        if a.is_empty() {
            return Err(Error::invalid("a", "scenario must have at least one slot"));
        }
        if a.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("a", "price slopes must be strictly positive"));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("b", "price offsets must be finite"));
        }
        Ok(Self { a, b })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }
}

/// The EV charging game `G` without its scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct EvGame {
    a0: Vec<f64>,
    b0: Vec<f64>,
    agents: Vec<FeasibleSet>,
}

impl EvGame {
    pub fn new(a0: Vec<f64>, b0: Vec<f64>, agents: Vec<FeasibleSet>) -> Result<Self> {
        let n = a0.len();
        if n == 0 {
            return Err(Error::invalid("a0", "need at least one slot"));
        }
        Error::check_len("b0", n, b0.len())?;
        if a0.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("a0", "nominal price slopes must be strictly positive"));
        }
        if agents.is_empty() {
            return Err(Error::invalid("agents", "need at least one agent"));
        }
        for fs in &agents {
            Error::check_len("feasible set dimension", n, fs.dim)?;
        }
        Ok(Self { a0, b0, agents })
    }

    /// Game with the nominal price profile and `b_0 = 0`.
    pub fn with_nominal_prices(agents: Vec<FeasibleSet>) -> Result<Self> {
        let n = agents.first().map_or(0, |fs| fs.dim);
        Self::new(nominal_price_profile(n), vec![0.0; n], agents)
    }

    pub fn a0(&self) -> &[f64] {
        &self.a0
    }

    pub fn b0(&self) -> &[f64] {
        &self.b0
    }

    pub fn agents(&self) -> &[FeasibleSet] {
        &self.agents
    }

    /// Checks the scenario-set invariants: matching dimensions and strictly
    /// positive slopes.
    pub fn validate_scenarios(&self, scenarios: &ScenarioSet<EvScenario>) -> Result<()> {
        for s in scenarios.iter() {
            self.check_scenario(s)?;
            EvScenario::new(s.a.clone(), s.b.clone())?;
        }
        Ok(())
    }

    fn inv_n(&self) -> f64 {
        1.0 / self.agents.len() as f64
    }
}

impl ScenarioGame for EvGame {
    type Scenario = EvScenario;

    fn num_agents(&self) -> usize {
        self.agents.len()
    }

    fn dim(&self) -> usize {
        self.a0.len()
    }

    fn feasible_set(&self, i: usize) -> &FeasibleSet {
        &self.agents[i]
    }

    fn agent_cost(&self, i: usize, x: &StrategyProfile) -> f64 {
        let sigma = x.aggregate();
        x.block(i)
            .iter()
            .zip(&sigma)
            .zip(self.a0.iter().zip(&self.b0))
            .map(|((xi, s), (a, b))| xi * (a * s + b))
            .sum()
    }

    fn agent_cost_grad(&self, i: usize, x: &StrategyProfile, out: &mut [f64]) {
        let sigma = x.aggregate();
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.a0[j] * (sigma[j] + x.block(i)[j]) + self.b0[j];
        }
    }

    fn uncertain_cost(&self, x: &StrategyProfile, scenario: &EvScenario) -> f64 {
        let sigma = x.aggregate();
        self.inv_n()
            * sigma
                .iter()
                .zip(scenario.a.iter().zip(&scenario.b))
                .map(|(s, (a, b))| s * (a * s + b))
                .sum::<f64>()
    }

    fn uncertain_cost_grad(&self, _i: usize, x: &StrategyProfile, scenario: &EvScenario, out: &mut [f64]) {
        let sigma = x.aggregate();
        let inv_n = self.inv_n();
        for (j, o) in out.iter_mut().enumerate() {
            *o = inv_n * (2.0 * scenario.a[j] * sigma[j] + scenario.b[j]);
        }
    }

    fn weighted_uncertain_grad(
        &self,
        _i: usize,
        x: &StrategyProfile,
        scenarios: &[EvScenario],
        y: &[f64],
        out: &mut [f64],
    ) {
        let sigma = x.aggregate();
        let inv_n = self.inv_n();
        out.iter_mut().for_each(|o| *o = 0.0);
        for (s, &w) in scenarios.iter().zip(y) {
            if w == 0.0 {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                *o += w * inv_n * (2.0 * s.a[j] * sigma[j] + s.b[j]);
            }
        }
    }

    fn curvature_bound(&self, _i: usize, _x: &StrategyProfile, scenarios: &[EvScenario], y: &[f64]) -> f64 {
        let inv_n = self.inv_n();
        let mut diag: Vec<f64> = self.a0.iter().map(|a| 2.0 * a).collect();
        for (s, &w) in scenarios.iter().zip(y) {
            if w == 0.0 {
                continue;
            }
            for (d, a) in diag.iter_mut().zip(&s.a) {
                *d += 2.0 * inv_n * w * a;
            }
        }
        diag.iter().map(|d| d.abs()).fold(0.0, f64::max)
    }

    fn monotonicity_constants(&self) -> Option<(f64, f64)> {
        // Jacobian of (∇_{x_i} f_i)_i is A_0 ⊗ (I + 11ᵀ); that of ∇_x g is
        // (2/N) A ⊗ 11ᵀ, positive semidefinite for positive slopes.
        let chi_f = self.a0.iter().copied().fold(f64::INFINITY, f64::min);
        Some((chi_f, 0.0))
    }

    fn check_scenario(&self, scenario: &EvScenario) -> Result<()> {
        Error::check_len("scenario slopes", self.dim(), scenario.a.len())?;
        Error::check_len("scenario offsets", self.dim(), scenario.b.len())
    }
}

/// Distribution of EV price scenarios: i.i.d. lognormal slopes and uniform offsets.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvScenarioSampler {
    pub dim: usize,
    /// Mean of `ln a`.
    pub log_mean: f64,
    /// Standard deviation of `ln a`.
    pub log_std: f64,
    pub offset_low: f64,
    pub offset_high: f64,
}

impl EvScenarioSampler {
    pub const DEFAULT_LOG_STD: f64 = 0.5;
    pub const DEFAULT_OFFSET_RANGE: (f64, f64) = (0.0, 0.5);

    pub fn new(dim: usize, log_mean: f64, log_std: f64, offset_low: f64, offset_high: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("n", "must be positive"));
        }
        if !(log_std > 0.0) || !log_std.is_finite() || !log_mean.is_finite() {
            return Err(Error::invalid("s", "lognormal spread must be positive and finite"));
        }
        if !(offset_low <= offset_high) || !offset_low.is_finite() || !offset_high.is_finite() {
            return Err(Error::invalid("b range", "need finite b_lo <= b_hi"));
        }
        Ok(Self {
            dim,
            log_mean,
            log_std,
            offset_low,
            offset_high,
        })
    }

    /// Defaults: `μ = ln 0.05`, `s = 0.5`, `b ∈ [0, 0.5]`.
    pub fn with_defaults(dim: usize) -> Self {
        let (lo, hi) = Self::DEFAULT_OFFSET_RANGE;
        Self::new(dim, num::log(0.05), Self::DEFAULT_LOG_STD, lo, hi).expect("defaults are valid")
    }
}

impl ScenarioSampler<EvScenario> for EvScenarioSampler {
    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> EvScenario {
        let slopes = LogNormal::new(self.log_mean, self.log_std).expect("validated on construction");
        let a = (0..self.dim).map(|_| slopes.sample(rng)).collect();
        let b = if self.offset_low == self.offset_high {
            vec![self.offset_low; self.dim]
        } else {
            let offsets = Uniform::new_inclusive(self.offset_low, self.offset_high).expect("validated");
            (0..self.dim).map(|_| offsets.sample(rng)).collect()
        };
        EvScenario { a, b }
    }
}

/// Draws `m` i.i.d. price scenarios for `n` slots.
pub fn ev_sample_scenarios(
    n: usize,
    m: usize,
    log_mean: f64,
    log_std: f64,
    offset_range: (f64, f64),
    seed: u64,
) -> Result<ScenarioSet<EvScenario>> {
    if m == 0 {
        return Err(Error::invalid("M", "need at least one scenario"));
    }
    let mut sampler = EvScenarioSampler::new(n, log_mean, log_std, offset_range.0, offset_range.1)?;
    let mut rng = rng::seeded(seed);
    ScenarioSet::new((0..m).map(|_| sampler.draw(&mut rng)).collect())
}

/// Draws `num_agents` feasible sets: `P_i` uniform on `power_range` and `E_i`
/// uniform on `[0, min(n P_i, energy_per_12_slots · n / 12)]`.
pub fn ev_sample_agents(
    num_agents: usize,
    n: usize,
    power_range: (f64, f64),
    energy_per_12_slots: f64,
    seed: u64,
) -> Result<Vec<FeasibleSet>> {
    if num_agents == 0 {
        return Err(Error::invalid("N", "need at least one agent"));
    }
    if n == 0 {
        return Err(Error::invalid("n", "must be positive"));
    }
    let (p_lo, p_hi) = power_range;
    if !(p_lo > 0.0 && p_lo <= p_hi && p_hi.is_finite()) {
        return Err(Error::invalid("P range", "need 0 < P_lo <= P_hi"));
    }
    if !(energy_per_12_slots >= 0.0) {
        return Err(Error::invalid("energy", "must be nonnegative"));
    }
    let mut rng = rng::seeded(seed);
    (0..num_agents)
        .map(|_| {
            let cap = p_lo + (p_hi - p_lo) * rng.random::<f64>();
            let e_max = (n as f64 * cap).min(energy_per_12_slots * n as f64 / 12.0);
            let budget = e_max * rng.random::<f64>();
            FeasibleSet::new(budget, cap, n)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_slot() -> (EvGame, ScenarioSet<EvScenario>) {
        let game = EvGame::new(vec![1.0], vec![0.0], vec![FeasibleSet::new(0.0, 5.0, 1).unwrap()]).unwrap();
        let s = ScenarioSet::new(vec![EvScenario::new(vec![1.0], vec![0.0]).unwrap()]).unwrap();
        (game, s)
    }

    #[test]
    fn hand_expanded_single_slot_costs() {
        let (game, s) = single_slot();
        let x = StrategyProfile::from_vec(1, vec![2.0]).unwrap();
        assert_eq!(game.agent_cost(0, &x), 4.0);
        assert_eq!(game.uncertain_cost(&x, &s.as_slice()[0]), 4.0);
        assert_eq!(crate::game::eval_agent_cost(&game, 0, &x, &s).unwrap(), 8.0);
    }

    #[test]
    fn nominal_profile_shape() {
        let p = nominal_price_profile(24);
        assert_eq!(p.len(), 24);
        assert!(p.iter().all(|v| (0.03..=0.12).contains(v)));
        for n in [1, 2, 6, 12, 48] {
            let q = nominal_price_profile(n);
            assert_eq!(q.len(), n);
            assert!(q.iter().all(|v| (0.03..=0.12).contains(v)), "n = {n}");
        }
    }

    #[test]
    fn feasible_set_validation() {
        assert!(matches!(FeasibleSet::new(3.0, 1.0, 2), Err(Error::InfeasibleSet { .. })));
        assert!(FeasibleSet::new(2.0, 1.0, 2).is_ok());
        assert!(FeasibleSet::new(1.0, 0.0, 2).is_err());
        assert!(FeasibleSet::new(-1.0, 1.0, 2).is_err());
        let fs = FeasibleSet::new(1.0, 1.0, 2).unwrap();
        assert!(fs.contains(&[0.5, 0.5], 0.0));
        assert!(!fs.contains(&[0.4, 0.5], 1e-12));
        assert!(!fs.contains(&[1.5, 0.0], 1e-12));
    }

    #[test]
    fn scenario_validation() {
        assert!(EvScenario::new(vec![1.0, -1.0], vec![0.0, 0.0]).is_err());
        assert!(EvScenario::new(vec![1.0], vec![0.0, 0.0]).is_err());
        assert!(EvScenarioSampler::new(2, 0.0, 0.0, 0.0, 1.0).is_err());
        assert!(EvScenarioSampler::new(2, 0.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn scenario_sampling_is_deterministic() {
        let a = ev_sample_scenarios(3, 5, -3.0, 0.5, (0.0, 0.5), 11).unwrap();
        let b = ev_sample_scenarios(3, 5, -3.0, 0.5, (0.0, 0.5), 11).unwrap();
        let c = ev_sample_scenarios(3, 5, -3.0, 0.5, (0.0, 0.5), 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|s| s.b.iter().all(|v| (0.0..=0.5).contains(v))));
    }

    #[test]
    fn vanishing_spread_collapses_slopes() {
        let s = ev_sample_scenarios(4, 10, num::log(0.05), 1e-12, (0.0, 0.0), 3).unwrap();
        for sc in s.iter() {
            for a in &sc.a {
                assert!((a - 0.05).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn agent_sampling_is_feasible_and_deterministic() {
        let a = ev_sample_agents(50, 6, DEFAULT_POWER_RANGE, DEFAULT_ENERGY_PER_12_SLOTS, 5).unwrap();
        let b = ev_sample_agents(50, 6, DEFAULT_POWER_RANGE, DEFAULT_ENERGY_PER_12_SLOTS, 5).unwrap();
        assert_eq!(a, b);
        for fs in &a {
            assert!(fs.budget <= 6.0 * fs.cap);
            assert!(fs.budget <= 35.0 * 6.0 / 12.0);
            assert!((6.0..=15.0).contains(&fs.cap));
        }
    }
}

//! Euclidean projections onto the probability simplex and onto the
//! box-plus-budget sets `{x : 1ᵀx ≥ E, 0 ≤ x ≤ P}`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ev::FeasibleSet;
use crate::game::SimplexWeights;
use crate::num;

/// Tolerance at which bounds and the budget are reported as active.
pub const ACTIVE_TOL: f64 = 1e-10;

const BISECTION_MAX_ITER: usize = 200;

/// Which constraints of a box-budget set bind at a projected point.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ActiveSet {
    pub lower: Vec<usize>,
    pub upper: Vec<usize>,
    pub budget: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProjectionResult {
    pub point: Vec<f64>,
    pub active: ActiveSet,
}

/// `argmin_{y ∈ Δ} ‖y − v‖²` by the sort-and-threshold rule.
///
/// Inputs that already lie on the simplex (up to rounding in their sum) are
/// returned untouched, which makes the projection exactly idempotent.
pub fn project_simplex(v: &[f64]) -> Result<SimplexWeights> {
    if v.is_empty() {
        return Err(Error::invalid("v", "cannot project an empty vector onto the simplex"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("v", "entries must be finite"));
    }
    if v.len() == 1 {
        return Ok(SimplexWeights::from_raw(alloc::vec![1.0]));
    }
    let total: f64 = v.iter().sum();
    if v.iter().all(|&x| x >= 0.0) && (total - 1.0).abs() <= 8.0 * f64::EPSILON * v.len() as f64 {
        return Ok(SimplexWeights::from_raw(v.to_vec()));
    }
    let mut u = v.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    Ok(SimplexWeights::from_raw(v.iter().map(|&x| (x - theta).max(0.0)).collect()))
}

/// `argmin_{x ∈ X} ‖x − v‖²` for `X = {x : 1ᵀx ≥ E, 0 ≤ x ≤ P}`.
pub fn project_box_budget(v: &[f64], fs: &FeasibleSet) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(v.len());
    out.resize(v.len(), 0.0);
    project_box_budget_into(v, fs, &mut out)?;
    Ok(out)
}

/// Projection with a summary of the constraints active at the result.
pub fn project_box_budget_detailed(v: &[f64], fs: &FeasibleSet) -> Result<ProjectionResult> {
    let point = project_box_budget(v, fs)?;
    let mut active = ActiveSet::default();
    for (j, &x) in point.iter().enumerate() {
        if x <= ACTIVE_TOL {
            active.lower.push(j);
        } else if x >= fs.cap - ACTIVE_TOL {
            active.upper.push(j);
        }
    }
    active.budget = point.iter().sum::<f64>() <= fs.budget + ACTIVE_TOL * fs.budget.max(1.0);
    Ok(ProjectionResult { point, active })
}

/// In-place variant of [`project_box_budget`]; `out` must have the length of `v`.
///
/// If clamping `v` to the box already meets the budget (up to
/// `1e-10 max(1, E)`) that is the answer.
/// Otherwise the budget binds and the solution is `clamp(v + λ, 0, P)` for the
/// multiplier `λ ≥ 0` solving `1ᵀx(λ) = E`, found by bisection on
/// `[0, E + ‖v‖_∞ + P]` and polished with Newton steps on the piecewise-linear
/// budget function.
pub fn project_box_budget_into(v: &[f64], fs: &FeasibleSet, out: &mut [f64]) -> Result<()> {
    let n = fs.dim;
    Error::check_len("projection input", n, v.len())?;
    Error::check_len("projection output", n, out.len())?;
    let capacity = n as f64 * fs.cap;
    if fs.budget > capacity {
        return Err(Error::InfeasibleSet {
            budget: fs.budget,
            capacity,
        });
    }
    if fs.budget == capacity {
        out.iter_mut().for_each(|o| *o = fs.cap);
        return Ok(());
    }
    let clamp = |x: f64| x.max(0.0).min(fs.cap);
    let filled = |lambda: f64| v.iter().map(|&x| clamp(x + lambda)).sum::<f64>();
    let target_tol = 1e-10 * fs.budget.max(1.0);

    // Accepting the clamp within the budget tolerance makes the map idempotent.
    if filled(0.0) >= fs.budget - target_tol {
        for (o, &x) in out.iter_mut().zip(v) {
            *o = clamp(x);
        }
        return Ok(());
    }

    let v_inf = num::max_abs(v);
    let (mut lo, mut hi) = (0.0, fs.budget + v_inf + fs.cap);
    let mut lambda = hi;
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let s = filled(mid);
        if (s - fs.budget).abs() <= target_tol {
            lambda = mid;
            break;
        }
        if s < fs.budget {
            lo = mid;
        } else {
            hi = mid;
            lambda = hi;
        }
    }

    // Newton polish: on the current linear piece the root is exact.
    for _ in 0..2 * n + 2 {
        let s = filled(lambda);
        let free = v
            .iter()
            .filter(|&&x| x + lambda > 0.0 && x + lambda < fs.cap)
            .count();
        if free == 0 || s == fs.budget {
            break;
        }
        let next = lambda + (fs.budget - s) / free as f64;
        if next < 0.0 || (filled(next) - fs.budget).abs() >= (s - fs.budget).abs() {
            break;
        }
        lambda = next;
    }

    for (o, &x) in out.iter_mut().zip(v) {
        *o = clamp(x + lambda);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn simplex_fixes_points_on_the_simplex() {
        let v = [0.2, 0.3, 0.5];
        assert_eq!(project_simplex(&v).unwrap().as_slice(), &v);
    }

    #[test]
    fn simplex_dominant_coordinate() {
        let y = project_simplex(&[10.0, 0.0, 0.0]).unwrap();
        assert_eq!(y.as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn simplex_rejects_empty() {
        assert!(project_simplex(&[]).is_err());
    }

    #[test]
    fn simplex_shifts_uniformly_when_interior() {
        let y = project_simplex(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        for w in y.as_slice() {
            assert!((w - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn box_budget_keeps_interior_slack_points() {
        let fs = FeasibleSet::new(1.0, 2.0, 3).unwrap();
        let v = [0.5, 1.0, 0.25];
        assert_eq!(project_box_budget(&v, &fs).unwrap(), v.to_vec());
    }

    #[test]
    fn box_budget_singleton_set() {
        let fs = FeasibleSet::new(2.0, 1.0, 2).unwrap();
        for v in [[0.0, 0.0], [-3.0, 7.0], [0.5, 0.4]] {
            assert_eq!(project_box_budget(&v, &fs).unwrap(), vec![1.0, 1.0]);
        }
    }

    #[test]
    fn box_budget_binding_budget_is_met() {
        let fs = FeasibleSet::new(3.0, 2.0, 3).unwrap();
        let x = project_box_budget(&[0.1, -1.0, 0.4], &fs).unwrap();
        let total: f64 = x.iter().sum();
        assert!((total - 3.0).abs() <= 1e-12);
        assert!(fs.contains(&x, 1e-12));
        let r = project_box_budget_detailed(&[0.1, -1.0, 0.4], &fs).unwrap();
        assert!(r.active.budget);
    }

    #[test]
    fn box_budget_clamps_without_budget_pressure() {
        let fs = FeasibleSet::new(0.0, 1.0, 3).unwrap();
        let r = project_box_budget_detailed(&[-1.0, 0.5, 3.0], &fs).unwrap();
        assert_eq!(r.point, vec![0.0, 0.5, 1.0]);
        assert_eq!(r.active.lower, vec![0]);
        assert_eq!(r.active.upper, vec![2]);
    }

    #[test]
    fn box_budget_dimension_errors() {
        let fs = FeasibleSet::new(0.0, 1.0, 3).unwrap();
        assert!(project_box_budget(&[0.0, 0.0], &fs).is_err());
        let bad = FeasibleSet {
            budget: 10.0,
            cap: 1.0,
            dim: 2,
        };
        assert!(matches!(project_box_budget(&[0.0, 0.0], &bad), Err(Error::InfeasibleSet { .. })));
    }
}

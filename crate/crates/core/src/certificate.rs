//! Probabilistic robustness certificates.
//!
//! Given `M` i.i.d. scenarios and a confidence parameter `β`, a certificate
//! bounds the probability that a fresh scenario changes the equilibrium by
//! `ε(k)`, where `k` is the size of a compression set (a posteriori) or a
//! structural bound on it (a priori).
//!
//! * [`eps_split`] spreads `β` evenly over the `M` terms of
//!   `Σ_{k<M} C(M,k) (1 − ε(k))^{M−k} = β`, which gives
//!   `ε(k) = 1 − (β / (M C(M,k)))^{1/(M−k)}`.
//! * [`eps_wait_judge`] is `1 − t(k)` with `t(k)` the root in `(0, 1)` of
//!   `β/(M+1) Σ_{m=k}^{M} C(m,k) t^{m−k} − C(M,k) t^{M−k}`. It is tighter but
//!   needs a non-degenerate problem.
//!
//! All binomial coefficients are handled in the log domain.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::num::{self, ln_binomial, log, log_sum_exp};

/// Width of the final bracket around the wait-and-judge root.
pub const ROOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CertificateKind {
    Split,
    WaitAndJudge,
    APriori,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Certificate {
    #[cfg_attr(feature = "serde", serde(rename = "M"))]
    pub m: usize,
    pub beta: f64,
    pub k: usize,
    pub epsilon: f64,
    pub kind: CertificateKind,
    /// `true` when `k ≥ M` and the bound degenerates to `ε = 1`.
    pub vacuous: bool,
}

impl Certificate {
    /// A posteriori certificate for an observed compression cardinality.
    pub fn a_posteriori(m: usize, beta: f64, k: usize, kind: CertificateKind) -> Result<Self> {
        let epsilon = match kind {
            CertificateKind::Split => eps_split(m, beta, k)?,
            CertificateKind::WaitAndJudge if k == m => {
                check_params(m, beta, k)?;
                1.0
            }
            CertificateKind::WaitAndJudge => eps_wait_judge(m, beta, k)?,
            CertificateKind::APriori => {
                return Err(Error::invalid("kind", "use eps_a_priori for a priori certificates"))
            }
        };
        Ok(Self {
            m,
            beta,
            k,
            epsilon,
            kind,
            vacuous: k >= m,
        })
    }
}

fn check_params(m: usize, beta: f64, k: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::invalid("M", "need at least one sample"));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid("beta", "must lie in (0, 1)"));
    }
    if k > m {
        return Err(Error::invalid("k", "cannot exceed M"));
    }
    Ok(())
}

/// `ε(k)` with `β` split evenly across the `M` terms; `ε(M) = 1`.
pub fn eps_split(m: usize, beta: f64, k: usize) -> Result<f64> {
    check_params(m, beta, k)?;
    if k == m {
        return Ok(1.0);
    }
    let ln_one_minus = (log(beta) - log(m as f64) - ln_binomial(m, k)) / (m - k) as f64;
    Ok(-num::expm1(ln_one_minus))
}

/// `ln` of the wait-and-judge polynomial's two parts at `t`:
/// `(ln(β/(M+1) Σ_{m=k}^{M} C(m,k) t^{m−k}), ln(C(M,k) t^{M−k}))`.
fn wait_judge_parts(m: usize, beta: f64, k: usize, t: f64, buf: &mut Vec<f64>) -> (f64, f64) {
    let ln_t = log(t);
    buf.clear();
    buf.extend((k..=m).map(|j| ln_binomial(j, k) + (j - k) as f64 * ln_t));
    let lhs = log(beta / (m as f64 + 1.0)) + log_sum_exp(buf);
    let rhs = ln_binomial(m, k) + (m - k) as f64 * ln_t;
    (lhs, rhs)
}

/// Root `t(k) ∈ (0, 1)` of the wait-and-judge polynomial, bisected until the
/// bracket is narrower than `tol` relative to its upper end (hence also in
/// absolute terms).
pub fn wait_judge_root(m: usize, beta: f64, k: usize, tol: f64) -> Result<f64> {
    check_params(m, beta, k)?;
    if k >= m {
        return Err(Error::invalid("k", "wait-and-judge needs k <= M - 1"));
    }
    let mut buf = Vec::with_capacity(m - k + 1);
    // The polynomial is positive near 0 and equals C(M,k)(β/(k+1) − 1) < 0 at 1.
    let sign = |t: f64, buf: &mut Vec<f64>| {
        let (lhs, rhs) = wait_judge_parts(m, beta, k, t, buf);
        lhs - rhs
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let probe_lo = f64::MIN_POSITIVE;
    if !(sign(probe_lo, &mut buf) > 0.0) || !(sign(1.0, &mut buf) < 0.0) {
        return Err(Error::RootBracketing);
    }
    // Relative stopping rule: the root is ~β/M² for k = M − 1.
    while hi - lo > tol * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sign(mid, &mut buf) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Value of the wait-and-judge polynomial at `t` divided by its last term
/// `C(M,k) t^{M−k}`; zero at the root.
pub fn wait_judge_relative_residual(m: usize, beta: f64, k: usize, t: f64) -> f64 {
    let mut buf = Vec::new();
    let (lhs, rhs) = wait_judge_parts(m, beta, k, t, &mut buf);
    num::expm1(lhs - rhs)
}

/// Wait-and-judge `ε(k) = 1 − t(k)`; `ε(M) = 1`.
pub fn eps_wait_judge(m: usize, beta: f64, k: usize) -> Result<f64> {
    check_params(m, beta, k)?;
    if k == m {
        return Ok(1.0);
    }
    Ok(1.0 - wait_judge_root(m, beta, k, ROOT_TOL)?)
}

/// A priori certificate for `N` agents with `n` decisions each: `ε` evaluated
/// at `k = (n + 1) N`, or at `k = nN + 1` when `f_i` and `g` are separately
/// convex. The wait-and-judge expression is used when the problem is declared
/// non-degenerate, the split expression otherwise.
pub fn eps_a_priori(
    num_agents: usize,
    dim: usize,
    m: usize,
    beta: f64,
    separable_convexity: bool,
    non_degenerate: bool,
) -> Result<Certificate> {
    if num_agents == 0 || dim == 0 {
        return Err(Error::invalid("N, n", "must be positive"));
    }
    let k = a_priori_cardinality(num_agents, dim, separable_convexity);
    check_params(m, beta, 0)?;
    let epsilon = if k >= m {
        1.0
    } else if non_degenerate {
        eps_wait_judge(m, beta, k)?
    } else {
        eps_split(m, beta, k)?
    };
    Ok(Certificate {
        m,
        beta,
        k,
        epsilon,
        kind: CertificateKind::APriori,
        vacuous: k >= m,
    })
}

/// `(n + 1) N`, or `nN + 1` under separate convexity.
pub fn a_priori_cardinality(num_agents: usize, dim: usize, separable_convexity: bool) -> usize {
    if separable_convexity {
        dim * num_agents + 1
    } else {
        (dim + 1) * num_agents
    }
}

/// Relative deviation of `Σ_{k<M} C(M,k)(1 − ε(k))^{M−k}` from `β` for the
/// split `ε`, summed in the log domain.
pub fn verify_split_identity(m: usize, beta: f64) -> Result<f64> {
    check_params(m, beta, 0)?;
    let mut terms = Vec::with_capacity(m);
    for k in 0..m {
        let eps = eps_split(m, beta, k)?;
        terms.push(ln_binomial(m, k) + (m - k) as f64 * num::log1p(-eps));
    }
    Ok(num::expm1(log_sum_exp(&terms) - log(beta)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints() {
        assert_eq!(eps_split(500, 1e-6, 500).unwrap(), 1.0);
        assert_eq!(eps_wait_judge(500, 1e-6, 500).unwrap(), 1.0);
        assert!(eps_split(10, 0.0, 1).is_err());
        assert!(eps_split(10, 1.0, 1).is_err());
        assert!(eps_split(10, 0.1, 11).is_err());
        assert!(eps_split(0, 0.1, 0).is_err());
        assert!(wait_judge_root(10, 0.1, 10, 1e-12).is_err());
    }

    #[test]
    fn single_sample_identity_is_exact() {
        // M = 1: the only term is (1 − ε(0))^1 = β.
        assert!(verify_split_identity(1, 0.3).unwrap() < 1e-15);
    }

    #[test]
    fn a_priori_cardinality_choice() {
        let c = eps_a_priori(2, 2, 500, 1e-6, false, false).unwrap();
        assert_eq!(c.k, 6);
        assert_eq!(c.epsilon, eps_split(500, 1e-6, 6).unwrap());
        assert_eq!(c.kind, CertificateKind::APriori);
        let c = eps_a_priori(2, 2, 500, 1e-6, true, false).unwrap();
        assert_eq!(c.k, 5);
        let c = eps_a_priori(2, 2, 500, 1e-6, false, true).unwrap();
        assert_eq!(c.epsilon, eps_wait_judge(500, 1e-6, 6).unwrap());
    }

    #[test]
    fn a_priori_vacuous_at_full_scale() {
        let c = eps_a_priori(20, 24, 500, 1e-6, false, false).unwrap();
        assert_eq!(c.k, 500);
        assert_eq!(c.epsilon, 1.0);
        assert!(c.vacuous);
        let c = eps_a_priori(30, 24, 500, 1e-6, false, true).unwrap();
        assert!(c.vacuous);
        assert_eq!(c.epsilon, 1.0);
    }
}

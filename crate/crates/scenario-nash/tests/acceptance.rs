//! Acceptance suite. Every criterion runs at its stated tolerance and prints one
//! line; the process exits non-zero if any criterion fails.
//!
//! ```text
//! cargo test --release -p scenario-nash --test acceptance
//! ```
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::process::ExitCode;
use std::time::Instant;

use rayon::prelude::*;

use scenario_nash::config::ExperimentConfig;
use scenario_nash::experiments::{run_certificate_table, run_dstar_scaling, sample_instance};
use scenario_nash_core::certificate::{eps_split, eps_wait_judge, verify_split_identity};
use scenario_nash_core::compression::{
    default_equality_tolerance, greedy_compression, support_from_weights, verify_compression, DEFAULT_SUPPORT_TOL,
};
use scenario_nash_core::game::{self, monotonicity_probe, random_augmented_point, strong_monotonicity_probe};
use scenario_nash_core::projection::project_box_budget;
use scenario_nash_core::solver::{best_response_gap, solve_ne, vi_residual};
use scenario_nash_core::subproblem::solve_coordinator_subproblem;
use scenario_nash_core::{
    EvGame, EvScenario, InitRule, NeSolution, ScenarioGame, ScenarioSet, SolverConfig, StrategyProfile,
};

type Verdict = Result<String, String>;

struct Instance {
    game: EvGame,
    scenarios: ScenarioSet<EvScenario>,
    /// Default start.
    sol: NeSolution,
    /// Full-power start.
    alt: NeSolution,
}

/// N ∈ {2,3,5}, n ∈ {2,4}, M ∈ {5,20}, seeded.
const SHAPES: [(usize, usize, usize); 10] = [
    (2, 2, 5),
    (2, 4, 20),
    (3, 2, 20),
    (3, 4, 5),
    (5, 2, 5),
    (5, 4, 20),
    (2, 2, 20),
    (3, 4, 20),
    (5, 2, 20),
    (3, 2, 5),
];

fn small_instances(cfg: &SolverConfig) -> Vec<Instance> {
    SHAPES
        .par_iter()
        .enumerate()
        .map(|(k, &(num_agents, n, m))| {
            let exp = ExperimentConfig {
                num_agents,
                ..ExperimentConfig::default()
            };
            let (game, scenarios) = sample_instance(&exp, n, m, 7000 + k as u64).expect("sampling");
            let sol = solve_ne(&game, &scenarios, cfg).expect("solve");
            let alt_cfg = SolverConfig {
                init: InitRule::FullPower,
                ..cfg.clone()
            };
            let alt = solve_ne(&game, &scenarios, &alt_cfg).expect("solve");
            Instance {
                game,
                scenarios,
                sol,
                alt,
            }
        })
        .collect()
}

/// Weak-duality bound on agent `i`'s best-response gap: the private cost plus
/// the `y`-weighted uncertain cost is minimised by projected gradient, which
/// never exceeds the worst-case objective.
fn dual_gap_bound(game: &EvGame, s: &ScenarioSet<EvScenario>, x: &StrategyProfile, y: &[f64], i: usize) -> f64 {
    let n = game.dim();
    let big_n = game.num_agents() as f64;
    let lip = (0..n)
        .map(|j| {
            let w: f64 = s.iter().zip(y).map(|(t, w)| w * t.a[j]).sum();
            2.0 * game.a0()[j] + 2.0 * w / big_n
        })
        .fold(0.0, f64::max);
    let mut p = x.clone();
    let mut gf = vec![0.0; n];
    let mut gg = vec![0.0; n];
    for _ in 0..200_000 {
        game.agent_cost_grad(i, &p, &mut gf);
        game.weighted_uncertain_grad(i, &p, s.as_slice(), y, &mut gg);
        let step: Vec<f64> = (0..n).map(|j| p.block(i)[j] - (gf[j] + gg[j]) / lip).collect();
        let next = project_box_budget(&step, game.feasible_set(i)).unwrap();
        let change = next.iter().zip(p.block(i)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        p.block_mut(i).copy_from_slice(&next);
        if change <= 1e-15 {
            break;
        }
    }
    let relaxed = game.agent_cost(i, &p) + game::eval_ghat(game, &p, y, s).unwrap();
    game::eval_agent_cost(game, i, x, s).unwrap() - relaxed
}

fn certificate_values() -> Verdict {
    let mut worst: (f64, f64) = (0.0, 0.0);
    for (k, split, wj) in [(4, 8.06, 5.30), (6, 9.76, 6.11), (7, 10.55, 6.49), (9, 12.06, 7.22)] {
        let s = 100.0 * eps_split(500, 1e-6, k).map_err(|e| e.to_string())?;
        let w = 100.0 * eps_wait_judge(500, 1e-6, k).map_err(|e| e.to_string())?;
        if (s - split).abs() > 0.05 || (w - wj).abs() > 0.1 {
            return Err(format!("k = {k}: split {s:.3}% (want {split}), wait-and-judge {w:.3}% (want {wj})"));
        }
        worst = (worst.0.max((s - split).abs()), worst.1.max((w - wj).abs()));
    }
    Ok(format!("max deviation {:.3} pp split, {:.3} pp wait-and-judge", worst.0, worst.1))
}

fn split_identity() -> Verdict {
    let mut worst = 0.0f64;
    for m in [10, 100, 500, 2000] {
        for beta in [0.05, 1e-6] {
            let dev = verify_split_identity(m, beta).map_err(|e| e.to_string())?;
            if !(dev <= 1e-6) {
                return Err(format!("M = {m}, beta = {beta}: relative deviation {dev:.3e}"));
            }
            worst = worst.max(dev);
        }
    }
    Ok(format!("max relative deviation {worst:.2e}"))
}

fn ne_oracle(instances: &[Instance], cfg: &SolverConfig) -> Verdict {
    let (mut gap_max, mut bound_max, mut res_max) = (0.0f64, 0.0f64, 0.0f64);
    for (k, inst) in instances.iter().enumerate() {
        let (g, s, sol) = (&inst.game, &inst.scenarios, &inst.sol);
        let residual = vi_residual(g, s, &sol.point()).map_err(|e| e.to_string())?;
        if !(residual <= 1e3 * cfg.gamma_out) {
            return Err(format!("instance {k}: VI residual {residual:.3e}"));
        }
        res_max = res_max.max(residual);
        for i in 0..g.num_agents() {
            let gap = best_response_gap(g, s, &sol.x, i, cfg).map_err(|e| e.to_string())?;
            let bound = dual_gap_bound(g, s, &sol.x, sol.y.as_slice(), i);
            if !(gap <= 1e-5 && bound <= 1e-5) {
                return Err(format!("instance {k}, agent {i}: gap {gap:.3e}, dual bound {bound:.3e}"));
            }
            gap_max = gap_max.max(gap);
            bound_max = bound_max.max(bound);
        }
    }
    Ok(format!(
        "max gap {gap_max:.2e}, max dual bound {bound_max:.2e}, max VI residual {res_max:.2e}"
    ))
}

fn single_valued(instances: &[Instance], cfg: &SolverConfig) -> Verdict {
    let mut worst = 0.0f64;
    for (k, inst) in instances.iter().enumerate() {
        let d = inst.sol.x.dist_inf(&inst.alt.x);
        if !(d <= 10.0 * cfg.gamma_out) {
            return Err(format!("instance {k}: starts disagree by {d:.3e}"));
        }
        worst = worst.max(d);
    }
    Ok(format!("max disagreement {worst:.2e} (limit {:.0e})", 10.0 * cfg.gamma_out))
}

fn compression_sound(instances: &[Instance], cfg: &SolverConfig) -> Verdict {
    let sizes = instances
        .par_iter()
        .enumerate()
        .map(|(k, inst)| {
            let (g, s, sol) = (&inst.game, &inst.scenarios, &inst.sol);
            let tol = default_equality_tolerance(cfg, g.dim(), g.num_agents());
            let support = support_from_weights(sol.y.as_slice(), DEFAULT_SUPPORT_TOL).map_err(|e| e.to_string())?;
            if !verify_compression(g, s, &support, &sol.x, cfg, tol).map_err(|e| e.to_string())? {
                return Err(format!("instance {k}: support {support:?} not verified"));
            }
            let greedy = greedy_compression(g, s, sol, cfg, tol).map_err(|e| e.to_string())?;
            if !greedy.indices.iter().all(|i| support.contains(i)) {
                return Err(format!("instance {k}: greedy {:?} not within support {support:?}", greedy.indices));
            }
            if !verify_compression(g, s, &greedy.indices, &sol.x, cfg, tol).map_err(|e| e.to_string())? {
                return Err(format!("instance {k}: greedy {:?} not verified", greedy.indices));
            }
            Ok((support.len(), greedy.cardinality))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let support: Vec<usize> = sizes.iter().map(|p| p.0).collect();
    let greedy: Vec<usize> = sizes.iter().map(|p| p.1).collect();
    Ok(format!("support sizes {support:?}, greedy sizes {greedy:?}"))
}

fn complementarity(instances: &[Instance]) -> Verdict {
    let (mut dev_max, mut inactive_max) = (0.0f64, 0.0f64);
    for (k, inst) in instances.iter().enumerate() {
        let sol = &inst.sol;
        let costs = game::uncertain_costs(&inst.game, &sol.x, inst.scenarios.as_slice());
        let weighted: f64 = costs.iter().zip(sol.y.as_slice()).map(|(c, w)| c * w).sum();
        let tol = 1e-6 * (1.0 + sol.gamma.abs());
        let dev = (weighted - sol.gamma).abs();
        if !(dev <= tol) {
            return Err(format!("instance {k}: |Σ y g − γ| = {dev:.3e}"));
        }
        dev_max = dev_max.max(dev / (1.0 + sol.gamma.abs()));
        for (m, (c, w)) in costs.iter().zip(sol.y.as_slice()).enumerate() {
            if *c < sol.gamma - tol {
                if *w > 1e-8 {
                    return Err(format!("instance {k}: inactive scenario {m} has weight {w:.3e}"));
                }
                inactive_max = inactive_max.max(*w);
            }
        }
    }
    Ok(format!(
        "max scaled deviation {dev_max:.2e}, max inactive weight {inactive_max:.2e}"
    ))
}

fn violation_conformance() -> Verdict {
    let cfg = ExperimentConfig::default();
    let report = run_certificate_table(&cfg).map_err(|e| format!("{e:#}"))?;
    if !report.failed.is_empty() {
        return Err(format!("{} seeds failed: {:?}", report.failed.len(), report.failed));
    }
    if report.runs.len() != 20 {
        return Err(format!("{} runs completed", report.runs.len()));
    }
    if let Some(r) = report.runs.iter().find(|r| !(r.empirical_rate <= r.eps_wait_judge)) {
        return Err(format!(
            "seed {}: rate {:.4} above bound {:.4} at d* = {}",
            r.seed, r.empirical_rate, r.eps_wait_judge, r.d_star
        ));
    }
    let rows: Vec<String> = report
        .rows
        .iter()
        .map(|r| {
            format!(
                "d*={} x{}: {:.2}% < {:.2}% < {:.2}%",
                r.d_star, r.runs, r.empirical_pct, r.eps_wait_judge_pct, r.eps_split_pct
            )
        })
        .collect();
    if !report.all_rows_ordered() {
        return Err(format!("row ordering broken: {}", rows.join("; ")));
    }
    Ok(rows.join("; "))
}

fn a_priori_bound() -> Verdict {
    let cfg = ExperimentConfig {
        seeds: (0..10).collect(),
        ..ExperimentConfig::default()
    };
    let report = run_dstar_scaling(&cfg).map_err(|e| format!("{e:#}"))?;
    if !report.failed.is_empty() {
        return Err(format!("{} runs failed: {:?}", report.failed.len(), report.failed));
    }
    if report.records.len() != 60 {
        return Err(format!("{} runs completed", report.records.len()));
    }
    if let Some(r) = report.rows.iter().find(|r| !r.within_bound) {
        return Err(format!("n = {}, M = {}: max d* {} above {}", r.n, r.m, r.max_d_star, r.bound));
    }
    let soft: Vec<String> = report
        .rows
        .iter()
        .map(|r| {
            format!(
                "n={} M={}: max d*={}{}",
                r.n,
                r.m,
                r.max_d_star,
                if r.d_star_le_n { "" } else { " (soft d* <= n missed)" }
            )
        })
        .collect();
    Ok(soft.join("; "))
}

fn max_simplex_equivalence() -> Verdict {
    let mut rng = scenario_nash_core::rng::seeded(909);
    let mut worst = 0.0f64;
    for t in 0..100u64 {
        let num_agents = 2 + (t % 4) as usize;
        let n = 2 + (t % 5) as usize;
        let m = 1 + (t % 30) as usize;
        let cfg = ExperimentConfig {
            num_agents,
            ..ExperimentConfig::default()
        };
        let (g, s) = sample_instance(&cfg, n, m, 9000 + t).map_err(|e| e.to_string())?;
        let z = random_augmented_point(&g, m, &mut rng);
        let (direct, _) = game::max_uncertain_cost(&g, &z.x, &s).map_err(|e| e.to_string())?;
        let y = solve_coordinator_subproblem(&g, &z.x, z.y.as_slice(), 0.0, 1e-12, s.as_slice())
            .map_err(|e| e.to_string())?;
        let closed = game::eval_ghat(&g, &z.x, y.as_slice(), &s).map_err(|e| e.to_string())?;
        let d = (direct - closed).abs();
        if !(d <= 1e-8) {
            return Err(format!("point {t}: max {direct} vs coordinator {closed}"));
        }
        worst = worst.max(d);
    }
    Ok(format!("max difference {worst:.2e} over 100 points"))
}

fn monotonicity(instances: &[Instance], cfg: &SolverConfig) -> Verdict {
    let mut min_modulus = f64::INFINITY;
    for (k, inst) in instances.iter().enumerate() {
        let mono = monotonicity_probe(&inst.game, &inst.scenarios, 200, k as u64).map_err(|e| e.to_string())?;
        if !mono.passed {
            return Err(format!("instance {k}: min inner product {:.3e}", mono.min_inner_product));
        }
        let strong = strong_monotonicity_probe(&inst.game, &inst.scenarios, cfg.eta0, cfg.tau, 200, k as u64)
            .map_err(|e| e.to_string())?;
        if !(strong.passed && strong.min_modulus >= cfg.tau - 1e-6) {
            return Err(format!("instance {k}: modulus {:.6} below tau = {}", strong.min_modulus, cfg.tau));
        }
        min_modulus = min_modulus.min(strong.min_modulus);
    }
    Ok(format!("min observed modulus {min_modulus:.6} (tau = {})", cfg.tau))
}

fn report(id: usize, name: &str, started: Instant, verdict: Verdict) -> bool {
    let secs = started.elapsed().as_secs_f64();
    match verdict {
        Ok(detail) => {
            println!("[PASS] {id:>2} {name:<28} {secs:>8.2}s  {detail}");
            true
        }
        Err(detail) => {
            println!("[FAIL] {id:>2} {name:<28} {secs:>8.2}s  {detail}");
            false
        }
    }
}

fn main() -> ExitCode {
    let cfg = SolverConfig::default();
    let mut passed = Vec::new();

    let t = Instant::now();
    passed.push(report(1, "certificate values", t, certificate_values()));
    let t = Instant::now();
    passed.push(report(2, "split identity", t, split_identity()));

    let t = Instant::now();
    let instances = small_instances(&cfg);
    passed.push(report(3, "equilibrium oracle", t, ne_oracle(&instances, &cfg)));
    let t = Instant::now();
    passed.push(report(4, "single-valued equilibrium", t, single_valued(&instances, &cfg)));
    let t = Instant::now();
    passed.push(report(5, "compression soundness", t, compression_sound(&instances, &cfg)));
    let t = Instant::now();
    passed.push(report(6, "complementarity", t, complementarity(&instances)));

    let t = Instant::now();
    passed.push(report(7, "violation-bound conformance", t, violation_conformance()));
    let t = Instant::now();
    passed.push(report(8, "a priori compression bound", t, a_priori_bound()));
    let t = Instant::now();
    passed.push(report(9, "max-simplex equivalence", t, max_simplex_equivalence()));
    let t = Instant::now();
    passed.push(report(10, "monotonicity probes", t, monotonicity(&instances, &cfg)));

    let ok = passed.iter().filter(|p| **p).count();
    println!("acceptance: {ok}/{} criteria passed", passed.len());
    if ok == passed.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

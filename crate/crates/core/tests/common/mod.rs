#![allow(dead_code)]

use scenario_nash_core::ev::{self, EvGame, EvScenario, DEFAULT_ENERGY_PER_12_SLOTS, DEFAULT_POWER_RANGE};
use scenario_nash_core::ScenarioSet;

pub fn instance(num_agents: usize, n: usize, m: usize, seed: u64) -> (EvGame, ScenarioSet<EvScenario>) {
    let agents = ev::ev_sample_agents(num_agents, n, DEFAULT_POWER_RANGE, DEFAULT_ENERGY_PER_12_SLOTS, seed).unwrap();
    let game = EvGame::with_nominal_prices(agents).unwrap();
    let scenarios = ev::ev_sample_scenarios(n, m, 0.05f64.ln(), 0.5, (0.0, 0.5), seed ^ 0x5eed).unwrap();
    (game, scenarios)
}

/// The ten small instances used by the solver checks.
pub fn small_instances() -> Vec<(EvGame, ScenarioSet<EvScenario>)> {
    let shapes = [
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
    shapes
        .iter()
        .enumerate()
        .map(|(k, &(na, n, m))| instance(na, n, m, 1000 + k as u64))
        .collect()
}

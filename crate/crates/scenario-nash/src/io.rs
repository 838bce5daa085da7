//! File formats: the EV instance JSON and the CSV outputs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use scenario_nash_core::{EvGame, EvScenario, FeasibleSet, ScenarioGame, ScenarioSet, SolveTrace};

/// One agent's charging requirement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "P")]
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// `{n, N, a0[], b0[], agents:[{E,P}], scenarios:[{a[],b[]}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvInstance {
    pub n: usize,
    #[serde(rename = "N")]
    pub num_agents: usize,
    pub a0: Vec<f64>,
    pub b0: Vec<f64>,
    pub agents: Vec<AgentSpec>,
    pub scenarios: Vec<ScenarioSpec>,
}

impl EvInstance {
    pub fn from_parts(game: &EvGame, scenarios: &ScenarioSet<EvScenario>) -> Self {
        Self {
            n: game.dim(),
            num_agents: game.num_agents(),
            a0: game.a0().to_vec(),
            b0: game.b0().to_vec(),
            agents: game
                .agents()
                .iter()
                .map(|fs| AgentSpec {
                    energy: fs.budget,
                    power: fs.cap,
                })
                .collect(),
            scenarios: scenarios
                .iter()
                .map(|s| ScenarioSpec {
                    a: s.a.clone(),
                    b: s.b.clone(),
                })
                .collect(),
        }
    }

    /// Validates the instance and builds the game and its scenario set.
    pub fn into_parts(self) -> Result<(EvGame, ScenarioSet<EvScenario>)> {
        anyhow::ensure!(
            self.agents.len() == self.num_agents,
            "instance declares N = {} but lists {} agents",
            self.num_agents,
            self.agents.len()
        );
        let agents = self
            .agents
            .iter()
            .map(|a| FeasibleSet::new(a.energy, a.power, self.n))
            .collect::<Result<Vec<_>, _>>()?;
        anyhow::ensure!(self.a0.len() == self.n, "a0 has length {}, expected n = {}", self.a0.len(), self.n);
        let game = EvGame::new(self.a0, self.b0, agents)?;
        let scenarios = self
            .scenarios
            .into_iter()
            .map(|s| EvScenario::new(s.a, s.b))
            .collect::<Result<Vec<_>, _>>()?;
        let scenarios = ScenarioSet::new(scenarios)?;
        game.validate_scenarios(&scenarios)?;
        Ok((game, scenarios))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let file = create(path)?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

/// Writes serialisable rows as CSV with a header taken from the field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Solver trace in the `k,residual,inner_iters,eta` layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCsvRow {
    pub k: usize,
    pub residual: f64,
    pub inner_iters: usize,
    pub eta: f64,
}

pub fn trace_rows(trace: &SolveTrace) -> Vec<TraceCsvRow> {
    trace
        .records
        .iter()
        .map(|r| TraceCsvRow {
            k: r.k,
            residual: r.change,
            inner_iters: r.inner_iters,
            eta: r.eta,
        })
        .collect()
}

pub fn write_trace_csv(path: &Path, trace: &SolveTrace) -> Result<()> {
    write_csv(path, &trace_rows(trace))
}

/// Per-draw uncertain cost of a fresh scenario at `x*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawCsvRow {
    pub draw: usize,
    pub g: f64,
    pub violation: bool,
}

pub fn write_draws_csv(path: &Path, costs: &[f64], gamma_star: f64) -> Result<()> {
    let rows: Vec<DrawCsvRow> = costs
        .iter()
        .enumerate()
        .map(|(draw, &g)| DrawCsvRow {
            draw,
            g,
            violation: g > gamma_star,
        })
        .collect();
    write_csv(path, &rows)
}

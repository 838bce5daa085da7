use scenario_nash::config::ExperimentConfig;
use scenario_nash::experiments::{run_certificate_table, sample_instance};
use scenario_nash::io::{self, EvInstance};
use scenario_nash_core::{ScenarioGame, SolverConfig};

#[test]
fn instance_json_roundtrip() {
    let cfg = ExperimentConfig::default();
    let (game, scenarios) = sample_instance(&cfg, 4, 7, 11).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.json");
    EvInstance::from_parts(&game, &scenarios).write(&path).unwrap();
    let back = EvInstance::read(&path).unwrap();
    assert_eq!(back, EvInstance::from_parts(&game, &scenarios));
    let (g2, s2) = back.into_parts().unwrap();
    assert_eq!(g2.dim(), 4);
    assert_eq!(g2.num_agents(), cfg.num_agents);
    assert_eq!(s2.len(), 7);
    assert_eq!(g2.a0(), game.a0());
}

#[test]
fn instance_json_uses_short_keys() {
    let cfg = ExperimentConfig::default();
    let (game, scenarios) = sample_instance(&cfg, 2, 1, 3).unwrap();
    let v = serde_json::to_value(EvInstance::from_parts(&game, &scenarios)).unwrap();
    assert!(v.get("N").is_some() && v.get("n").is_some());
    assert!(v["agents"][0].get("E").is_some() && v["agents"][0].get("P").is_some());
}

#[test]
fn malformed_instances_are_rejected() {
    let cfg = ExperimentConfig::default();
    let (game, scenarios) = sample_instance(&cfg, 3, 2, 5).unwrap();
    let mut bad = EvInstance::from_parts(&game, &scenarios);
    bad.num_agents += 1;
    assert!(bad.into_parts().is_err());
    let mut bad = EvInstance::from_parts(&game, &scenarios);
    bad.scenarios[0].a.pop();
    assert!(bad.into_parts().is_err());
    let mut bad = EvInstance::from_parts(&game, &scenarios);
    bad.agents[0].energy = 1e6;
    assert!(bad.into_parts().is_err());
}

#[test]
fn config_defaults_and_partial_files() {
    let cfg: ExperimentConfig = serde_json::from_str("{}").unwrap();
    assert_eq!(cfg, ExperimentConfig::default());
    assert_eq!((cfg.num_agents, cfg.n, cfg.num_scenarios), (5, 6, 500));
    assert_eq!(cfg.seeds.len(), 20);
    assert_eq!(cfg.solver_config(), SolverConfig::default());

    let cfg: ExperimentConfig = serde_json::from_str(r#"{"N": 3, "solver": {"tau": 2.0}}"#).unwrap();
    assert_eq!(cfg.num_agents, 3);
    assert_eq!(cfg.solver.tau, 2.0);
    assert_eq!(cfg.solver.gamma_out, SolverConfig::default().gamma_out);
}

#[test]
fn config_rejects_unknown_and_invalid_fields() {
    assert!(serde_json::from_str::<ExperimentConfig>(r#"{"typo": 1}"#).is_err());
    assert!(serde_json::from_str::<ExperimentConfig>(r#"{"solver": {"tua": 1}}"#).is_err());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"beta": 1.5}"#).unwrap();
    assert!(ExperimentConfig::load(&path).is_err());
    std::fs::write(&path, r#"{"seeds": []}"#).unwrap();
    assert!(ExperimentConfig::load(&path).is_err());
    std::fs::write(&path, r#"{"M": 50}"#).unwrap();
    assert_eq!(ExperimentConfig::load(&path).unwrap().num_scenarios, 50);
}

#[test]
fn draws_csv_flags_strict_exceedance() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("draws.csv");
    io::write_draws_csv(&path, &[0.5, 1.0, 1.5], 1.0).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, "draw,g,violation\n0,0.5,false\n1,1.0,false\n2,1.5,true\n");
}

fn small_table_config(dir: &std::path::Path) -> ExperimentConfig {
    ExperimentConfig {
        num_agents: 2,
        n: 2,
        num_scenarios: 30,
        seeds: vec![4, 5],
        fresh_draws: 500,
        output_dir: dir.to_path_buf(),
        ..ExperimentConfig::default()
    }
}

#[test]
fn table_outputs_are_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [a.path(), b.path()] {
        let cfg = small_table_config(dir);
        run_certificate_table(&cfg).unwrap().write(dir).unwrap();
    }
    for file in ["table.csv", "table_runs.csv"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{file} differs");
    }
}

#[test]
fn single_scenario_table_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        num_scenarios: 1,
        seeds: vec![0],
        ..small_table_config(dir.path())
    };
    let report = run_certificate_table(&cfg).unwrap();
    assert_eq!(report.rows.len(), 1);
    let row = &report.rows[0];
    assert_eq!((row.d_star, row.runs), (1, 1));
    // k = M: the bound is vacuous.
    assert_eq!(row.eps_split_pct, 100.0);
    assert!(report.all_runs_conform());
}

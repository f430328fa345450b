//! Monte-Carlo batches and their CSV artifacts.

use std::fs;

use coopmtt::experiment::{
    compare, monte_carlo, read_steps, write_artifacts, ExperimentConfig, RunSettings,
};
use coopmtt::filter::{FilterConfig, Variant};
use coopmtt::scenario::reference_scenario;

fn batch(dir: &std::path::Path, workers: usize) {
    let scenario = reference_scenario();
    let config = ExperimentConfig {
        filter: FilterConfig {
            variant: Variant::Cg,
            ..Default::default()
        },
        run: RunSettings {
            mc_runs: 3,
            seed: 4,
            workers,
        },
        ..Default::default()
    };
    let result = monte_carlo(&scenario, &config.filter, &config.run).unwrap();
    assert!(result.failed_runs.is_empty());
    write_artifacts(dir, &result, &config, &scenario).unwrap();
}

#[test]
fn same_seed_gives_identical_artifacts_for_any_worker_count() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    batch(a.path(), 1);
    batch(b.path(), 3);
    // config.toml records the worker count and so differs
    for name in [
        "cg_steps.csv",
        "cg_runs.csv",
        "cg_counters.csv",
        "summary.csv",
        "truth.csv",
    ] {
        let (x, y) = (
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
        );
        assert_eq!(x, y, "{name}");
    }
    let steps = read_steps(&a.path().join("cg_steps.csv")).unwrap();
    assert_eq!(steps.len(), reference_scenario().truth.steps);
    let diff = compare(&steps, &read_steps(&b.path().join("cg_steps.csv")).unwrap()).unwrap();
    assert!(diff
        .iter()
        .all(|r| r.d_rmse == 0.0 && r.d_ospa == 0.0 && r.d_card_mean == 0.0));
}

#[test]
fn summary_is_upserted_per_variant() {
    let dir = tempfile::tempdir().unwrap();
    batch(dir.path(), 1);
    batch(dir.path(), 1);
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2, "{summary}");
}

#[test]
fn written_config_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    batch(dir.path(), 1);
    let path = dir.path().join("config.toml");
    let loaded = ExperimentConfig::load(path.to_str().unwrap()).unwrap();
    assert_eq!(loaded.filter.variant, Variant::Cg);
    assert_eq!(loaded.run.mc_runs, 3);
}

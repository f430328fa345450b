//! Monte-Carlo experiments: single runs over a scenario, aggregation across
//! runs, configuration files and CSV artifacts.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::consensus::CommCounter;
use crate::error::{Error, Result};
use crate::filter::{infer, step, Beliefs, FilterConfig, StepInput, Variant};
use crate::metrics::{agent_squared_errors, cardinality_stats, ospa};
use crate::scenario::{build_graphs, synthesize_frame, Scenario, ScenarioSpec};
use crate::seeding::{derive_seed, run_seed};

/// Purpose tag of the measurement stream.
const MEASUREMENT_STREAM: u64 = 0x6d65_6173;

// ============================================================================
// Configuration
// ============================================================================

/// Monte-Carlo settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub mc_runs: usize,
    pub seed: u64,
    /// Parallel runs; 0 uses the available parallelism.
    pub workers: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            mc_runs: 20,
            seed: 1,
            workers: 0,
        }
    }
}

/// Experiment file: `[run]`, `[filter]` and `[scenario]` tables, all optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunSettings,
    pub filter: FilterConfig,
    pub scenario: ScenarioSpec,
}

/// Name accepted in place of a file path for the builtin layout.
pub const BUILTIN_SCENARIO: &str = "reference";

impl ExperimentConfig {
    /// Parses an experiment file; error messages name the offending key.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// The builtin configuration or the contents of `source`.
    pub fn load(source: &str) -> Result<Self> {
        if source == BUILTIN_SCENARIO {
            return Ok(Self::default());
        }
        let text = fs::read_to_string(source)
            .map_err(|e| Error::Config(format!("cannot read `{source}`: {e}")))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Runtime(e.to_string()))
    }
}

// ============================================================================
// Single run
// ============================================================================

/// Metrics of one run at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepMetrics {
    pub t: usize,
    /// Sum of squared position errors over mobile agents.
    pub agent_sq_error: f64,
    pub n_mobile: usize,
    pub ospa: f64,
    pub cardinality: usize,
    pub true_cardinality: usize,
}

impl StepMetrics {
    pub fn rmse(&self) -> f64 {
        if self.n_mobile == 0 {
            0.0
        } else {
            (self.agent_sq_error / self.n_mobile as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub steps: Vec<StepMetrics>,
    pub comm: CommCounter,
    pub pt_failures: usize,
    pub agent_failures: usize,
}

/// Filters one realization of the measurements for steps 1..=steps.
pub fn run_once(
    scenario: &Scenario,
    cfg: &FilterConfig,
    run: usize,
    seed: u64,
) -> Result<RunResult> {
    let truth = &scenario.truth;
    let mobile = scenario.mobile_agents();
    let mut beliefs = Beliefs::initial(scenario, cfg.variant)?;
    let mut steps = Vec::with_capacity(truth.steps);
    let mut comm = CommCounter::default();
    let (mut pt_failures, mut agent_failures) = (0, 0);
    for t in 1..=truth.steps {
        let (graph, visible) = build_graphs(truth, t)?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, t as u64, MEASUREMENT_STREAM]));
        let frame = synthesize_frame(scenario, t, &graph, &visible, &mut rng)?;
        let input = StepInput {
            scenario,
            graph: &graph,
            frame: &frame,
            step: t,
            seed,
        };
        let (next, report) = step(&beliefs, input, cfg)?;
        beliefs = next;
        comm.add(&report.comm);
        pt_failures += report.pt_failures;
        agent_failures += report.agent_failures;

        let est = infer(&beliefs, cfg.existence_threshold);
        let true_agents: Vec<[f64; 2]> = (0..scenario.n_agents())
            .map(|s| {
                let y = truth.agent_state(s, t);
                [y[0], y[1]]
            })
            .collect();
        let sq = agent_squared_errors(&true_agents, &est.agent_positions(), &mobile);
        let true_targets = truth.target_positions(t);
        steps.push(StepMetrics {
            t,
            agent_sq_error: sq.iter().sum(),
            n_mobile: mobile.len(),
            ospa: ospa(&true_targets, &est.target_positions(), scenario.ospa),
            cardinality: est.targets.len(),
            true_cardinality: true_targets.len(),
        });
    }
    Ok(RunResult {
        run,
        seed,
        steps,
        comm,
        pt_failures,
        agent_failures,
    })
}

// ============================================================================
// Monte Carlo
// ============================================================================

/// Per-step aggregate over runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub t: usize,
    /// Root of the squared position error averaged over runs and mobile agents.
    pub rmse: f64,
    pub ospa_mean: f64,
    pub card_mean: f64,
    pub card_std: f64,
    pub true_card: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McResult {
    pub variant: Variant,
    pub runs: Vec<RunResult>,
    pub failed_runs: Vec<(usize, String)>,
    pub aggregate: Vec<AggregateRow>,
}

/// Time averages used for comparisons between variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub variant: String,
    pub mc_runs: usize,
    pub failed_runs: usize,
    pub mean_rmse: f64,
    pub mean_ospa: f64,
    pub mean_card_error: f64,
    pub reals_per_agent_per_run: f64,
}

impl McResult {
    pub fn summary(&self) -> Summary {
        let n = self.aggregate.len().max(1) as f64;
        let runs = self.runs.len().max(1) as f64;
        Summary {
            variant: self.variant.name().to_string(),
            mc_runs: self.runs.len(),
            failed_runs: self.failed_runs.len(),
            mean_rmse: self.aggregate.iter().map(|r| r.rmse).sum::<f64>() / n,
            mean_ospa: self.aggregate.iter().map(|r| r.ospa_mean).sum::<f64>() / n,
            mean_card_error: self
                .aggregate
                .iter()
                .map(|r| (r.card_mean - r.true_card as f64).abs())
                .sum::<f64>()
                / n,
            reals_per_agent_per_run: self
                .runs
                .iter()
                .map(|r| r.comm.reals_per_agent as f64)
                .sum::<f64>()
                / runs,
        }
    }
}

/// Aggregates runs step by step.
pub fn aggregate(runs: &[RunResult]) -> Vec<AggregateRow> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    (0..first.steps.len())
        .map(|i| {
            let rows: Vec<&StepMetrics> = runs.iter().map(|r| &r.steps[i]).collect();
            let sq: f64 = rows.iter().map(|m| m.agent_sq_error).sum();
            let count: usize = rows.iter().map(|m| m.n_mobile).sum();
            let cards: Vec<f64> = rows.iter().map(|m| m.cardinality as f64).collect();
            let (card_mean, card_std) = cardinality_stats(&cards);
            AggregateRow {
                t: rows[0].t,
                rmse: if count == 0 {
                    0.0
                } else {
                    (sq / count as f64).sqrt()
                },
                ospa_mean: rows.iter().map(|m| m.ospa).sum::<f64>() / rows.len() as f64,
                card_mean,
                card_std,
                true_card: rows[0].true_cardinality,
            }
        })
        .collect()
}

/// Runs `settings.mc_runs` independent runs, run r seeded with
/// [`run_seed`]`(settings.seed, r)`. Failed runs are reported, not fatal.
pub fn monte_carlo(
    scenario: &Scenario,
    cfg: &FilterConfig,
    settings: &RunSettings,
) -> Result<McResult> {
    if settings.mc_runs == 0 {
        return Err(Error::Config("mc_runs must be at least 1".into()));
    }
    cfg.validate()?;
    let workers = if settings.workers == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        settings.workers
    }
    .min(settings.mc_runs);
    let outcomes: Vec<(usize, Result<RunResult>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || {
                    (w..settings.mc_runs)
                        .step_by(workers)
                        .map(|r| (r, run_once(scenario, cfg, r, run_seed(settings.seed, r))))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    });
    let mut runs = Vec::new();
    let mut failed_runs = Vec::new();
    for (r, outcome) in outcomes {
        match outcome {
            Ok(res) => runs.push(res),
            Err(e) => {
                log::error!("run {r} failed: {e}");
                failed_runs.push((r, e.to_string()));
            }
        }
    }
    runs.sort_by_key(|r| r.run);
    failed_runs.sort();
    if runs.is_empty() {
        return Err(Error::Runtime(format!(
            "all {} runs failed",
            settings.mc_runs
        )));
    }
    let aggregate = aggregate(&runs);
    Ok(McResult {
        variant: cfg.variant,
        runs,
        failed_runs,
        aggregate,
    })
}

// ============================================================================
// Artifacts
// ============================================================================

const SCHEMA: &str = "\
<variant>_steps.csv    t, rmse, ospa_mean, card_mean, card_std, true_card
                       rmse: root of squared mobile-agent position error averaged over runs and agents (m)
                       ospa_mean: OSPA averaged over runs (m); card_*: confirmed-target count over runs
<variant>_runs.csv     run, seed, t, rmse, ospa, cardinality, true_cardinality
<variant>_counters.csv run, seed, invocations, rounds, reals_per_agent, label_entries_per_agent, pt_failures, agent_failures
summary.csv            variant, mc_runs, failed_runs, mean_rmse, mean_ospa, mean_card_error, reals_per_agent_per_run
truth.csv              t, id, px, py, vx, vy (a<i> agents, t<k> targets)
config.toml            the resolved experiment configuration
diff.csv (compare)     t, d_rmse, d_ospa, d_card_mean (first minus second)
";

/// Writes every artifact of `result` into `dir`, appending to summary.csv.
pub fn write_artifacts(
    dir: &Path,
    result: &McResult,
    config: &ExperimentConfig,
    scenario: &Scenario,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let name = result.variant.name().to_lowercase();
    fs::write(dir.join("schema.txt"), SCHEMA)?;
    fs::write(dir.join("config.toml"), config.to_toml()?)?;
    scenario
        .truth
        .write_csv(fs::File::create(dir.join("truth.csv"))?)?;

    let mut w = csv::Writer::from_path(dir.join(format!("{name}_steps.csv")))?;
    for row in &result.aggregate {
        w.serialize(row)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join(format!("{name}_runs.csv")))?;
    w.write_record([
        "run",
        "seed",
        "t",
        "rmse",
        "ospa",
        "cardinality",
        "true_cardinality",
    ])?;
    for r in &result.runs {
        for m in &r.steps {
            w.write_record([
                r.run.to_string(),
                r.seed.to_string(),
                m.t.to_string(),
                m.rmse().to_string(),
                m.ospa.to_string(),
                m.cardinality.to_string(),
                m.true_cardinality.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join(format!("{name}_counters.csv")))?;
    w.write_record([
        "run",
        "seed",
        "invocations",
        "rounds",
        "reals_per_agent",
        "label_entries_per_agent",
        "pt_failures",
        "agent_failures",
    ])?;
    for r in &result.runs {
        w.write_record([
            r.run.to_string(),
            r.seed.to_string(),
            r.comm.invocations.to_string(),
            r.comm.rounds.to_string(),
            r.comm.reals_per_agent.to_string(),
            r.comm.label_entries_per_agent.to_string(),
            r.pt_failures.to_string(),
            r.agent_failures.to_string(),
        ])?;
    }
    w.flush()?;

    let summary_path = dir.join("summary.csv");
    let mut rows: Vec<Summary> = if summary_path.exists() {
        csv::Reader::from_path(&summary_path)?
            .deserialize()
            .collect::<std::result::Result<_, _>>()?
    } else {
        Vec::new()
    };
    let new = result.summary();
    rows.retain(|r| r.variant != new.variant);
    rows.push(new);
    let mut w = csv::Writer::from_path(&summary_path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `<variant>_steps.csv` file.
pub fn read_steps(path: &Path) -> Result<Vec<AggregateRow>> {
    if !path.exists() {
        return Err(Error::Config(format!(
            "`{}` does not exist",
            path.display()
        )));
    }
    Ok(csv::Reader::from_path(path)?
        .deserialize()
        .collect::<std::result::Result<_, _>>()?)
}

/// Per-step differences (first minus second) between two aggregate files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiffRow {
    pub t: usize,
    pub d_rmse: f64,
    pub d_ospa: f64,
    pub d_card_mean: f64,
}

pub fn compare(a: &[AggregateRow], b: &[AggregateRow]) -> Result<Vec<DiffRow>> {
    if a.len() != b.len() {
        return Err(Error::Config(format!(
            "step counts differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            if x.t != y.t {
                return Err(Error::Config(format!(
                    "time indices differ: {} vs {}",
                    x.t, y.t
                )));
            }
            Ok(DiffRow {
                t: x.t,
                d_rmse: x.rmse - y.rmse,
                d_ospa: x.ospa_mean - y.ospa_mean,
                d_card_mean: x.card_mean - y.card_mean,
            })
        })
        .collect()
}

/// Writes [`compare`] output as CSV.
pub fn write_diff(path: &Path, rows: &[DiffRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

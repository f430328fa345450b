//! `coopmtt`: batch runner for the cooperative localization and tracking filters.
//!
//! Every flag can also be set through an environment variable with the
//! `COOPMTT_` prefix, e.g. `COOPMTT_MC_RUNS=5`. Flags override the experiment
//! file, which overrides the builtin defaults.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coopmtt::experiment::{
    compare, monte_carlo, read_steps, write_artifacts, write_diff, ExperimentConfig,
};
use coopmtt::filter::Variant;
use coopmtt::Error;

#[derive(Debug, Parser)]
#[command(
    name = "coopmtt",
    version,
    about = "Cooperative self-localization and multi-target tracking experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run Monte-Carlo experiments and write CSV artifacts.
    Run(RunArgs),
    /// Per-step differences between two `<variant>_steps.csv` files.
    Compare {
        first: PathBuf,
        second: PathBuf,
        /// Output CSV; printed to stdout when omitted.
        #[arg(long, env = "COOPMTT_COMPARE_OUT")]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Builtin scenario name ("reference") or path to an experiment TOML file.
    #[arg(long, env = "COOPMTT_SCENARIO", default_value = "reference")]
    scenario: String,
    /// Filter variants, comma separated (CGM, DGM, CG, DG, CGM-SPAWN, CG-SPAWN).
    #[arg(long, env = "COOPMTT_VARIANT", value_delimiter = ',')]
    variant: Vec<Variant>,
    #[arg(long, env = "COOPMTT_MC_RUNS")]
    mc_runs: Option<usize>,
    /// Master seed; run r uses a SplitMix64 hash of (seed, r).
    #[arg(long, env = "COOPMTT_SEED")]
    seed: Option<u64>,
    /// Gibbs sweeps per product (Hogwild rounds for DGM).
    #[arg(long, env = "COOPMTT_GIBBS_ITERS")]
    gibbs_iters: Option<usize>,
    /// Consensus rounds per consensus invocation.
    #[arg(long, env = "COOPMTT_CONSENSUS_ITERS")]
    consensus_iters: Option<usize>,
    /// Message-passing iterations per time step.
    #[arg(long, env = "COOPMTT_OUTER_ITERS")]
    outer_iters: Option<usize>,
    #[arg(long, env = "COOPMTT_OUT", default_value = "results")]
    out: PathBuf,
    /// Parallel runs; 0 uses every available core.
    #[arg(long, env = "COOPMTT_WORKERS")]
    workers: Option<usize>,
}

fn resolve(args: &RunArgs) -> coopmtt::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.scenario)?;
    if let Some(v) = args.mc_runs {
        cfg.run.mc_runs = v;
    }
    if let Some(v) = args.seed {
        cfg.run.seed = v;
    }
    if let Some(v) = args.workers {
        cfg.run.workers = v;
    }
    if let Some(v) = args.gibbs_iters {
        cfg.filter.gibbs_sweeps = v;
    }
    if let Some(v) = args.consensus_iters {
        cfg.filter.consensus_rounds = v;
    }
    if let Some(v) = args.outer_iters {
        cfg.filter.outer_iters = v;
    }
    if cfg.run.mc_runs == 0 {
        return Err(Error::Config("mc_runs must be at least 1".into()));
    }
    cfg.filter.validate()?;
    Ok(cfg)
}

fn run(args: RunArgs) -> coopmtt::Result<()> {
    let cfg = resolve(&args)?;
    let scenario = cfg.scenario.build()?;
    std::fs::create_dir_all(&args.out).map_err(|e| {
        Error::Config(format!(
            "output directory `{}` is not writable: {e}",
            args.out.display()
        ))
    })?;
    let variants = if args.variant.is_empty() {
        vec![cfg.filter.variant]
    } else {
        args.variant.clone()
    };
    for variant in variants {
        let mut run_cfg = cfg.clone();
        run_cfg.filter.variant = variant;
        log::info!(
            "{variant}: {} runs, seed {}",
            run_cfg.run.mc_runs,
            run_cfg.run.seed
        );
        let result = monte_carlo(&scenario, &run_cfg.filter, &run_cfg.run)?;
        write_artifacts(&args.out, &result, &run_cfg, &scenario)?;
        let s = result.summary();
        println!(
            "{:<10} runs {:>3} (failed {}) mean RMSE {:.3} m, mean OSPA {:.3} m, mean |card error| {:.3}",
            s.variant, s.mc_runs, s.failed_runs, s.mean_rmse, s.mean_ospa, s.mean_card_error
        );
    }
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Compare { first, second, out } => (|| {
            let diff = compare(&read_steps(&first)?, &read_steps(&second)?)?;
            match out {
                Some(path) => write_diff(&path, &diff),
                None => {
                    println!("t,d_rmse,d_ospa,d_card_mean");
                    for r in diff {
                        println!("{},{},{},{}", r.t, r.d_rmse, r.d_ospa, r.d_card_mean);
                    }
                    Ok(())
                }
            }
        })(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

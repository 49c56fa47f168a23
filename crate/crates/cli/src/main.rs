use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use aimsim::auction::{calibrate_passes, quality_ratios, quality_row, quality_table, Budget, DEFAULT_NP, DEFAULT_PASSES, DEFAULT_WP};
use aimsim::engine;
use aimsim::experiment::{self, Options, Preset};
use aimsim::scenario::ScenarioDoc;

/// Reservation-based intersection simulator.
#[derive(Debug, Parser)]
#[command(name = "aimsim", version, about)]
struct Cli {
    /// Root directory for outputs when --out is not given.
    #[arg(long, global = true, env = "AIMSIM_OUT_DIR", default_value = "aimsim-out")]
    out_root: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write its result tables.
    Run(RunArgs),
    /// Run a preset over several seeds and summarize it.
    Experiment(ExperimentArgs),
    /// Compare the stochastic winner determination against the exact solver.
    WdpBench(BenchArgs),
    /// Recompute the summary tables of an experiment directory.
    Summarize {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key=value` setting of the [run] table; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// One of bid-delay, ca-vs-fcfs, reservation-distance, cta-grid, ca-cta-grid.
    #[arg(long)]
    preset: String,
    /// Number of seeds; defaults to the preset's.
    #[arg(long, default_value_t = 0)]
    seeds: usize,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces the preset's scenario.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Bid counts, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [3usize, 10, 20, 40, 80])]
    bids: Vec<usize>,
    #[arg(long, default_value_t = 40)]
    instances: usize,
    /// Outer passes per instance.
    #[arg(long, default_value_t = DEFAULT_PASSES)]
    passes: u32,
    /// Wall-clock budget per instance in milliseconds, instead of passes.
    #[arg(long)]
    wall_ms: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_WP)]
    wp: f64,
    #[arg(long, default_value_t = DEFAULT_NP)]
    np: f64,
    /// Largest instance the exact solver accepts.
    #[arg(long, default_value_t = 100)]
    oracle_cap: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Take the instances from auction rounds simulated on this
    /// single-intersection scenario instead of generating them.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Arrival rates simulated with --scenario.
    #[arg(long, value_delimiter = ',', default_values_t = experiment::LAMBDA_GRID)]
    lambdas: Vec<f64>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Only measure search passes per second for each bid count.
    #[arg(long)]
    calibrate: bool,
    /// Also write the table to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_scenario(path: &Path) -> Result<ScenarioDoc> {
    ScenarioDoc::load(path).with_context(|| format!("cannot load scenario {}", path.display()))
}

fn run(args: RunArgs, root: &Path) -> Result<ExitCode> {
    let mut doc = load_scenario(&args.scenario)?;
    doc.apply_overrides(&args.sets)?;
    if let Some(seed) = args.seed {
        doc.run.seed = seed;
    }
    let results = engine::run(&doc).with_context(|| format!("scenario {}", args.scenario.display()))?;
    let out = args.out.unwrap_or_else(|| {
        let name = if doc.name.is_empty() { "run" } else { doc.name.as_str() };
        root.join(format!("{name}-{}-seed{}", doc.run.mode, doc.run.seed))
    });
    results.write_dir(&out, &doc.run)?;
    let done = results.completed().count();
    println!(
        "{}: {} spawned, {done} completed, mean delay {:.2} s -> {}",
        doc.run.mode,
        results.spawned,
        results.mean_delay().unwrap_or(0.0),
        out.display()
    );
    if results.partial {
        eprintln!("horizon reached with {} vehicles still inside", results.spawned as usize - done);
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn run_experiment(args: ExperimentArgs, root: &Path) -> Result<ExitCode> {
    let preset: Preset = args.preset.parse()?;
    let options = Options {
        seeds: args.seeds,
        jobs: args.jobs,
        overrides: args.sets,
        scenario: args.scenario.as_deref().map(load_scenario).transpose()?,
    };
    let out = args.out.unwrap_or_else(|| root.join(preset.as_str()));
    let summary = experiment::run_experiment(preset, &options, &out)?;
    print_summary(&summary);
    println!("tables written to {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn print_summary(summary: &experiment::Summary) {
    const SHOWN: [&str; 6] = [
        "mean_delay_s",
        "rejections",
        "mean_d_i_m",
        "final_moving_average_s",
        "mean_normalized_delay",
        "bids_per_round",
    ];
    for r in summary
        .rows
        .iter()
        .filter(|r| SHOWN.contains(&r.metric.as_str()) || r.metric.starts_with("tracked_delay_") || r.metric.starts_with("nd_bid_"))
    {
        println!(
            "{:<10} {:<24} {:>12.3}  [{:.3}, {:.3}]  n={}",
            r.variant, r.metric, r.mean, r.ci_low, r.ci_high, r.n
        );
    }
    for r in summary.congestion.iter().filter(|r| r.busiest) {
        println!(
            "{:<10} busiest {} integral {:.2} vs fcfs {:.2} veh·h/km",
            r.variant, r.intersection, r.mean, r.fcfs_mean
        );
    }
}

fn bench(args: BenchArgs) -> Result<ExitCode> {
    if args.bids.is_empty() || args.instances == 0 {
        bail!("need at least one bid count and one instance");
    }
    let mut text = String::new();
    if args.calibrate {
        text.push_str("bids,passes_per_s\n");
        for &n in &args.bids {
            let rate = calibrate_passes(n, Duration::from_millis(500), args.seed);
            text.push_str(&format!("{n},{rate:.0}\n"));
        }
    } else {
        let budget = match args.wall_ms {
            Some(ms) => Budget::WallClock(Duration::from_millis(ms)),
            None => Budget::Passes(args.passes),
        };
        let (rows, ratios) = match &args.scenario {
            Some(path) => {
                let mut doc = load_scenario(path)?;
                doc.apply_overrides(&args.sets)?;
                doc.run.seed = args.seed;
                let mut rows = Vec::new();
                let mut all = Vec::new();
                for (lo, sets) in experiment::recorded_instances(&doc, &args.lambdas, args.instances)? {
                    if sets.is_empty() {
                        continue;
                    }
                    let ratios = quality_ratios(&sets, budget, args.wp, args.np, args.oracle_cap, args.seed)?;
                    all.extend_from_slice(&ratios);
                    rows.push(quality_row(lo, ratios));
                }
                (rows, all)
            }
            None => quality_table(&args.bids, args.instances, budget, args.wp, args.np, args.oracle_cap, args.seed)?,
        };
        text.push_str("bids,instances,min,p10,median,mean,share_95\n");
        for r in &rows {
            text.push_str(&format!(
                "{},{},{:.4},{:.4},{:.4},{:.4},{:.4}\n",
                r.bids, r.instances, r.min, r.p10, r.median, r.mean, r.share_95
            ));
        }
        let share = ratios.iter().filter(|&&r| r >= 0.95 - 1e-12).count() as f64 / ratios.len() as f64;
        text.push_str(&format!("all,{},,,,,{share:.4}\n", ratios.len()));
    }
    print!("{text}");
    if let Some(path) = args.out {
        std::fs::write(&path, &text).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args, &cli.out_root),
        Command::Experiment(args) => run_experiment(args, &cli.out_root),
        Command::WdpBench(args) => bench(args),
        Command::Summarize { out } => experiment::summarize(&out).map(|s| {
            print_summary(&s);
            ExitCode::SUCCESS
        }).map_err(Into::into),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

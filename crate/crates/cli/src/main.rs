//! Command-line front end for the hybrid channel allocation toolkit.
//!
//! Subcommands cover the whole pipeline: summarize traces, compute a plan,
//! simulate it, train the traffic predictor, and benchmark strategies
//! against each other. All randomness flows from explicit seeds; identical
//! inputs produce byte-identical outputs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ohca_core::allocators::allocate;
use ohca_core::error::{Error, Result};
use ohca_core::mlp::{
    encode_dataset, mlp_train, read_dataset_csv, synth_traffic_dataset, write_dataset_csv,
    MlpModel, TrainConfig,
};
use ohca_core::plan::{average_allocation, AllocationPlan, ObjectiveDirection, Strategy, StrategyParams};
use ohca_core::sim::{evaluate_plan, run_hca_simulation, split_channels, ScenarioConfig};
use ohca_core::traffic::{
    idle_time_probabilities, inverse_packet_count_probabilities, read_probs_csv, read_traces_csv,
    summarize_traces, ChannelBounds, ProbabilityVector,
};

#[derive(Parser)]
#[command(name = "ohca", version, about = "Hybrid channel allocation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce a trace CSV to per-station idle time and packet count.
    Summarize {
        /// Trace CSV with header `station,slot,busy_seconds,packets`.
        #[arg(long)]
        trace: PathBuf,
        /// Slot length in seconds.
        #[arg(long)]
        window_length: f64,
        /// Output CSV path; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute a fixed-channel plan and print its objective value.
    Allocate {
        /// Probability CSV with header `station,probability`.
        #[arg(long, conflicts_with = "trace")]
        probs: Option<PathBuf>,
        /// Trace CSV to derive probabilities from.
        #[arg(long, requires = "window_length")]
        trace: Option<PathBuf>,
        /// Slot length in seconds for `--trace`.
        #[arg(long)]
        window_length: Option<f64>,
        /// Probability source for `--trace`: `idle` or `packets`.
        #[arg(long, default_value = "idle")]
        source: String,
        /// Strategy token: ap1 | ap2 | ap3 | gp4 | source | uniform.
        #[arg(long)]
        strategy: String,
        /// Channel budget L.
        #[arg(long)]
        channels: u32,
        /// Lower per-station channel bound (ap2/ap3/gp4).
        #[arg(long)]
        lmin: Option<u32>,
        /// Upper per-station channel bound; defaults to `--lmin`.
        #[arg(long)]
        lmax: Option<u32>,
        /// Objective direction: `min` or `max`.
        #[arg(long, default_value = "min")]
        direction: String,
        /// Output base path: writes `<out>.csv` and `<out>.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the hybrid simulator for one scenario and plan.
    Simulate {
        /// Scenario JSON file.
        #[arg(long)]
        scenario: PathBuf,
        /// Plan CSV (`station,channels`); the unassigned remainder of the
        /// scenario's channels becomes the dynamic pool.
        #[arg(long, conflicts_with = "strategy")]
        plan: Option<PathBuf>,
        /// Strategy token to allocate the scenario's fixed share with.
        #[arg(long)]
        strategy: Option<String>,
        /// Lower per-station channel bound (ap2/ap3/gp4).
        #[arg(long)]
        lmin: Option<u32>,
        /// Upper per-station channel bound; defaults to `--lmin`.
        #[arg(long)]
        lmax: Option<u32>,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Metrics CSV path; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the traffic predictor and save the model as JSON.
    Train {
        /// Dataset CSV with header `bsn,is_weekend,slot,idle_time,packet_count`.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Stations in the synthetic dataset (when `--dataset` is omitted).
        #[arg(long, default_value_t = 4)]
        stations: usize,
        /// Days in the synthetic dataset.
        #[arg(long, default_value_t = 30)]
        days: u32,
        /// Slots per day.
        #[arg(long, default_value_t = 24)]
        slots: u32,
        /// Noise amplitude of the synthetic dataset.
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
        /// Hidden layer width.
        #[arg(long, default_value_t = 16)]
        hidden: usize,
        #[arg(long, default_value_t = 0.05)]
        learning_rate: f64,
        #[arg(long, default_value_t = 300)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        /// Seed for weight init, shuffling, and synthetic data.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Model JSON output path.
        #[arg(long)]
        out: PathBuf,
        /// Optionally dump the dataset that was trained on.
        #[arg(long)]
        dump_dataset: Option<PathBuf>,
    },
    /// Compare strategies on one scenario over shared seeds.
    Benchmark {
        /// Scenario JSON file.
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated strategy tokens.
        #[arg(long, value_delimiter = ',')]
        strategies: Vec<String>,
        /// Comma-separated seeds, reused across strategies.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Lower per-station channel bound (ap2/ap3/gp4).
        #[arg(long)]
        lmin: Option<u32>,
        /// Upper per-station channel bound; defaults to `--lmin`.
        #[arg(long)]
        lmax: Option<u32>,
        /// Comparison CSV path; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn bounds_from_flags(lmin: Option<u32>, lmax: Option<u32>) -> Result<Option<ChannelBounds>> {
    match (lmin, lmax) {
        (Some(lo), hi) => Ok(Some(ChannelBounds::new(lo, hi.unwrap_or(lo))?)),
        (None, Some(_)) => Err(Error::InvalidInput(
            "--lmax requires --lmin".into(),
        )),
        (None, None) => Ok(None),
    }
}

fn probs_from_trace(path: &Path, window_length: f64, source: &str) -> Result<ProbabilityVector> {
    let traces = read_traces_csv(open(path)?, window_length)?;
    let stats = summarize_traces(&traces)?;
    match source {
        "idle" => idle_time_probabilities(&stats),
        "packets" => inverse_packet_count_probabilities(&stats),
        other => Err(Error::InvalidInput(format!(
            "source must be `idle` or `packets`, got `{other}`"
        ))),
    }
}

fn cmd_summarize(trace: &Path, window_length: f64, out: Option<&Path>) -> Result<()> {
    let traces = read_traces_csv(open(trace)?, window_length)?;
    let stats = summarize_traces(&traces)?;
    let mut text = String::from("station,idle_time,packet_count\n");
    for s in &stats {
        text.push_str(&format!("{},{},{}\n", s.station_id, s.idle_time, s.packet_count));
    }
    match out {
        Some(path) => create(path)?.write_all(text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_allocate(
    probs_path: Option<&Path>,
    trace: Option<&Path>,
    window_length: Option<f64>,
    source: &str,
    strategy: &str,
    channels: u32,
    lmin: Option<u32>,
    lmax: Option<u32>,
    direction: &str,
    out: &Path,
) -> Result<()> {
    let probs = match (probs_path, trace) {
        (Some(path), None) => read_probs_csv(open(path)?)?,
        (None, Some(path)) => {
            let window = window_length
                .ok_or_else(|| Error::InvalidInput("--trace requires --window-length".into()))?;
            probs_from_trace(path, window, source)?
        }
        _ => {
            return Err(Error::InvalidInput(
                "exactly one of --probs or --trace is required".into(),
            ))
        }
    };
    let strategy: Strategy = strategy.parse()?;
    let direction: ObjectiveDirection = direction.parse()?;
    let bounds = bounds_from_flags(lmin, lmax)?;
    let plan = allocate(strategy, channels, &probs, bounds.as_ref(), direction)?;
    let objective = average_allocation(&plan, &probs)?;

    let csv_path = out.with_extension("csv");
    let json_path = out.with_extension("json");
    let mut csv_writer = create(&csv_path)?;
    plan.write_csv(&mut csv_writer)?;
    csv_writer.flush()?;
    let mut json_writer = create(&json_path)?;
    serde_json::to_writer_pretty(&mut json_writer, &plan).map_err(Error::from)?;
    json_writer.write_all(b"\n")?;
    json_writer.flush()?;

    println!("objective {objective}");
    Ok(())
}

fn cmd_simulate(
    scenario_path: &Path,
    plan_path: Option<&Path>,
    strategy: Option<&str>,
    lmin: Option<u32>,
    lmax: Option<u32>,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<()> {
    let mut scenario = ScenarioConfig::read_json(open(scenario_path)?)?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let (plan, pool) = match (plan_path, strategy) {
        (Some(path), None) => {
            let counts = AllocationPlan::read_counts_csv(open(path)?)?;
            let fixed: u64 = counts.iter().map(|&c| c as u64).sum();
            if fixed > scenario.total_channels as u64 {
                return Err(Error::SeriesExceedsBudget {
                    required: fixed,
                    budget: scenario.total_channels,
                });
            }
            let pool = scenario.total_channels - fixed as u32;
            let plan = AllocationPlan::new(
                counts,
                fixed as u32,
                Strategy::UniformFca,
                StrategyParams::default(),
            )?;
            (plan, pool)
        }
        (None, Some(token)) => {
            let strategy: Strategy = token.parse()?;
            let probs = scenario.probability_vector()?;
            let bounds = bounds_from_flags(lmin, lmax)?;
            let (fixed, dynamic) = split_channels(scenario.total_channels, scenario.fixed_fraction);
            let plan = allocate(
                strategy,
                fixed,
                &probs,
                bounds.as_ref(),
                ObjectiveDirection::Minimize,
            )?;
            let pool = dynamic + plan.residual_to_pool;
            (plan, pool)
        }
        _ => {
            return Err(Error::InvalidInput(
                "exactly one of --plan or --strategy is required".into(),
            ))
        }
    };
    let metrics = run_hca_simulation(&scenario, &plan, pool)?;
    match out {
        Some(path) => {
            let mut writer = create(path)?;
            metrics.write_csv(&mut writer)?;
            writer.flush()?;
        }
        None => {
            let mut buf = Vec::new();
            metrics.write_csv(&mut buf)?;
            print!("{}", String::from_utf8_lossy(&buf));
        }
    }
    println!("{}", metrics.summary_line());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    dataset_path: Option<&Path>,
    stations: usize,
    days: u32,
    slots: u32,
    noise: f64,
    hidden: usize,
    config: &TrainConfig,
    out: &Path,
    dump_dataset: Option<&Path>,
) -> Result<()> {
    let rows = match dataset_path {
        Some(path) => read_dataset_csv(open(path)?)?,
        None => synth_traffic_dataset(stations, days, slots, noise, config.seed),
    };
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let stations = rows.iter().map(|r| r.bsn).max().expect("non-empty") + 1;
    let slots = rows.iter().map(|r| r.slot).max().expect("non-empty") + 1;
    if let Some(path) = dump_dataset {
        let mut writer = create(path)?;
        write_dataset_csv(&rows, &mut writer)?;
        writer.flush()?;
    }
    let dataset = encode_dataset(&rows, stations, slots)?;
    let model = MlpModel::new(&[stations + 3, hidden, 2], config.seed)?;
    let (trained, history) = mlp_train(&model, &dataset, config)?;
    let mut writer = create(out)?;
    trained.write_json(&mut writer)?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    println!(
        "epochs {} initial_mse {} final_mse {}",
        history.len(),
        history.first().expect("epochs > 0"),
        history.last().expect("epochs > 0"),
    );
    Ok(())
}

fn cmd_benchmark(
    scenario_path: &Path,
    strategies: &[String],
    seeds: &[u64],
    lmin: Option<u32>,
    lmax: Option<u32>,
    out: Option<&Path>,
) -> Result<()> {
    if strategies.is_empty() {
        return Err(Error::InvalidInput("no strategies given".into()));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidInput("no seeds given".into()));
    }
    let scenario = ScenarioConfig::read_json(open(scenario_path)?)?;
    let probs = scenario.probability_vector()?;
    let bounds = bounds_from_flags(lmin, lmax)?;
    let (fixed, _) = split_channels(scenario.total_channels, scenario.fixed_fraction);

    let mut parsed: Vec<Strategy> = strategies
        .iter()
        .map(|token| token.parse())
        .collect::<Result<_>>()?;
    parsed.sort_by_key(|s| s.token());
    parsed.dedup();

    let mut text = String::from("strategy,objective,mean_blocking,std_blocking\n");
    for strategy in parsed {
        let plan = allocate(strategy, fixed, &probs, bounds.as_ref(), ObjectiveDirection::Minimize)?;
        let eval = evaluate_plan(&scenario, &plan, seeds)?;
        text.push_str(&format!(
            "{},{},{},{}\n",
            strategy.token(),
            eval.objective,
            eval.mean_blocking,
            eval.std_blocking
        ));
    }
    match out {
        Some(path) => create(path)?.write_all(text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Summarize {
            trace,
            window_length,
            out,
        } => cmd_summarize(&trace, window_length, out.as_deref()),
        Command::Allocate {
            probs,
            trace,
            window_length,
            source,
            strategy,
            channels,
            lmin,
            lmax,
            direction,
            out,
        } => cmd_allocate(
            probs.as_deref(),
            trace.as_deref(),
            window_length,
            &source,
            &strategy,
            channels,
            lmin,
            lmax,
            &direction,
            &out,
        ),
        Command::Simulate {
            scenario,
            plan,
            strategy,
            lmin,
            lmax,
            seed,
            out,
        } => cmd_simulate(
            &scenario,
            plan.as_deref(),
            strategy.as_deref(),
            lmin,
            lmax,
            seed,
            out.as_deref(),
        ),
        Command::Train {
            dataset,
            stations,
            days,
            slots,
            noise,
            hidden,
            learning_rate,
            epochs,
            batch_size,
            seed,
            out,
            dump_dataset,
        } => cmd_train(
            dataset.as_deref(),
            stations,
            days,
            slots,
            noise,
            hidden,
            &TrainConfig {
                learning_rate,
                epochs,
                batch_size,
                seed,
            },
            &out,
            dump_dataset.as_deref(),
        ),
        Command::Benchmark {
            scenario,
            strategies,
            seeds,
            lmin,
            lmax,
            out,
        } => cmd_benchmark(&scenario, &strategies, &seeds, lmin, lmax, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}: {err}", err.name());
            ExitCode::FAILURE
        }
    }
}

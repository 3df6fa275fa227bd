//! Command line front end: `ingest`, `run`, `raster`.
//!
//! Exit codes: 0 on success, 1 for a pipeline failure, 2 for unusable
//! input (missing files, malformed streams, bad arguments).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use evattn_core::config::ExperimentConfig;
use evattn_core::error::Error;
use evattn_core::events::SensorGeometry;
use evattn_core::pipeline::{ingest, raster, run_experiment, IngestOptions};

#[derive(Parser)]
#[command(name = "evattn", version, about = "Attention-gated SNN pipeline for event camera streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert recordings (AEDAT 3.1 or CSV) plus label tables into a
    /// canonical trial directory.
    Ingest(IngestArgs),
    /// Run the full experiment described by a config file.
    Run(RunArgs),
    /// Split a spike trace into per-layer raster CSVs.
    Raster(RasterArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Event recording; repeatable, paired with --labels in order.
    #[arg(long, required = true)]
    events: Vec<PathBuf>,
    /// Label table for the matching --events file.
    #[arg(long, required = true)]
    labels: Vec<PathBuf>,
    /// Keep only these gesture classes (e.g. `--classes 3,5,8`).
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<u32>>,
    /// Stop collecting a class once it has this many trials.
    #[arg(long)]
    max_per_class: Option<usize>,
    /// Sensor width for CSV recordings (AEDAT streams carry their own).
    #[arg(long, default_value_t = 128)]
    width: u16,
    /// Sensor height for CSV recordings.
    #[arg(long, default_value_t = 128)]
    height: u16,
    /// Output trial directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RasterArgs {
    /// Spike trace CSV (its `*_intervals.csv` companion is picked up
    /// automatically).
    #[arg(long)]
    trace: PathBuf,
    /// Output directory for the per-layer CSVs.
    #[arg(long)]
    out: PathBuf,
}

fn exit_code_for(err: &Error) -> u8 {
    if err.is_usage() {
        2
    } else {
        1
    }
}

fn cmd_ingest(args: IngestArgs) -> Result<(), Error> {
    if args.events.len() != args.labels.len() {
        return Err(Error::Config(format!(
            "{} --events files but {} --labels files",
            args.events.len(),
            args.labels.len()
        )));
    }
    for path in args.events.iter().chain(args.labels.iter()) {
        if !path.is_file() {
            return Err(Error::Config(format!("no such file: {}", path.display())));
        }
    }
    let inputs: Vec<(PathBuf, PathBuf)> = args
        .events
        .into_iter()
        .zip(args.labels.into_iter())
        .collect();
    let opts = IngestOptions {
        classes: args.classes,
        max_per_class: args.max_per_class,
        geometry: SensorGeometry::new(args.width, args.height)?,
    };
    let summary = ingest(&inputs, &opts, &args.out)?;
    println!(
        "ingested {} trial(s) into {}",
        summary.n_trials,
        summary.out_dir.display()
    );
    for (class, count) in &summary.per_class {
        println!("  class {class}: {count}");
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::from_path(&args.config)?;
    if let Some(out) = args.out {
        cfg.output.dir = out;
    }
    let summary = run_experiment(&cfg)?;
    println!(
        "ran {} trial(s), {:.1} s simulated, artifacts in {}",
        summary.n_trials,
        summary.total_simulated_us as f64 / 1e6,
        summary.out_dir.display()
    );
    for (coding, accuracy) in &summary.accuracies {
        println!("  {coding}: accuracy {accuracy:.3}");
    }
    Ok(())
}

fn cmd_raster(args: RasterArgs) -> Result<(), Error> {
    if !args.trace.is_file() {
        return Err(Error::Config(format!(
            "no such file: {}",
            args.trace.display()
        )));
    }
    let summary = raster(&args.trace, &args.out)?;
    for (layer, rows) in &summary.rows_per_layer {
        println!("{layer}.csv: {rows} spike(s)");
    }
    println!("attention_intervals.csv: {} interval(s)", summary.n_intervals);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Run(args) => cmd_run(args),
        Command::Raster(args) => cmd_raster(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(inner) = source {
                eprintln!("  caused by: {inner}");
                source = inner.source();
            }
            ExitCode::from(exit_code_for(&err))
        }
    }
}

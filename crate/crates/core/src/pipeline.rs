//! End-to-end experiment stages behind the CLI subcommands.
//!
//! `run_experiment` trains the network unsupervised, runs inference over
//! every trial, decodes the requested codings, trains and evaluates the
//! readout per coding, and writes all artifacts plus a manifest that
//! captures the full configuration (and its hash) for bit-identical
//! reproduction. Any stage failure aborts with the stage name and leaves
//! the manifest flagged `INCOMPLETE`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::aedat::parse_aedat31;
use crate::config::{DataConfig, DataFormat, ExperimentConfig};
use crate::decode::{decode_latency, decode_rank_order, decode_rate, Coding, FeatureVector};
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::events::{
    load_labels, parse_csv_events, segment_trials, write_csv_events, SensorGeometry, TrialSegment,
};
use crate::mlp::{evaluate, split_stratified, train_mlp, EvalReport};
use crate::network::{build_network, Layer, SpikeTrace};
use crate::synth::gen_synthetic_pattern;

fn stage<T>(name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| e.in_stage(name))
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub n_trials: usize,
    pub total_simulated_us: u64,
    /// Test accuracy per coding name.
    pub accuracies: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    failed_stage: Option<String>,
    config_sha256: String,
    seeds: ManifestSeeds,
    stages_completed: Vec<&'static str>,
    n_trials: usize,
    total_simulated_us: u64,
    accuracies: BTreeMap<String, f64>,
    config: &'a ExperimentConfig,
}

#[derive(Debug, Serialize)]
struct ManifestSeeds {
    network: u64,
    training: u64,
    eval: u64,
}

fn config_hash(cfg: &ExperimentConfig) -> String {
    let canonical = cfg.to_toml_string();
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut file, value)
        .map_err(|e| Error::Config(format!("cannot serialize {}: {e}", path.display())))?;
    file.write_all(b"\n")?;
    Ok(())
}

/// Materialize the configured dataset.
pub fn load_trials(data: &DataConfig) -> Result<Vec<TrialSegment>> {
    match data.format {
        DataFormat::Synthetic => {
            let geometry = data.geometry()?;
            let mut trials = Vec::new();
            for (ip, &pattern) in data.patterns.iter().enumerate() {
                for i in 0..data.trials_per_class {
                    let seed = data
                        .seed
                        .wrapping_add((ip * data.trials_per_class + i) as u64);
                    trials.push(gen_synthetic_pattern(
                        pattern,
                        data.trial_duration_us,
                        geometry,
                        seed,
                    )?);
                }
            }
            Ok(trials)
        }
        DataFormat::Trials => {
            let dir = data
                .dir
                .as_ref()
                .ok_or_else(|| Error::Config("data.dir is required".into()))?;
            load_trial_dir(dir, data)
        }
    }
}

fn load_trial_dir(dir: &Path, data: &DataConfig) -> Result<Vec<TrialSegment>> {
    let geometry = data.geometry()?;
    let index = fs::read_to_string(dir.join("trials.csv"))?;
    let mut per_class: BTreeMap<u32, usize> = BTreeMap::new();
    let mut trials = Vec::new();
    for (idx, line) in index.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || (lineno == 1 && trimmed.starts_with("trial_id")) {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected `trial_id,class,duration_us`, got {trimmed:?}"),
            });
        }
        let parse_u64 = |f: &str, what: &str| -> Result<u64> {
            f.trim().parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("invalid {what}: {f:?}"),
            })
        };
        let trial_id = parse_u64(fields[0], "trial id")?;
        let class = parse_u64(fields[1], "class")? as u32;
        let duration_us = parse_u64(fields[2], "duration")?;

        if !data.classes.is_empty() && !data.classes.contains(&class) {
            continue;
        }
        let count = per_class.entry(class).or_insert(0);
        if data.trials_per_class > 0 && *count >= data.trials_per_class {
            continue;
        }
        *count += 1;

        let path = dir.join(trial_file_name(trial_id));
        let events = parse_csv_events(BufReader::new(File::open(&path)?), geometry)?;
        trials.push(TrialSegment {
            class_label: class,
            t_start: 0,
            t_end: duration_us,
            events,
        });
    }
    Ok(trials)
}

pub fn trial_file_name(trial_id: u64) -> String {
    format!("trial_{trial_id:05}.csv")
}

pub fn intervals_file_name(trial_id: u64) -> String {
    format!("trial_{trial_id:05}_intervals.csv")
}

fn write_manifest(
    out_dir: &Path,
    cfg: &ExperimentConfig,
    status: &'static str,
    failed_stage: Option<String>,
    stages_completed: Vec<&'static str>,
    n_trials: usize,
    total_simulated_us: u64,
    accuracies: &BTreeMap<String, f64>,
) -> Result<()> {
    let manifest = Manifest {
        status,
        failed_stage,
        config_sha256: config_hash(cfg),
        seeds: ManifestSeeds {
            network: cfg.network.seed,
            training: cfg.training.seed,
            eval: cfg.eval.seed,
        },
        stages_completed,
        n_trials,
        total_simulated_us,
        accuracies: accuracies.clone(),
        config: cfg,
    };
    write_json(&out_dir.join("manifest.json"), &manifest)
}

fn decode_trial(
    coding: Coding,
    trace: &SpikeTrace,
    window_us: u64,
    n_output: usize,
) -> FeatureVector {
    match coding {
        Coding::Rate => decode_rate(trace, window_us, n_output),
        Coding::Latency => decode_latency(trace, window_us, n_output),
        Coding::RankOrder => decode_rank_order(trace, n_output),
    }
}

fn write_feature_csv(path: &Path, features: &[FeatureVector]) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    let n = features.first().map(|f| f.values.len()).unwrap_or(0);
    let header: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    writeln!(file, "trial_id,label,coding,{}", header.join(","))?;
    for f in features {
        let values: Vec<String> = f.values.iter().map(|v| v.to_string()).collect();
        writeln!(
            file,
            "{},{},{},{}",
            f.trial_ref,
            f.label,
            f.coding.as_str(),
            values.join(",")
        )?;
    }
    Ok(())
}

/// Run the full experiment described by `cfg`. Artifacts land in
/// `cfg.output.dir`: per-trial spike traces with attention intervals,
/// one feature CSV and one evaluation report per coding, a
/// `config.example` documenting all defaults, and `manifest.json`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    stage("config", || cfg.validate())?;

    let out_dir = cfg.output.dir.clone();
    fs::create_dir_all(&out_dir)?;
    fs::write(
        out_dir.join("config.example"),
        ExperimentConfig::default().to_toml_string(),
    )?;
    let mut completed: Vec<&'static str> = vec!["config"];
    let empty = BTreeMap::new();
    write_manifest(&out_dir, cfg, "INCOMPLETE", None, completed.clone(), 0, 0, &empty)?;

    let result = run_stages(cfg, &out_dir, &mut completed);
    if let Err(ref err) = result {
        let failed = match err {
            Error::Stage { stage, .. } => Some((*stage).to_string()),
            _ => None,
        };
        // Best effort: leave an INCOMPLETE manifest describing the failure.
        let _ = write_manifest(&out_dir, cfg, "INCOMPLETE", failed, completed, 0, 0, &empty);
    }
    result
}

fn run_stages(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    completed: &mut Vec<&'static str>,
) -> Result<RunSummary> {
    let enc: EncoderConfig = cfg.encoder_config()?;

    let trials = stage("data", || {
        let trials = load_trials(&cfg.data)?;
        if trials.is_empty() {
            return Err(Error::Config("dataset resolved to zero trials".into()));
        }
        Ok(trials)
    })?;
    completed.push("data");

    let mut net = stage("build", || {
        build_network(
            cfg.network.topology(enc.n_input()),
            cfg.neuron,
            cfg.plasticity,
            cfg.network.attention_params(),
            cfg.network.gating(),
            cfg.network.seed,
        )
    })?;
    completed.push("build");

    stage("train", || {
        net.train_unsupervised(&trials, &enc, cfg.training.epochs, cfg.training.seed)
    })?;
    completed.push("train");

    // Frozen inference: every trial runs on its own copy of the trained
    // state, so evaluation order cannot leak between trials.
    let traces: Vec<SpikeTrace> = stage("inference", || {
        trials
            .par_iter()
            .map(|trial| {
                let mut copy = net.clone();
                copy.run_trial(trial, &enc, false)
            })
            .collect()
    })?;
    completed.push("inference");

    stage("traces", || {
        let trace_dir = out_dir.join("traces");
        fs::create_dir_all(&trace_dir)?;
        for (i, trace) in traces.iter().enumerate() {
            let mut w = BufWriter::new(File::create(trace_dir.join(trial_file_name(i as u64)))?);
            trace.write_csv(&mut w)?;
            let mut w =
                BufWriter::new(File::create(trace_dir.join(intervals_file_name(i as u64)))?);
            trace.write_intervals_csv(&mut w)?;
        }
        Ok(())
    })?;
    completed.push("traces");

    let tail = net.default_tail_us(&enc);
    let n_output = cfg.network.n_output;
    let mut features_by_coding: Vec<(Coding, Vec<FeatureVector>)> = Vec::new();
    stage("decode", || {
        for &coding in &cfg.eval.codings {
            let features: Vec<FeatureVector> = traces
                .iter()
                .zip(&trials)
                .enumerate()
                .map(|(i, (trace, trial))| {
                    let window = trial.duration_us() + tail;
                    let mut f = decode_trial(coding, trace, window, n_output);
                    f.trial_ref = i;
                    f.label = trial.class_label;
                    f
                })
                .collect();
            write_feature_csv(
                &out_dir.join(format!("features_{}.csv", coding.as_str())),
                &features,
            )?;
            features_by_coding.push((coding, features));
        }
        Ok(())
    })?;
    completed.push("decode");

    let mut accuracies = BTreeMap::new();
    stage("eval", || {
        for (i, (coding, features)) in features_by_coding.iter().enumerate() {
            let (train, test) = split_stratified(features, cfg.eval.test_fraction, cfg.eval.seed)?;
            let model = train_mlp(&train, &cfg.eval.mlp_hyperparams(i))?;
            let mut report: EvalReport = evaluate(&model, &test)?;
            report.seed = cfg.eval.seed;
            write_json(&out_dir.join(format!("eval_{}.json", coding.as_str())), &report)?;
            accuracies.insert(coding.as_str().to_string(), report.accuracy);
        }
        Ok(())
    })?;
    completed.push("eval");

    let total_simulated_us: u64 = trials.iter().map(|t| t.duration_us() + tail).sum();
    completed.push("manifest");
    write_manifest(
        out_dir,
        cfg,
        "COMPLETE",
        None,
        completed.clone(),
        trials.len(),
        total_simulated_us,
        &accuracies,
    )?;

    Ok(RunSummary {
        out_dir: out_dir.to_path_buf(),
        n_trials: trials.len(),
        total_simulated_us,
        accuracies,
    })
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// Classes to keep; None keeps every labeled class.
    pub classes: Option<Vec<u32>>,
    /// Cap on trials per class across all input files.
    pub max_per_class: Option<usize>,
    /// Geometry for CSV event files (AEDAT streams carry their own).
    pub geometry: SensorGeometry,
}

#[derive(Debug, Clone)]
pub struct IngestSummary {
    pub out_dir: PathBuf,
    pub n_trials: usize,
    pub per_class: BTreeMap<u32, usize>,
}

/// Convert raw recordings plus label tables into the canonical trial
/// directory: `trial_XXXXX.csv` per trial and a `trials.csv` index.
pub fn ingest(
    inputs: &[(PathBuf, PathBuf)],
    opts: &IngestOptions,
    out_dir: &Path,
) -> Result<IngestSummary> {
    fs::create_dir_all(out_dir)?;
    let mut index = BufWriter::new(File::create(out_dir.join("trials.csv"))?);
    writeln!(index, "trial_id,class,duration_us")?;

    let mut per_class: BTreeMap<u32, usize> = BTreeMap::new();
    let mut trial_id = 0u64;
    for (events_path, labels_path) in inputs {
        let is_aedat = events_path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("aedat"));
        let events = if is_aedat {
            let file = File::open(events_path)?;
            let (_, events) = parse_aedat31(BufReader::new(file))?;
            events
        } else {
            parse_csv_events(BufReader::new(File::open(events_path)?), opts.geometry)?
        };
        let labels = load_labels(BufReader::new(File::open(labels_path)?))?;
        let keep: Vec<u32> = match &opts.classes {
            Some(classes) => classes.clone(),
            None => labels.iter().map(|l| l.class).collect(),
        };
        for trial in segment_trials(&events, &labels, &keep)? {
            let count = per_class.entry(trial.class_label).or_insert(0);
            if opts.max_per_class.is_some_and(|cap| *count >= cap) {
                continue;
            }
            *count += 1;
            let path = out_dir.join(trial_file_name(trial_id));
            write_csv_events(&trial.events, BufWriter::new(File::create(&path)?))?;
            writeln!(
                index,
                "{},{},{}",
                trial_id,
                trial.class_label,
                trial.duration_us()
            )?;
            trial_id += 1;
        }
    }
    index.flush()?;
    Ok(IngestSummary {
        out_dir: out_dir.to_path_buf(),
        n_trials: trial_id as usize,
        per_class,
    })
}

#[derive(Debug, Clone)]
pub struct RasterSummary {
    pub rows_per_layer: BTreeMap<&'static str, usize>,
    pub n_intervals: usize,
}

/// Split a spike trace CSV into plot-ready per-layer rasters plus the
/// attention interval table (read from the trace's companion file when
/// present).
pub fn raster(trace_path: &Path, out_dir: &Path) -> Result<RasterSummary> {
    let trace = SpikeTrace::read_csv(BufReader::new(File::open(trace_path)?))?;
    let intervals_path = companion_intervals_path(trace_path);
    let intervals = if intervals_path.is_file() {
        SpikeTrace::read_intervals_csv(BufReader::new(File::open(&intervals_path)?))?
    } else {
        Vec::new()
    };

    fs::create_dir_all(out_dir)?;
    let mut rows = BTreeMap::new();
    for layer in [Layer::Attention, Layer::Intermediate, Layer::Output] {
        let path = out_dir.join(format!("{}.csv", layer.as_str()));
        let mut file = BufWriter::new(File::create(path)?);
        writeln!(file, "t_us,neuron_id")?;
        let mut n = 0usize;
        for r in trace.layer_records(layer) {
            writeln!(file, "{},{}", r.t_us, r.neuron)?;
            n += 1;
        }
        rows.insert(layer.as_str(), n);
    }
    let mut file = BufWriter::new(File::create(out_dir.join("attention_intervals.csv"))?);
    writeln!(file, "t_on_us,t_off_us")?;
    for (on, off) in &intervals {
        writeln!(file, "{on},{off}")?;
    }
    Ok(RasterSummary {
        rows_per_layer: rows,
        n_intervals: intervals.len(),
    })
}

fn companion_intervals_path(trace_path: &Path) -> PathBuf {
    let stem = trace_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    trace_path.with_file_name(format!("{stem}_intervals.csv"))
}

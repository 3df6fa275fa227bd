//! Declarative experiment configuration (TOML, sectioned key/value).
//!
//! Every hyperparameter lives here with a documented default; a full
//! `config.example` reflecting the defaults is written to each run's
//! output directory. All randomness flows from three named seeds:
//! `network.seed` (weight init), `training.seed` (trial shuffling) and
//! `eval.seed` (split and readout training).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attention::AttentionParams;
use crate::decode::Coding;
use crate::encoder::{EncoderConfig, InputCoding, PolarityMode};
use crate::error::{Error, Result};
use crate::events::SensorGeometry;
use crate::mlp::MlpHyperParams;
use crate::network::{GatingParams, NetworkTopology};
use crate::neuron::NeuronParams;
use crate::plasticity::PlasticityParams;
use crate::synth::PatternKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    /// Generate trials from the synthetic pattern set.
    Synthetic,
    /// Read an ingested trial directory (`trials.csv` plus per-trial CSVs).
    Trials,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub format: DataFormat,
    /// Trial directory for `format = "trials"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Classes to keep; empty keeps everything (trials format only).
    pub classes: Vec<u32>,
    /// Cap per class; 0 keeps all available trials.
    pub trials_per_class: usize,
    pub sensor_width: u16,
    pub sensor_height: u16,
    /// Synthetic-format fields.
    pub patterns: Vec<PatternKind>,
    pub trial_duration_us: u64,
    /// Seed of the synthetic dataset itself (a dataset parameter, not a
    /// run seed).
    pub seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            format: DataFormat::Synthetic,
            dir: None,
            classes: Vec::new(),
            trials_per_class: 50,
            sensor_width: 128,
            sensor_height: 128,
            patterns: PatternKind::ALL.to_vec(),
            trial_duration_us: 500_000,
            seed: 7,
        }
    }
}

impl DataConfig {
    pub fn geometry(&self) -> Result<SensorGeometry> {
        SensorGeometry::new(self.sensor_width, self.sensor_height)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSection {
    pub ds_factor: u16,
    /// Microseconds of events per time slice.
    pub slice_interval: u64,
    /// Number of delayed slices.
    pub depth: usize,
    /// Microseconds per simulation step.
    pub sim_step: u64,
    pub polarity_mode: PolarityMode,
    pub input_coding: InputCoding,
}

impl Default for EncoderSection {
    fn default() -> Self {
        let enc = EncoderConfig::default();
        EncoderSection {
            ds_factor: enc.ds_factor,
            slice_interval: enc.slice_interval_us,
            depth: enc.depth,
            sim_step: enc.sim_step_us,
            polarity_mode: enc.polarity_mode,
            input_coding: enc.input_coding,
        }
    }
}

impl EncoderSection {
    pub fn to_encoder_config(self, geometry: SensorGeometry) -> EncoderConfig {
        EncoderConfig {
            geometry,
            ds_factor: self.ds_factor,
            slice_interval_us: self.slice_interval,
            depth: self.depth,
            sim_step_us: self.sim_step,
            polarity_mode: self.polarity_mode,
            input_coding: self.input_coding,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub n_intermediate: usize,
    pub n_output: usize,
    pub lateral_inhibition_output: bool,
    /// Weight initialization seed.
    pub seed: u64,
    pub input_gain: f64,
    pub output_gain: f64,
    pub output_freeze: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_us: Option<u64>,
    /// Attention neuron parameters.
    pub theta_on: f64,
    pub theta_off: f64,
    pub tau_att: f64,
    pub att_gain: f64,
    pub u_habit: f64,
    pub tau_habit: f64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        let att = AttentionParams::default();
        let gating = GatingParams::default();
        NetworkSection {
            n_intermediate: 64,
            n_output: 10,
            lateral_inhibition_output: true,
            seed: 1,
            input_gain: gating.input_gain,
            output_gain: gating.output_gain,
            output_freeze: gating.output_freeze,
            tail_us: gating.tail_us,
            theta_on: att.theta_on,
            theta_off: att.theta_off,
            tau_att: att.tau_att,
            att_gain: att.att_gain,
            u_habit: att.u_habit,
            tau_habit: att.tau_habit,
        }
    }
}

impl NetworkSection {
    pub fn topology(&self, n_input: usize) -> NetworkTopology {
        NetworkTopology {
            n_input,
            n_intermediate: self.n_intermediate,
            n_output: self.n_output,
            lateral_inhibition_output: self.lateral_inhibition_output,
        }
    }

    pub fn attention_params(&self) -> AttentionParams {
        AttentionParams {
            theta_on: self.theta_on,
            theta_off: self.theta_off,
            tau_att: self.tau_att,
            att_gain: self.att_gain,
            u_habit: self.u_habit,
            tau_habit: self.tau_habit,
        }
    }

    pub fn gating(&self) -> GatingParams {
        GatingParams {
            input_gain: self.input_gain,
            output_gain: self.output_gain,
            output_freeze: self.output_freeze,
            tail_us: self.tail_us,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub epochs: usize,
    /// Trial shuffle seed.
    pub seed: u64,
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection { epochs: 2, seed: 2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub codings: Vec<Coding>,
    pub test_fraction: f64,
    /// Split seed; readout seeds derive from it per coding.
    pub seed: u64,
    pub n_hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        let hp = MlpHyperParams::default();
        EvalSection {
            codings: vec![Coding::Rate, Coding::Latency, Coding::RankOrder],
            test_fraction: 0.2,
            seed: 3,
            n_hidden: hp.n_hidden,
            lr: hp.lr,
            epochs: hp.epochs,
            batch: hp.batch,
        }
    }
}

impl EvalSection {
    /// Readout hyperparameters for the i-th coding; the seed mixes the
    /// eval seed with the coding index so codings train independently
    /// but reproducibly.
    pub fn mlp_hyperparams(&self, coding_index: usize) -> MlpHyperParams {
        MlpHyperParams {
            n_hidden: self.n_hidden,
            lr: self.lr,
            epochs: self.epochs,
            batch: self.batch,
            seed: self
                .seed
                .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(coding_index as u64 + 1)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out/run"),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub encoder: EncoderSection,
    pub neuron: NeuronParams,
    pub plasticity: PlasticityParams,
    pub network: NetworkSection,
    pub training: TrainingSection,
    pub eval: EvalSection,
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<ExperimentConfig> {
        toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn encoder_config(&self) -> Result<EncoderConfig> {
        Ok(self.encoder.to_encoder_config(self.data.geometry()?))
    }

    /// Validate every section before any simulation starts.
    pub fn validate(&self) -> Result<()> {
        let enc = self.encoder_config()?;
        enc.validate()?;
        self.neuron.validate()?;
        self.plasticity.validate()?;
        self.network.attention_params().validate()?;
        self.network.topology(enc.n_input()).validate()?;
        if self.training.epochs == 0 {
            return Err(Error::Config("training.epochs must be >= 1".into()));
        }
        if !(0.0 < self.eval.test_fraction && self.eval.test_fraction < 1.0) {
            return Err(Error::Config("eval.test_fraction must be in (0, 1)".into()));
        }
        if self.eval.codings.is_empty() {
            return Err(Error::Config("eval.codings must not be empty".into()));
        }
        match self.data.format {
            DataFormat::Synthetic => {
                if self.data.patterns.is_empty() {
                    return Err(Error::Config("data.patterns must not be empty".into()));
                }
                if self.data.trials_per_class == 0 {
                    return Err(Error::Config(
                        "data.trials_per_class must be >= 1 for synthetic data".into(),
                    ));
                }
                if self.data.trial_duration_us == 0 {
                    return Err(Error::Config("data.trial_duration_us must be >= 1".into()));
                }
            }
            DataFormat::Trials => {
                let dir = self.data.dir.as_ref().ok_or_else(|| {
                    Error::Config("data.dir is required for format = \"trials\"".into())
                })?;
                if !dir.join("trials.csv").is_file() {
                    return Err(Error::Config(format!(
                        "trial index {} does not exist",
                        dir.join("trials.csv").display()
                    )));
                }
            }
        }
        Ok(())
    }
}

//! The attention neuron: a single unit driven by input-layer spikes
//! through habituating synapses, with two-threshold hysteresis.
//!
//! Every input spike contributes its habituation efficacy to the
//! attention potential and is then depressed, so a stimulus that keeps
//! repeating drives the neuron less and less; recovery is far slower
//! than ordinary short-term plasticity. The active flag switches on at
//! `theta_on` and only back off at `theta_off < theta_on`.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    /// Activation threshold.
    pub theta_on: f64,
    /// Deactivation threshold, strictly below `theta_on`.
    pub theta_off: f64,
    /// Attention membrane time constant, microseconds.
    pub tau_att: f64,
    /// Potential contributed per input spike at full efficacy.
    pub att_gain: f64,
    /// Habituation fraction removed per input spike.
    pub u_habit: f64,
    /// Habituation recovery constant, microseconds.
    pub tau_habit: f64,
}

impl Default for AttentionParams {
    fn default() -> Self {
        AttentionParams {
            theta_on: 1.0,
            theta_off: 0.4,
            tau_att: 10_000.0,
            att_gain: 0.012,
            u_habit: 0.02,
            tau_habit: 5.0e7,
        }
    }
}

impl AttentionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_off < self.theta_on) {
            return Err(Error::Config(format!(
                "theta_off {} must be strictly below theta_on {}",
                self.theta_off, self.theta_on
            )));
        }
        if !(self.tau_att > 0.0 && self.tau_habit > 0.0) {
            return Err(Error::Config("attention time constants must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.u_habit) {
            return Err(Error::Config("u_habit must be in [0, 1)".into()));
        }
        if !(self.att_gain >= 0.0) {
            return Err(Error::Config("att_gain must be >= 0".into()));
        }
        Ok(())
    }
}

/// Transition of the active flag produced by one update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttentionTransition {
    None,
    /// Inactive -> active this step.
    Onset,
    /// Active -> inactive this step.
    Offset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionState {
    /// Membrane potential of the attention neuron.
    pub v_att: f64,
    pub active: bool,
    /// Habituation efficacy per input neuron, in (0, 1].
    pub habituation: Array1<f64>,
}

impl AttentionState {
    pub fn new(n_input: usize) -> AttentionState {
        AttentionState {
            v_att: 0.0,
            active: false,
            habituation: Array1::ones(n_input),
        }
    }

    /// Reset the fast state, keeping the slowly-learned habituation.
    pub fn reset_potential(&mut self) {
        self.v_att = 0.0;
        self.active = false;
    }
}

/// One attention step: decay, habituation recovery, integration of the
/// step's input spikes, depression of the spiking synapses, hysteresis.
pub fn attention_update(
    att: &mut AttentionState,
    params: &AttentionParams,
    input_spikes: &[usize],
    dt: u64,
) -> AttentionTransition {
    att.v_att *= (-(dt as f64) / params.tau_att).exp();
    let recover = (-(dt as f64) / params.tau_habit).exp();
    att.habituation
        .mapv_inplace(|e| 1.0 - (1.0 - e) * recover);

    let mut drive = 0.0;
    for &i in input_spikes {
        drive += att.habituation[i];
        att.habituation[i] *= 1.0 - params.u_habit;
    }
    att.v_att += params.att_gain * drive;

    if !att.active && att.v_att >= params.theta_on {
        att.active = true;
        AttentionTransition::Onset
    } else if att.active && att.v_att <= params.theta_off {
        att.active = false;
        AttentionTransition::Offset
    } else {
        AttentionTransition::None
    }
}

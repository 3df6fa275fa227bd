//! Leaky integrate-and-fire dynamics with adaptive thresholds.
//!
//! Decay is applied as an exact per-step exponential rather than an Euler
//! update, so closed-form expectations hold in tests. One step covers
//! `[t, t + dt)`: the threshold offset decays, the membrane decays and
//! integrates the step's input current (unless refractory), then the
//! neuron fires iff the potential reaches `v_thresh0 + theta`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuronParams {
    /// Membrane time constant, microseconds.
    pub tau_m: f64,
    /// Baseline firing threshold.
    pub v_thresh0: f64,
    /// Potential after a spike.
    pub v_reset: f64,
    /// Refractory period, microseconds.
    pub t_refrac: u64,
    /// Threshold offset added per spike.
    pub theta_inc: f64,
    /// Threshold offset decay constant, microseconds.
    pub tau_theta: f64,
}

impl Default for NeuronParams {
    fn default() -> Self {
        NeuronParams {
            tau_m: 20_000.0,
            v_thresh0: 1.0,
            v_reset: 0.0,
            t_refrac: 2_000,
            theta_inc: 0.05,
            tau_theta: 1.0e7,
        }
    }
}

impl NeuronParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_m > 0.0) {
            return Err(Error::Config("tau_m must be > 0".into()));
        }
        if !(self.v_thresh0 > self.v_reset) {
            return Err(Error::Config("v_thresh0 must be > v_reset".into()));
        }
        if !(self.theta_inc >= 0.0) {
            return Err(Error::Config("theta_inc must be >= 0".into()));
        }
        if !(self.tau_theta > 0.0) {
            return Err(Error::Config("tau_theta must be > 0".into()));
        }
        Ok(())
    }
}

/// Per-step decay factors, precomputed once per run since `dt` is fixed.
#[derive(Debug, Clone, Copy)]
pub struct DecayFactors {
    pub membrane: f64,
    pub threshold: f64,
}

impl DecayFactors {
    pub fn new(params: &NeuronParams, dt: u64) -> DecayFactors {
        DecayFactors {
            membrane: (-(dt as f64) / params.tau_m).exp(),
            threshold: (-(dt as f64) / params.tau_theta).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronState {
    /// Membrane potential.
    pub v: f64,
    /// Adaptive threshold offset; effective threshold is `v_thresh0 + theta`.
    pub theta: f64,
    pub last_spike_t: Option<u64>,
    pub refractory_until: u64,
}

impl NeuronState {
    pub fn resting(params: &NeuronParams) -> NeuronState {
        NeuronState {
            v: params.v_reset,
            theta: 0.0,
            last_spike_t: None,
            refractory_until: 0,
        }
    }

    pub fn is_refractory(&self, t: u64) -> bool {
        t < self.refractory_until
    }

    /// Decay and integrate without the firing check (used where spiking
    /// is vetoed but evidence keeps accumulating).
    pub fn integrate(&mut self, params: &NeuronParams, decay: DecayFactors, input_current: f64, t: u64) {
        self.theta *= decay.threshold;
        if self.is_refractory(t) {
            self.v = params.v_reset;
        } else {
            self.v = self.v * decay.membrane + input_current;
        }
    }

    /// Fire iff the potential reaches the adaptive threshold; on a spike
    /// the potential resets, the threshold offset grows and the
    /// refractory window opens.
    pub fn try_fire(&mut self, params: &NeuronParams, t: u64) -> bool {
        if self.is_refractory(t) {
            return false;
        }
        if self.v >= params.v_thresh0 + self.theta {
            self.v = params.v_reset;
            self.theta += params.theta_inc;
            self.last_spike_t = Some(t);
            self.refractory_until = t + params.t_refrac;
            true
        } else {
            false
        }
    }
}

/// One full LIF step: integrate then fire.
pub fn lif_step(
    state: &mut NeuronState,
    params: &NeuronParams,
    input_current: f64,
    t: u64,
    dt: u64,
) -> bool {
    debug_assert!(dt > 0);
    state.integrate(params, DecayFactors::new(params, dt), input_current, t);
    state.try_fire(params, t)
}

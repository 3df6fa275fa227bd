//! Synapse state: weights, short-term efficacies and STDP traces.
//!
//! Short-term depression multiplies a presynaptic efficacy by
//! `1 - u_depress` on every pre spike and lets it recover exponentially
//! toward 1. Pair STDP keeps one trace per pre and post neuron; a pre
//! spike depresses its outgoing weights by `a_minus * x_post` and a post
//! spike potentiates its incoming weights by `a_plus * x_pre`, both
//! clamped to `[0, w_max]`. Decay is exact exponential per step.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlasticityParams {
    /// Potentiation amplitude on post spikes.
    pub a_plus: f64,
    /// Depression amplitude on pre spikes.
    pub a_minus: f64,
    /// Pre trace decay constant, microseconds.
    pub tau_pre: f64,
    /// Post trace decay constant, microseconds.
    pub tau_post: f64,
    /// Efficacy fraction removed per pre spike.
    pub u_depress: f64,
    /// Efficacy recovery constant, microseconds.
    pub tau_recover: f64,
    /// Weight ceiling.
    pub w_max: f64,
    pub learning_enabled: bool,
}

impl Default for PlasticityParams {
    fn default() -> Self {
        PlasticityParams {
            a_plus: 0.01,
            a_minus: 0.012,
            tau_pre: 20_000.0,
            tau_post: 20_000.0,
            u_depress: 0.1,
            tau_recover: 200_000.0,
            w_max: 1.0,
            learning_enabled: true,
        }
    }
}

impl PlasticityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_plus >= 0.0 && self.a_minus >= 0.0) {
            return Err(Error::Config("a_plus and a_minus must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.u_depress) {
            return Err(Error::Config("u_depress must be in [0, 1)".into()));
        }
        if !(self.tau_pre > 0.0 && self.tau_post > 0.0 && self.tau_recover > 0.0) {
            return Err(Error::Config("plasticity time constants must be > 0".into()));
        }
        if !(self.w_max > 0.0) {
            return Err(Error::Config("w_max must be > 0".into()));
        }
        Ok(())
    }
}

/// Per-step decay factors for traces and efficacy recovery.
#[derive(Debug, Clone, Copy)]
pub struct PlasticityDecay {
    pub pre: f64,
    pub post: f64,
    pub recover: f64,
}

impl PlasticityDecay {
    pub fn new(params: &PlasticityParams, dt: u64) -> PlasticityDecay {
        PlasticityDecay {
            pre: (-(dt as f64) / params.tau_pre).exp(),
            post: (-(dt as f64) / params.tau_post).exp(),
            recover: (-(dt as f64) / params.tau_recover).exp(),
        }
    }
}

/// Dense feed-forward synapse block between two layers.
///
/// The short-term efficacy is stored per presynaptic neuron: depression
/// scales a whole outgoing row at once and recovery is uniform, so the
/// per-synapse value never varies along the row.
#[derive(Debug, Clone, PartialEq)]
pub struct SynapseArray {
    /// Weights, shape (pre, post), each in [0, w_max].
    pub w: Array2<f64>,
    /// Short-term efficacy per presynaptic neuron, in (0, 1].
    pub efficacy: Array1<f64>,
    /// STDP trace per presynaptic neuron.
    pub x_pre: Array1<f64>,
    /// STDP trace per postsynaptic neuron.
    pub x_post: Array1<f64>,
}

impl SynapseArray {
    pub fn from_weights(w: Array2<f64>) -> SynapseArray {
        let (n_pre, n_post) = w.dim();
        SynapseArray {
            w,
            efficacy: Array1::ones(n_pre),
            x_pre: Array1::zeros(n_pre),
            x_post: Array1::zeros(n_post),
        }
    }

    pub fn n_pre(&self) -> usize {
        self.w.nrows()
    }

    pub fn n_post(&self) -> usize {
        self.w.ncols()
    }

    /// Effective transmitted weight of synapse (pre, post) right now.
    pub fn transmitted(&self, pre: usize, post: usize) -> f64 {
        self.w[[pre, post]] * self.efficacy[pre]
    }

    /// Trace decay and efficacy recovery for one step.
    pub fn decay_step(&mut self, decay: PlasticityDecay) {
        self.x_pre.mapv_inplace(|x| x * decay.pre);
        self.x_post.mapv_inplace(|x| x * decay.post);
        self.efficacy
            .mapv_inplace(|e| 1.0 - (1.0 - e) * decay.recover);
    }

    /// Short-term depression after a pre spike. Callers sample the
    /// transmitted weight first; depression applies to later spikes.
    pub fn stp_on_pre(&mut self, pre: usize, params: &PlasticityParams) {
        self.efficacy[pre] *= 1.0 - params.u_depress;
    }

    /// STDP bookkeeping for a pre spike: depress the outgoing row by the
    /// post traces and bump the pre trace.
    pub fn stdp_on_pre(&mut self, pre: usize, params: &PlasticityParams) {
        debug_assert!(params.learning_enabled);
        let mut row = self.w.row_mut(pre);
        for (w, &x) in row.iter_mut().zip(self.x_post.iter()) {
            *w = (*w - params.a_minus * x).clamp(0.0, params.w_max);
        }
        self.x_pre[pre] += 1.0;
    }

    /// STDP bookkeeping for a post spike: potentiate the incoming column
    /// by the pre traces and bump the post trace.
    pub fn stdp_on_post(&mut self, post: usize, params: &PlasticityParams) {
        debug_assert!(params.learning_enabled);
        let mut col = self.w.column_mut(post);
        for (w, &x) in col.iter_mut().zip(self.x_pre.iter()) {
            *w = (*w + params.a_plus * x).clamp(0.0, params.w_max);
        }
        self.x_post[post] += 1.0;
    }
}

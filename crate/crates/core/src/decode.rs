//! Spike-train decodings of the output layer: rate, latency, rank order.

use serde::{Deserialize, Serialize};

use crate::network::{Layer, SpikeTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coding {
    Rate,
    Latency,
    RankOrder,
}

impl Coding {
    pub fn as_str(self) -> &'static str {
        match self {
            Coding::Rate => "rate",
            Coding::Latency => "latency",
            Coding::RankOrder => "rank_order",
        }
    }
}

impl std::str::FromStr for Coding {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Coding> {
        match s {
            "rate" => Ok(Coding::Rate),
            "latency" => Ok(Coding::Latency),
            "rank_order" => Ok(Coding::RankOrder),
            other => Err(crate::error::Error::Config(format!(
                "unknown coding: {other:?}"
            ))),
        }
    }
}

/// Fixed-length readout of one trial's output spikes. `trial_ref` and
/// `label` ride along for evaluation only; nothing here reads the label.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub coding: Coding,
    pub values: Vec<f64>,
    pub trial_ref: usize,
    pub label: u32,
}

fn output_spike_times(trace: &SpikeTrace, window_us: u64, n_output: usize) -> Vec<Vec<u64>> {
    let mut times = vec![Vec::new(); n_output];
    for r in trace.layer_records(Layer::Output) {
        if r.t_us <= window_us && (r.neuron as usize) < n_output {
            times[r.neuron as usize].push(r.t_us);
        }
    }
    times
}

/// Spike count per output neuron over `[0, window_us]`.
pub fn decode_rate(trace: &SpikeTrace, window_us: u64, n_output: usize) -> FeatureVector {
    let values = output_spike_times(trace, window_us, n_output)
        .iter()
        .map(|t| t.len() as f64)
        .collect();
    FeatureVector {
        coding: Coding::Rate,
        values,
        trial_ref: 0,
        label: 0,
    }
}

/// Normalized first-spike time per output neuron; silent neurons read
/// the sentinel 1.0 (worst possible latency).
pub fn decode_latency(trace: &SpikeTrace, window_us: u64, n_output: usize) -> FeatureVector {
    let values = output_spike_times(trace, window_us, n_output)
        .iter()
        .map(|t| match t.iter().min() {
            Some(&first) => first as f64 / window_us as f64,
            None => 1.0,
        })
        .collect();
    FeatureVector {
        coding: Coding::Latency,
        values,
        trial_ref: 0,
        label: 0,
    }
}

/// First-spike order: neurons sorted by first spike time get ranks
/// 0, 1, 2, ... with ties broken toward the lower neuron id; silent
/// neurons all receive rank `n_output`.
pub fn decode_rank_order(trace: &SpikeTrace, n_output: usize) -> FeatureVector {
    let times = output_spike_times(trace, u64::MAX, n_output);
    let mut first: Vec<(usize, u64)> = times
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.iter().min().map(|&m| (i, m)))
        .collect();
    first.sort_by_key(|&(i, t)| (t, i));
    let mut values = vec![n_output as f64; n_output];
    for (rank, &(i, _)) in first.iter().enumerate() {
        values[i] = rank as f64;
    }
    FeatureVector {
        coding: Coding::RankOrder,
        values,
        trial_ref: 0,
        label: 0,
    }
}

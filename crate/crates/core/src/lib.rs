//! Event-driven spiking neural network engine for silicon-retina streams.
//!
//! The pipeline ingests DVS event recordings (CSV or AEDAT 3.1), encodes
//! them into a delayed-slice 3D input layer, runs them through a
//! three-layer LIF network supervised by a single habituating attention
//! neuron, and classifies the resulting output spike trains under rate,
//! latency and rank-order codings with a small MLP readout.
//!
//! Modules follow the data path: [`events`] and [`aedat`] parse streams,
//! [`synth`] generates test patterns, [`encoder`] builds input cubes,
//! [`neuron`] / [`plasticity`] / [`attention`] hold the kernels,
//! [`network`] owns the simulation loop and training, [`decode`] and
//! [`mlp`] produce the readout, and [`pipeline`] wires everything behind
//! the CLI.

pub mod aedat;
pub mod attention;
pub mod config;
pub mod decode;
pub mod encoder;
pub mod error;
pub mod events;
pub mod mlp;
pub mod network;
pub mod neuron;
pub mod pipeline;
pub mod plasticity;
pub mod synth;

pub use error::{Error, Result};

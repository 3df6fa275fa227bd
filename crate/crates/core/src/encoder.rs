//! Event stream to 3D input layer translation.
//!
//! The input layer is a W x H x D binary cube sampled at every simulation
//! step: the spatial plane is the downsampled event image and the depth
//! axis holds delayed time slices, slice 0 covering the most recent
//! interval of `slice_interval` microseconds and larger depths covering
//! progressively older intervals. Advancing time by exactly one slice
//! interval shifts every slice one level deeper and discards the oldest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{EventRecord, SensorGeometry, TrialSegment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarityMode {
    /// ON and OFF events share one channel.
    Merge,
    /// One occupancy channel per polarity.
    SeparateChannels,
}

/// How occupied cells translate into input spikes each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputCoding {
    /// A hot cell re-emits at every step while its slice covers the event.
    Level,
    /// A cell emits once, on the step its occupancy turns on.
    Edge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderConfig {
    pub geometry: SensorGeometry,
    /// Sensor pixels per input cell, per axis. Must divide both sensor sides.
    pub ds_factor: u16,
    /// Microseconds of events per time slice.
    pub slice_interval_us: u64,
    /// Number of delayed slices.
    pub depth: usize,
    /// Microseconds per simulation step.
    pub sim_step_us: u64,
    pub polarity_mode: PolarityMode,
    pub input_coding: InputCoding,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            geometry: SensorGeometry::DVS128,
            ds_factor: 8,
            slice_interval_us: 10_000,
            depth: 4,
            sim_step_us: 1_000,
            polarity_mode: PolarityMode::Merge,
            input_coding: InputCoding::Level,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ds_factor == 0 {
            return Err(Error::Config("ds_factor must be >= 1".into()));
        }
        if self.geometry.width % self.ds_factor != 0 || self.geometry.height % self.ds_factor != 0 {
            return Err(Error::Config(format!(
                "ds_factor {} must divide sensor geometry {}x{}",
                self.ds_factor, self.geometry.width, self.geometry.height
            )));
        }
        if self.sim_step_us == 0 {
            return Err(Error::Config("sim_step must be >= 1 microsecond".into()));
        }
        if self.slice_interval_us < self.sim_step_us {
            return Err(Error::Config(format!(
                "slice_interval {} must be >= sim_step {}",
                self.slice_interval_us, self.sim_step_us
            )));
        }
        if self.slice_interval_us % self.sim_step_us != 0 {
            return Err(Error::Config(format!(
                "slice_interval {} must be a multiple of sim_step {}",
                self.slice_interval_us, self.sim_step_us
            )));
        }
        if self.depth == 0 {
            return Err(Error::Config("depth must be >= 1".into()));
        }
        Ok(())
    }

    pub fn grid_width(&self) -> usize {
        (self.geometry.width / self.ds_factor) as usize
    }

    pub fn grid_height(&self) -> usize {
        (self.geometry.height / self.ds_factor) as usize
    }

    pub fn channels(&self) -> usize {
        match self.polarity_mode {
            PolarityMode::Merge => 1,
            PolarityMode::SeparateChannels => 2,
        }
    }

    /// Total number of input-layer neurons.
    pub fn n_input(&self) -> usize {
        self.grid_width() * self.grid_height() * self.depth * self.channels()
    }
}

/// Binary occupancy of the input layer at one simulation step.
///
/// Cell (u, v, d, c) is hot iff at least one event mapped to (u, v) on
/// channel c occurred in `[t - (d+1)*slice_interval, t - d*slice_interval)`.
/// Flat indices are row-major over (u, v, d, c).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputCube {
    grid_w: usize,
    grid_h: usize,
    depth: usize,
    channels: usize,
    occupancy: Vec<bool>,
}

impl InputCube {
    pub fn zeros(cfg: &EncoderConfig) -> InputCube {
        let (grid_w, grid_h, depth, channels) =
            (cfg.grid_width(), cfg.grid_height(), cfg.depth, cfg.channels());
        InputCube {
            grid_w,
            grid_h,
            depth,
            channels,
            occupancy: vec![false; grid_w * grid_h * depth * channels],
        }
    }

    /// An all-cold cube with the same dimensions.
    pub fn zeros_like(&self) -> InputCube {
        InputCube {
            occupancy: vec![false; self.occupancy.len()],
            ..*self
        }
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.grid_w, self.grid_h, self.depth, self.channels)
    }

    pub fn len(&self) -> usize {
        self.occupancy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupancy.iter().all(|&hot| !hot)
    }

    pub fn flat_index(&self, u: usize, v: usize, d: usize, c: usize) -> usize {
        debug_assert!(u < self.grid_w && v < self.grid_h && d < self.depth && c < self.channels);
        ((u * self.grid_h + v) * self.depth + d) * self.channels + c
    }

    /// Inverse of [`flat_index`]: (u, v, d, c).
    pub fn unflatten(&self, idx: usize) -> (usize, usize, usize, usize) {
        let c = idx % self.channels;
        let rest = idx / self.channels;
        let d = rest % self.depth;
        let rest = rest / self.depth;
        let v = rest % self.grid_h;
        let u = rest / self.grid_h;
        (u, v, d, c)
    }

    pub fn is_hot(&self, idx: usize) -> bool {
        self.occupancy[idx]
    }

    pub fn set_hot(&mut self, u: usize, v: usize, d: usize, c: usize) {
        let idx = self.flat_index(u, v, d, c);
        self.occupancy[idx] = true;
    }

    /// Flat indices of hot cells, ascending.
    pub fn hot_indices(&self) -> Vec<usize> {
        self.occupancy
            .iter()
            .enumerate()
            .filter_map(|(i, &hot)| hot.then_some(i))
            .collect()
    }

    fn same_shape(&self, other: &InputCube) -> bool {
        self.dims() == other.dims()
    }
}

/// Map an event to its input cell.
pub fn downsample(e: &EventRecord, cfg: &EncoderConfig) -> (u16, u16) {
    (e.x / cfg.ds_factor, e.y / cfg.ds_factor)
}

/// Evaluate the input cube for `trial` at simulation time `t_now`.
///
/// Multiple events in the same cell and slice collapse to a single hot
/// cell, and only events strictly before `t_now` contribute.
pub fn encode_step(trial: &TrialSegment, t_now: u64, cfg: &EncoderConfig) -> InputCube {
    let mut cube = InputCube::zeros(cfg);
    let horizon = cfg.depth as u64 * cfg.slice_interval_us;
    let window_start = t_now.saturating_sub(horizon);

    let events = &trial.events;
    let lo = events.partition_point(|e| e.t < window_start);
    let hi = events.partition_point(|e| e.t < t_now);
    for e in &events[lo..hi] {
        let age = t_now - e.t; // >= 1 because e.t < t_now
        let d = ((age - 1) / cfg.slice_interval_us) as usize;
        if d >= cfg.depth {
            continue;
        }
        let (u, v) = downsample(e, cfg);
        let c = match cfg.polarity_mode {
            PolarityMode::Merge => 0,
            PolarityMode::SeparateChannels => e.polarity.channel(),
        };
        cube.set_hot(u as usize, v as usize, d, c);
    }
    cube
}

/// Flat indices of input neurons spiking at this step.
///
/// Level coding emits every hot cell of `now`; edge coding emits only
/// cells that turned hot since `prev`.
pub fn input_spikes(prev: &InputCube, now: &InputCube, coding: InputCoding) -> Result<Vec<usize>> {
    if !prev.same_shape(now) {
        return Err(Error::ShapeMismatch(format!(
            "input cubes {:?} vs {:?}",
            prev.dims(),
            now.dims()
        )));
    }
    let spikes = match coding {
        InputCoding::Level => now.hot_indices(),
        InputCoding::Edge => now
            .hot_indices()
            .into_iter()
            .filter(|&i| !prev.is_hot(i))
            .collect(),
    };
    Ok(spikes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::Polarity;
    use std::collections::{BTreeMap, BTreeSet};

    fn cfg(slice_us: u64, depth: usize) -> EncoderConfig {
        EncoderConfig {
            slice_interval_us: slice_us,
            depth,
            ..EncoderConfig::default()
        }
    }

    fn trial(events: Vec<EventRecord>) -> TrialSegment {
        TrialSegment {
            class_label: 0,
            t_start: 0,
            t_end: 1_000_000,
            events,
        }
    }

    fn ev(t: u64, x: u16, y: u16, polarity: Polarity) -> EventRecord {
        EventRecord { t, x, y, polarity }
    }

    #[test]
    fn downsample_floor_arithmetic() {
        let cfg = EncoderConfig::default();
        assert_eq!(downsample(&ev(0, 0, 0, Polarity::On), &cfg), (0, 0));
        assert_eq!(downsample(&ev(0, 127, 127, Polarity::On), &cfg), (15, 15));
    }

    #[test]
    fn downsample_covers_grid_uniformly() {
        // Brute force over all 128x128 pixels at ds=8: exactly 16x16
        // distinct cells, each hit 64 times.
        let cfg = EncoderConfig::default();
        let mut counts: BTreeMap<(u16, u16), usize> = BTreeMap::new();
        for x in 0..128 {
            for y in 0..128 {
                let cell = downsample(&ev(0, x, y, Polarity::On), &cfg);
                *counts.entry(cell).or_insert(0) += 1;
            }
        }
        assert_eq!(counts.len(), 16 * 16);
        assert!(counts.values().all(|&n| n == 64));
    }

    #[test]
    fn encode_no_events_is_zero_cube() {
        let cube = encode_step(&trial(vec![]), 5_000, &cfg(1_000, 3));
        assert!(cube.is_empty());
    }

    #[test]
    fn encode_single_event_moves_through_slices() {
        // Event at t=0 in cell (0, 0); slice interval 1000, depth 3.
        let t = trial(vec![ev(0, 0, 0, Polarity::On)]);
        let cfg = cfg(1_000, 3);

        let cube = encode_step(&t, 500, &cfg);
        assert_eq!(cube.hot_indices(), vec![cube.flat_index(0, 0, 0, 0)]);

        let cube = encode_step(&t, 1_500, &cfg);
        assert_eq!(cube.hot_indices(), vec![cube.flat_index(0, 0, 1, 0)]);

        let cube = encode_step(&t, 3_500, &cfg);
        assert!(cube.is_empty());
    }

    #[test]
    fn encode_is_causal() {
        // Events at or after t_now do not appear.
        let t = trial(vec![ev(1_000, 3, 3, Polarity::On)]);
        let cfg = cfg(1_000, 3);
        assert!(encode_step(&t, 1_000, &cfg).is_empty());
        assert!(!encode_step(&t, 1_001, &cfg).is_empty());
    }

    #[test]
    fn polarity_mode_selects_channel() {
        let t = trial(vec![ev(0, 8, 0, Polarity::On)]);
        let merged = encode_step(&t, 500, &cfg(1_000, 3));
        assert_eq!(merged.hot_indices().len(), 1);

        let cfg_sep = EncoderConfig {
            polarity_mode: PolarityMode::SeparateChannels,
            ..cfg(1_000, 3)
        };
        let cube = encode_step(&t, 500, &cfg_sep);
        let hot = cube.hot_indices();
        assert_eq!(hot.len(), 1);
        let (u, v, d, c) = cube.unflatten(hot[0]);
        assert_eq!((u, v, d, c), (1, 0, 0, 1)); // ON channel

        let t_off = trial(vec![ev(0, 8, 0, Polarity::Off)]);
        let cube = encode_step(&t_off, 500, &cfg_sep);
        let (.., c) = cube.unflatten(cube.hot_indices()[0]);
        assert_eq!(c, 0); // OFF channel
    }

    #[test]
    fn duplicate_events_do_not_change_cube() {
        let base = vec![ev(100, 40, 41, Polarity::On), ev(230, 7, 9, Polarity::Off)];
        let mut doubled = base.clone();
        doubled.push(base[0]);
        doubled.sort_by_key(|e| e.t);
        let cfg = cfg(1_000, 4);
        for t_now in [500, 1_100, 2_300, 4_500] {
            assert_eq!(
                encode_step(&trial(base.clone()), t_now, &cfg),
                encode_step(&trial(doubled.clone()), t_now, &cfg)
            );
        }
    }

    #[test]
    fn slice_shift_property() {
        // Advancing time by one slice interval shifts slices one level deeper.
        let cfg = cfg(1_000, 4);
        let events = (0..200)
            .map(|i| ev(i * 37, (i % 16) as u16 * 8, (i % 13) as u16 * 8, Polarity::On))
            .collect();
        let t = trial(events);
        for t_now in [2_000u64, 3_000, 5_000] {
            let now = encode_step(&t, t_now, &cfg);
            let later = encode_step(&t, t_now + cfg.slice_interval_us, &cfg);
            for u in 0..now.grid_w {
                for v in 0..now.grid_h {
                    for d in 0..now.depth - 1 {
                        assert_eq!(
                            now.is_hot(now.flat_index(u, v, d, 0)),
                            later.is_hot(later.flat_index(u, v, d + 1, 0)),
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn input_spikes_empty_and_singleton() {
        let cfg = cfg(1_000, 3);
        let zero = InputCube::zeros(&cfg);
        assert!(input_spikes(&zero, &zero, InputCoding::Level)
            .unwrap()
            .is_empty());

        let mut one = InputCube::zeros(&cfg);
        one.set_hot(2, 3, 1, 0);
        let spikes = input_spikes(&zero, &one, InputCoding::Level).unwrap();
        assert_eq!(spikes, vec![one.flat_index(2, 3, 1, 0)]);
    }

    #[test]
    fn input_spikes_match_hot_set_and_unflatten_round_trips() {
        let cfg = cfg(1_000, 4);
        let mut cube = InputCube::zeros(&cfg);
        // Deterministic pseudo-random pattern.
        let mut x = 1234567u64;
        for _ in 0..300 {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let u = (x >> 33) as usize % cube.grid_w;
            let v = (x >> 21) as usize % cube.grid_h;
            let d = (x >> 11) as usize % cube.depth;
            cube.set_hot(u, v, d, 0);
        }
        let zero = InputCube::zeros(&cfg);
        let spikes = input_spikes(&zero, &cube, InputCoding::Level).unwrap();
        let brute: Vec<usize> = (0..cube.len()).filter(|&i| cube.is_hot(i)).collect();
        assert_eq!(spikes, brute);
        // Flat index bijection over the hot subset.
        let mut seen = BTreeSet::new();
        for &i in &spikes {
            assert!(i < cfg.n_input());
            let (u, v, d, c) = cube.unflatten(i);
            assert_eq!(cube.flat_index(u, v, d, c), i);
            assert!(seen.insert((u, v, d, c)));
        }
    }

    #[test]
    fn edge_coding_emits_only_new_cells() {
        let cfg = cfg(1_000, 3);
        let mut prev = InputCube::zeros(&cfg);
        prev.set_hot(0, 0, 0, 0);
        let mut now = InputCube::zeros(&cfg);
        now.set_hot(0, 0, 0, 0);
        now.set_hot(1, 1, 0, 0);
        let spikes = input_spikes(&prev, &now, InputCoding::Edge).unwrap();
        assert_eq!(spikes, vec![now.flat_index(1, 1, 0, 0)]);
    }

    #[test]
    fn input_spikes_rejects_shape_mismatch() {
        let a = InputCube::zeros(&cfg(1_000, 3));
        let b = InputCube::zeros(&cfg(1_000, 4));
        assert!(matches!(
            input_spikes(&a, &b, InputCoding::Level),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn config_validation() {
        assert!(EncoderConfig::default().validate().is_ok());
        let bad_ds = EncoderConfig {
            ds_factor: 7,
            ..EncoderConfig::default()
        };
        assert!(bad_ds.validate().is_err());
        let bad_slice = EncoderConfig {
            slice_interval_us: 1_500,
            ..EncoderConfig::default()
        };
        assert!(bad_slice.validate().is_err());
        let bad_depth = EncoderConfig {
            depth: 0,
            ..EncoderConfig::default()
        };
        assert!(bad_depth.validate().is_err());
    }
}

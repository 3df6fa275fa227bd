//! Synthetic event patterns for pipeline tests and desk-scale experiments.
//!
//! Three parametric motions are generated as event trials: a clockwise
//! outward spiral, its time-reversed counterpart (seen as counter-clockwise
//! motion, same pixels in reversed order), and a horizontal sweep.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{EventRecord, Polarity, SensorGeometry, TrialSegment};

/// Microseconds between path samples.
const TICK_US: u64 = 500;
/// Events emitted around the path point per tick.
const EVENTS_PER_TICK: usize = 3;
/// Full revolutions of the spiral over one trial.
const SPIRAL_TURNS: f64 = 4.0;
/// Emission burst cycle: events are produced during the first half of
/// every cycle and pause in the second, like the velocity bursts of real
/// gesture recordings. The path itself keeps moving through the pauses.
const BURST_PERIOD_US: u64 = 60_000;
const BURST_ON_US: u64 = 30_000;

fn in_burst(t: u64) -> bool {
    t % BURST_PERIOD_US < BURST_ON_US
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    SpiralCw,
    SpiralCcw,
    HorizontalSweep,
}

impl PatternKind {
    pub const ALL: [PatternKind; 3] = [
        PatternKind::SpiralCw,
        PatternKind::SpiralCcw,
        PatternKind::HorizontalSweep,
    ];

    /// Class label assigned to trials of this pattern.
    pub fn class_label(self) -> u32 {
        match self {
            PatternKind::SpiralCw => 0,
            PatternKind::SpiralCcw => 1,
            PatternKind::HorizontalSweep => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PatternKind::SpiralCw => "spiral_cw",
            PatternKind::SpiralCcw => "spiral_ccw",
            PatternKind::HorizontalSweep => "horizontal_sweep",
        }
    }
}

impl std::str::FromStr for PatternKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<PatternKind> {
        match s {
            "spiral_cw" => Ok(PatternKind::SpiralCw),
            "spiral_ccw" => Ok(PatternKind::SpiralCcw),
            "horizontal_sweep" => Ok(PatternKind::HorizontalSweep),
            other => Err(Error::Config(format!("unknown pattern kind: {other:?}"))),
        }
    }
}

/// Generate one synthetic trial. Pure function of (kind, duration,
/// geometry, seed); the counter-clockwise spiral is the exact
/// time-reversal of the clockwise one, so both trace the same pixels.
pub fn gen_synthetic_pattern(
    kind: PatternKind,
    duration_us: u64,
    geometry: SensorGeometry,
    seed: u64,
) -> Result<TrialSegment> {
    if duration_us == 0 {
        return Err(Error::EmptyTrial(format!(
            "pattern {} with zero duration",
            kind.as_str()
        )));
    }
    let events = match kind {
        PatternKind::SpiralCw => spiral_events(duration_us, geometry, seed),
        PatternKind::SpiralCcw => {
            let mut events = spiral_events(duration_us, geometry, seed);
            let t_last = events.last().map(|e| e.t).unwrap_or(0);
            for e in &mut events {
                e.t = t_last - e.t;
            }
            events.reverse();
            events
        }
        PatternKind::HorizontalSweep => sweep_events(duration_us, geometry, seed),
    };
    Ok(TrialSegment {
        class_label: kind.class_label(),
        t_start: 0,
        t_end: duration_us,
        events,
    })
}

fn jittered(rng: &mut ChaCha8Rng, value: f64, max: u16) -> u16 {
    let j = rng.random_range(-1i32..=1);
    (value.round() as i32 + j).clamp(0, max as i32 - 1) as u16
}

fn random_polarity(rng: &mut ChaCha8Rng) -> Polarity {
    if rng.random_bool(0.5) {
        Polarity::On
    } else {
        Polarity::Off
    }
}

/// Clockwise spiral from the center outward, constant angular rate.
fn spiral_events(duration_us: u64, geometry: SensorGeometry, seed: u64) -> Vec<EventRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cx = (geometry.width as f64 - 1.0) / 2.0;
    let cy = (geometry.height as f64 - 1.0) / 2.0;
    let r_min = 0.06 * geometry.width.min(geometry.height) as f64;
    let r_max = 0.45 * geometry.width.min(geometry.height) as f64;

    let mut events = Vec::new();
    let mut t = 0;
    while t < duration_us {
        if in_burst(t) {
            let f = t as f64 / duration_us as f64;
            let radius = r_min + (r_max - r_min) * f;
            // Screen coordinates have y growing downward, so a growing
            // angle reads as clockwise motion.
            let angle = SPIRAL_TURNS * std::f64::consts::TAU * f;
            let px = cx + radius * angle.cos();
            let py = cy + radius * angle.sin();
            for _ in 0..EVENTS_PER_TICK {
                events.push(EventRecord {
                    t,
                    x: jittered(&mut rng, px, geometry.width),
                    y: jittered(&mut rng, py, geometry.height),
                    polarity: random_polarity(&mut rng),
                });
            }
        }
        t += TICK_US;
    }
    events
}

/// A short vertical bar making two left-to-right passes over the trial.
/// Bar size and speed are chosen so all three patterns drive a
/// comparable number of input cells per step.
fn sweep_events(duration_us: u64, geometry: SensorGeometry, seed: u64) -> Vec<EventRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bar_half = (geometry.height / 10) as f64;
    let cy = (geometry.height as f64 - 1.0) / 2.0;

    let mut events = Vec::new();
    let mut t = 0;
    while t < duration_us {
        if in_burst(t) {
            let f = (2.0 * t as f64 / duration_us as f64) % 1.0;
            let px = f * (geometry.width as f64 - 1.0);
            for _ in 0..EVENTS_PER_TICK {
                let py = cy + rng.random_range(-bar_half..=bar_half);
                events.push(EventRecord {
                    t,
                    x: jittered(&mut rng, px, geometry.width),
                    y: jittered(&mut rng, py, geometry.height),
                    polarity: random_polarity(&mut rng),
                });
            }
        }
        t += TICK_US;
    }
    events
}

//! Event stream model and text interchange formats.
//!
//! The canonical interchange format is a 4-column CSV `t_us,x,y,p` with
//! `p` in {0,1} (1 = ON), LF line endings and an optional header line.
//! Label tables follow the gesture-dataset convention
//! `class,startTime_usec,endTime_usec` with an optional header.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Brightness-change sign reported by the sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Off,
    On,
}

impl Polarity {
    pub fn from_bit(bit: u8) -> Option<Polarity> {
        match bit {
            0 => Some(Polarity::Off),
            1 => Some(Polarity::On),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Polarity::Off => 0,
            Polarity::On => 1,
        }
    }

    /// Channel index used when polarities are kept in separate channels.
    pub fn channel(self) -> usize {
        self.bit() as usize
    }
}

/// One retina event: timestamp in microseconds since stream start,
/// pixel coordinates, polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventRecord {
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub polarity: Polarity,
}

/// Pixel array dimensions of the sensor (DVS128 is 128x128).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorGeometry {
    pub width: u16,
    pub height: u16,
}

impl SensorGeometry {
    pub const DVS128: SensorGeometry = SensorGeometry {
        width: 128,
        height: 128,
    };

    pub fn new(width: u16, height: u16) -> Result<SensorGeometry> {
        if width == 0 || height == 0 {
            return Err(Error::Config(format!(
                "sensor geometry must be at least 1x1, got {width}x{height}"
            )));
        }
        Ok(SensorGeometry { width, height })
    }

    pub fn contains(&self, x: u16, y: u16) -> bool {
        x < self.width && y < self.height
    }
}

/// A labeled slice of an event stream: one gesture sample.
///
/// `t_start`/`t_end` are the absolute window bounds from the label table;
/// the contained events are re-based so a timestamp of 0 corresponds to
/// `t_start` (an event at absolute time `t` is stored as `t - t_start`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialSegment {
    pub class_label: u32,
    pub t_start: u64,
    pub t_end: u64,
    pub events: Vec<EventRecord>,
}

impl TrialSegment {
    pub fn duration_us(&self) -> u64 {
        self.t_end - self.t_start
    }
}

/// One row of a label table: a class window in absolute stream time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelWindow {
    pub class: u32,
    pub t_start: u64,
    pub t_end: u64,
}

fn parse_field<T: std::str::FromStr>(field: &str, line: usize, what: &str) -> Result<T> {
    field.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid {what}: {field:?}"),
    })
}

/// True when a line should be treated as a header: its first comma
/// field is not an unsigned integer. Only ever applied to line 1.
fn looks_like_header(line: &str) -> bool {
    let first = line.split(',').next().unwrap_or("");
    first.trim().parse::<u64>().is_err()
}

/// Parse CSV events `t_us,x,y,p`, skipping an optional header line.
///
/// Records are returned sorted by non-decreasing `t` (a stable sort is
/// applied if the input is unsorted). Coordinates outside `geometry`
/// are an error, never silently truncated.
pub fn parse_csv_events<R: BufRead>(reader: R, geometry: SensorGeometry) -> Result<Vec<EventRecord>> {
    let mut events = Vec::new();
    let mut sorted = true;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if lineno == 1 && looks_like_header(trimmed) {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 4 fields `t_us,x,y,p`, got {}", fields.len()),
            });
        }
        let t: u64 = parse_field(fields[0], lineno, "timestamp")?;
        let x: u16 = parse_field(fields[1], lineno, "x coordinate")?;
        let y: u16 = parse_field(fields[2], lineno, "y coordinate")?;
        let p: u8 = parse_field(fields[3], lineno, "polarity")?;
        let polarity = Polarity::from_bit(p).ok_or_else(|| Error::Parse {
            line: lineno,
            msg: format!("polarity must be 0 or 1, got {p}"),
        })?;
        if !geometry.contains(x, y) {
            return Err(Error::OutOfBounds {
                context: format!("line {lineno}"),
                x: x as u32,
                y: y as u32,
                width: geometry.width as u32,
                height: geometry.height as u32,
            });
        }
        if events.last().is_some_and(|last: &EventRecord| t < last.t) {
            sorted = false;
        }
        events.push(EventRecord { t, x, y, polarity });
    }
    if !sorted {
        events.sort_by_key(|e| e.t);
    }
    Ok(events)
}

/// Write events as canonical CSV. The output re-parses to an identical list.
pub fn write_csv_events<W: Write>(events: &[EventRecord], mut writer: W) -> Result<()> {
    for e in events {
        writeln!(writer, "{},{},{},{}", e.t, e.x, e.y, e.polarity.bit())?;
    }
    Ok(())
}

/// Parse a label table `class,startTime_usec,endTime_usec`.
///
/// Rows are returned in file order with times as-is; window validation
/// happens in [`segment_trials`].
pub fn load_labels<R: BufRead>(reader: R) -> Result<Vec<LabelWindow>> {
    let mut labels = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if lineno == 1 && looks_like_header(trimmed) {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!(
                    "expected 3 fields `class,startTime_usec,endTime_usec`, got {}",
                    fields.len()
                ),
            });
        }
        labels.push(LabelWindow {
            class: parse_field(fields[0], lineno, "class label")?,
            t_start: parse_field(fields[1], lineno, "start time")?,
            t_end: parse_field(fields[2], lineno, "end time")?,
        });
    }
    Ok(labels)
}

/// Cut labeled trial segments out of a time-sorted event stream.
///
/// One segment is produced per label window whose class is in `keep`
/// (in label order); events inside a window are re-based to
/// window-local offsets. Events outside every window are discarded,
/// and overlapping windows duplicate shared events into each segment.
pub fn segment_trials(
    events: &[EventRecord],
    labels: &[LabelWindow],
    keep: &[u32],
) -> Result<Vec<TrialSegment>> {
    let mut trials = Vec::new();
    for label in labels {
        if !keep.contains(&label.class) {
            continue;
        }
        if label.t_start >= label.t_end {
            return Err(Error::InvalidWindow {
                class: label.class,
                t_start: label.t_start,
                t_end: label.t_end,
            });
        }
        let lo = events.partition_point(|e| e.t < label.t_start);
        let hi = events.partition_point(|e| e.t < label.t_end);
        let segment_events = events[lo..hi]
            .iter()
            .map(|e| EventRecord {
                t: e.t - label.t_start,
                ..*e
            })
            .collect();
        trials.push(TrialSegment {
            class_label: label.class,
            t_start: label.t_start,
            t_end: label.t_end,
            events: segment_events,
        });
    }
    Ok(trials)
}

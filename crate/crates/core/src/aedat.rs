//! AEDAT 3.1 reader, restricted to polarity event packets.
//!
//! Layout: ASCII header lines starting with `#` (the first must begin
//! with `#!AER-DAT3.1`), then a sequence of event packets. Each packet
//! starts with a 28-byte little-endian header:
//!
//! ```text
//! offset  field              type
//! 0       eventType          i16   (1 = polarity)
//! 2       eventSource        i16
//! 4       eventSize          i32   (bytes per event; 8 for polarity)
//! 8       eventTSOffset      i32   (byte offset of the timestamp; 4)
//! 12      eventTSOverflow    i32   (timestamp overflow counter)
//! 16      eventCapacity      i32
//! 20      eventNumber        i32
//! 24      eventValid         i32
//! ```
//!
//! followed by `eventNumber * eventSize` bytes of event data. A polarity
//! event is a 32-bit data word then a 31-bit timestamp in microseconds:
//! data bit 0 = validity, bit 1 = polarity (1 = ON), bits 2-16 = y,
//! bits 17-31 = x. The absolute timestamp is
//! `(eventTSOverflow << 31) | timestamp`. Non-polarity packets are
//! skipped; invalid events (validity bit clear) are dropped.

use std::io::Read;

use crate::error::{Error, Result};
use crate::events::{EventRecord, Polarity, SensorGeometry};

const MAGIC: &str = "#!AER-DAT3.1";
const PACKET_HEADER_LEN: usize = 28;
const POLARITY_EVENT: i16 = 1;
const POLARITY_EVENT_SIZE: i32 = 8;

/// Parse an AEDAT 3.1 stream into its sensor geometry and polarity events.
///
/// Geometry is taken from a `#Source` header line naming a known sensor
/// (currently DVS128); streams without one default to 128x128.
pub fn parse_aedat31<R: Read>(mut reader: R) -> Result<(SensorGeometry, Vec<EventRecord>)> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;

    let (geometry, mut offset) = parse_header(&bytes)?;
    let mut events = Vec::new();

    while offset < bytes.len() {
        offset = parse_packet(&bytes, offset, geometry, &mut events)?;
    }

    // Packet boundaries guarantee monotone time within a packet; packets
    // from multiple sources may interleave, so sort stably across them.
    if events.windows(2).any(|w| w[0].t > w[1].t) {
        events.sort_by_key(|e| e.t);
    }
    Ok((geometry, events))
}

/// Consume the ASCII header lines; returns (geometry, offset of first packet).
fn parse_header(bytes: &[u8]) -> Result<(SensorGeometry, usize)> {
    if !bytes.starts_with(MAGIC.as_bytes()) {
        return Err(Error::Format(format!(
            "missing `{MAGIC}` magic header"
        )));
    }
    let mut geometry = SensorGeometry::DVS128;
    let mut offset = 0;
    while offset < bytes.len() && bytes[offset] == b'#' {
        let line_end = bytes[offset..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| offset + p + 1)
            .unwrap_or(bytes.len());
        let line = String::from_utf8_lossy(&bytes[offset..line_end]);
        if line.starts_with("#Source") && line.contains("DVS128") {
            geometry = SensorGeometry::DVS128;
        }
        offset = line_end;
    }
    Ok((geometry, offset))
}

fn read_i16(bytes: &[u8], offset: usize) -> i16 {
    i16::from_le_bytes([bytes[offset], bytes[offset + 1]])
}

fn read_i32(bytes: &[u8], offset: usize) -> i32 {
    i32::from_le_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ])
}

/// Parse one packet starting at `offset`; appends decoded polarity events
/// and returns the offset just past the packet.
fn parse_packet(
    bytes: &[u8],
    offset: usize,
    geometry: SensorGeometry,
    events: &mut Vec<EventRecord>,
) -> Result<usize> {
    if bytes.len() - offset < PACKET_HEADER_LEN {
        return Err(Error::Truncated {
            offset: offset as u64,
            msg: format!(
                "packet header needs {PACKET_HEADER_LEN} bytes, {} left",
                bytes.len() - offset
            ),
        });
    }
    let event_type = read_i16(bytes, offset);
    let event_size = read_i32(bytes, offset + 4);
    let ts_overflow = read_i32(bytes, offset + 12);
    let event_number = read_i32(bytes, offset + 20);
    if event_size <= 0 || event_number < 0 {
        return Err(Error::Format(format!(
            "packet at byte {offset} has eventSize {event_size}, eventNumber {event_number}"
        )));
    }

    let body_start = offset + PACKET_HEADER_LEN;
    let body_len = event_number as usize * event_size as usize;
    if bytes.len() - body_start < body_len {
        return Err(Error::Truncated {
            offset: body_start as u64,
            msg: format!(
                "packet body needs {body_len} bytes, {} left",
                bytes.len() - body_start
            ),
        });
    }

    if event_type == POLARITY_EVENT {
        if event_size != POLARITY_EVENT_SIZE {
            return Err(Error::Format(format!(
                "polarity packet at byte {offset} has eventSize {event_size}, expected {POLARITY_EVENT_SIZE}"
            )));
        }
        for i in 0..event_number as usize {
            let ev_off = body_start + i * POLARITY_EVENT_SIZE as usize;
            let data = read_i32(bytes, ev_off) as u32;
            let timestamp = read_i32(bytes, ev_off + 4);
            if data & 1 == 0 {
                continue; // validity bit clear
            }
            let polarity = if (data >> 1) & 1 == 1 {
                Polarity::On
            } else {
                Polarity::Off
            };
            let y = ((data >> 2) & 0x7FFF) as u16;
            let x = ((data >> 17) & 0x7FFF) as u16;
            if !geometry.contains(x, y) {
                return Err(Error::OutOfBounds {
                    context: format!("byte offset {ev_off}"),
                    x: x as u32,
                    y: y as u32,
                    width: geometry.width as u32,
                    height: geometry.height as u32,
                });
            }
            let t = ((ts_overflow as u64) << 31) | (timestamp as u64 & 0x7FFF_FFFF);
            events.push(EventRecord { t, x, y, polarity });
        }
    }
    Ok(body_start + body_len)
}

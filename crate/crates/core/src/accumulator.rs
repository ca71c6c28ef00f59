//! Event accumulation into binary edge images.
//!
//! Events are collected over consecutive half-open time windows
//! `[t0 + k*dt, t0 + (k+1)*dt)`, where `t0` is the first event's timestamp.
//! A pixel of the resulting edge image is set when at least one event of
//! either polarity fell on it during the window.

use crate::error::{Error, Result};
use crate::event::{Event, SensorGeometry};

/// Binary per-window occupancy grid of event pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeImage {
    pub geometry: SensorGeometry,
    /// Row-major grid, `true` where at least one event landed this window.
    pub bits: Vec<bool>,
    /// Start of the window, microseconds.
    pub window_start: u64,
    /// Window length, microseconds.
    pub window_length: u64,
    /// Index of the window within the stream, starting at 0.
    pub window_index: u64,
}

impl EdgeImage {
    pub fn empty(geometry: SensorGeometry, window_start: u64, window_length: u64, window_index: u64) -> EdgeImage {
        EdgeImage {
            geometry,
            bits: vec![false; geometry.len()],
            window_start,
            window_length,
            window_index,
        }
    }

    /// Number of set pixels.
    pub fn edge_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[self.geometry.index(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32) {
        let idx = self.geometry.index(x, y);
        self.bits[idx] = true;
    }
}

/// Streaming single-writer accumulator.
///
/// `push` fills the current window buffer; when an event belongs to a later
/// window the buffer is swapped out and every window up to the event's one is
/// emitted, including all-zero windows for event droughts. Emission order
/// always equals window order.
#[derive(Debug)]
pub struct Accumulator {
    geometry: SensorGeometry,
    dt: u64,
    origin: Option<u64>,
    current: Vec<bool>,
    current_index: u64,
    last_t: u64,
    events_pushed: usize,
}

impl Accumulator {
    pub fn new(geometry: SensorGeometry, dt: u64) -> Result<Accumulator> {
        if dt == 0 {
            return Err(Error::Parameter("accumulation window must be > 0 us".into()));
        }
        Ok(Accumulator {
            geometry,
            dt,
            origin: None,
            current: vec![false; geometry.len()],
            current_index: 0,
            last_t: 0,
            events_pushed: 0,
        })
    }

    /// Feed one event; returns the edge images of every window that closed.
    pub fn push(&mut self, event: Event) -> Result<Vec<EdgeImage>> {
        let t0 = match self.origin {
            Some(t0) => {
                if event.t < self.last_t {
                    return Err(Error::Ordering {
                        index: self.events_pushed,
                        prev: self.last_t,
                        t: event.t,
                    });
                }
                t0
            }
            None => {
                self.origin = Some(event.t);
                event.t
            }
        };
        self.last_t = event.t;
        self.events_pushed += 1;

        let window = (event.t - t0) / self.dt;
        let mut emitted = Vec::new();
        while self.current_index < window {
            emitted.push(self.take_current(t0));
        }
        let idx = self.geometry.index(event.x as u32, event.y as u32);
        self.current[idx] = true;
        Ok(emitted)
    }

    /// Close the stream, emitting the final window if any event was seen.
    pub fn finish(mut self) -> Option<EdgeImage> {
        let t0 = self.origin?;
        Some(self.take_current(t0))
    }

    fn take_current(&mut self, t0: u64) -> EdgeImage {
        let bits = std::mem::replace(&mut self.current, vec![false; self.geometry.len()]);
        let image = EdgeImage {
            geometry: self.geometry,
            bits,
            window_start: t0 + self.current_index * self.dt,
            window_length: self.dt,
            window_index: self.current_index,
        };
        self.current_index += 1;
        image
    }
}

/// Accumulate a whole ordered event sequence into edge images.
///
/// Windows containing zero events between active windows are emitted as
/// all-zero images; nothing is emitted past the last event's window.
pub fn accumulate(events: &[Event], dt: u64, geometry: SensorGeometry) -> Result<Vec<EdgeImage>> {
    let mut acc = Accumulator::new(geometry, dt)?;
    let mut out = Vec::new();
    for &event in events {
        out.extend(acc.push(event)?);
    }
    if let Some(last) = acc.finish() {
        out.push(last);
    }
    Ok(out)
}

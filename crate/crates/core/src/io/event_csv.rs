//! Event stream text format: one `t,x,y,p` line per event.
//!
//! `t` is the timestamp in microseconds, `x`/`y` the pixel column and row,
//! `p` the polarity bit (1 positive, 0 negative). Lines starting with `#`
//! are comments; blank lines are ignored. Timestamps must be non-decreasing
//! and coordinates must lie inside the declared sensor geometry.

use crate::error::{Error, Result};
use crate::event::{Event, Polarity, SensorGeometry};
use std::io::{BufRead, Write};

pub fn parse_event_stream(source: impl BufRead, geometry: SensorGeometry) -> Result<Vec<Event>> {
    let mut events = Vec::new();
    let mut prev_t: Option<u64> = None;
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(',');
        let mut next_field = |name: &str| {
            fields
                .next()
                .map(str::trim)
                .filter(|f| !f.is_empty())
                .ok_or_else(|| Error::Parse {
                    line: line_no,
                    msg: format!("missing {name} field"),
                })
        };
        let t: u64 = parse_field(next_field("timestamp")?, "timestamp", line_no)?;
        let x: u16 = parse_field(next_field("x")?, "x", line_no)?;
        let y: u16 = parse_field(next_field("y")?, "y", line_no)?;
        let p: u8 = parse_field(next_field("polarity")?, "polarity", line_no)?;
        if let Some(extra) = fields.next() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("unexpected extra field {extra:?}"),
            });
        }
        let polarity = Polarity::from_bit(p).ok_or_else(|| Error::Parse {
            line: line_no,
            msg: format!("polarity must be 0 or 1, got {p}"),
        })?;
        if !geometry.contains(x as u32, y as u32) {
            return Err(Error::Geometry {
                line: line_no,
                x: x.into(),
                y: y.into(),
                width: geometry.width,
                height: geometry.height,
            });
        }
        if let Some(prev) = prev_t {
            if t < prev {
                return Err(Error::Ordering {
                    index: events.len(),
                    prev,
                    t,
                });
            }
        }
        prev_t = Some(t);
        events.push(Event { t, x, y, polarity });
    }
    Ok(events)
}

fn parse_field<T: std::str::FromStr>(field: &str, name: &str, line: usize) -> Result<T> {
    field.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid {name} value {field:?}"),
    })
}

pub fn write_event_stream(events: &[Event], mut sink: impl Write) -> Result<()> {
    writeln!(sink, "# t_us,x,y,polarity")?;
    for event in events {
        writeln!(
            sink,
            "{},{},{},{}",
            event.t,
            event.x,
            event.y,
            event.polarity.as_bit()
        )?;
    }
    Ok(())
}

//! Binary flow-field interchange format.
//!
//! Little-endian layout: a magic float tag, width and height as 32-bit
//! signed integers, then row-major interleaved (u, v) 32-bit floats. The
//! layout matches the common flow-benchmark format so external viewers can
//! open the files. Invalid pixels are stored as a sentinel pair; on read,
//! any component beyond the sentinel threshold marks the pixel invalid and
//! zeroes its vector.

use crate::error::{Error, Result};
use crate::event::SensorGeometry;
use crate::flow::FlowField;
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::io::{Read, Write};

const MAGIC: f32 = 202021.25;
/// Components with magnitude above this mark a pixel invalid.
pub const INVALID_THRESHOLD: f32 = 1e9;
/// Value written for each component of an invalid pixel.
pub const INVALID_SENTINEL: f32 = 1e10;

/// Cap on accepted pixel counts, guarding against corrupt headers.
const MAX_PIXELS: i64 = 1 << 27;

/// File name for one window's flow field.
pub fn window_flow_filename(window_index: u64) -> String {
    format!("flow_{window_index:06}.flo")
}

pub fn write_flow(field: &FlowField, mut sink: impl Write) -> Result<()> {
    sink.write_f32::<LittleEndian>(MAGIC)?;
    sink.write_i32::<LittleEndian>(field.geometry.width as i32)?;
    sink.write_i32::<LittleEndian>(field.geometry.height as i32)?;
    for i in 0..field.geometry.len() {
        if field.valid[i] {
            sink.write_f32::<LittleEndian>(field.u[i])?;
            sink.write_f32::<LittleEndian>(field.v[i])?;
        } else {
            sink.write_f32::<LittleEndian>(INVALID_SENTINEL)?;
            sink.write_f32::<LittleEndian>(INVALID_SENTINEL)?;
        }
    }
    Ok(())
}

pub fn read_flow(mut source: impl Read) -> Result<FlowField> {
    let map_eof = |e: std::io::Error| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::FlowFormat("truncated flow file".into())
        } else {
            Error::Io(e)
        }
    };
    let magic = source.read_f32::<LittleEndian>().map_err(map_eof)?;
    if magic != MAGIC {
        return Err(Error::FlowFormat(format!(
            "bad magic tag {magic}, expected {MAGIC}"
        )));
    }
    let width = source.read_i32::<LittleEndian>().map_err(map_eof)?;
    let height = source.read_i32::<LittleEndian>().map_err(map_eof)?;
    if width < 1 || height < 1 || (width as i64) * (height as i64) > MAX_PIXELS {
        return Err(Error::FlowFormat(format!(
            "implausible dimensions {width}x{height}"
        )));
    }
    let geometry = SensorGeometry::new(width as u32, height as u32);
    let mut field = FlowField::zeros(geometry, 0, true);
    for i in 0..geometry.len() {
        let u = source.read_f32::<LittleEndian>().map_err(map_eof)?;
        let v = source.read_f32::<LittleEndian>().map_err(map_eof)?;
        if u.abs() > INVALID_THRESHOLD || v.abs() > INVALID_THRESHOLD {
            field.valid[i] = false;
        } else {
            field.u[i] = u;
            field.v[i] = v;
        }
    }
    Ok(field)
}

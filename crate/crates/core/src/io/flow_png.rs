//! PNG visualization of flow fields and distance surfaces.

use crate::distance::DistanceSurface;
use crate::error::{Error, Result};
use crate::event::SensorGeometry;
use crate::flow::FlowField;
use image::{GrayImage, Rgb, RgbImage};
use std::path::Path;

const INVALID_GRAY: Rgb<u8> = Rgb([128, 128, 128]);

fn hsv_to_rgb(hue: f64, saturation: f64, value: f64) -> Rgb<u8> {
    let c = value * saturation;
    let sector = hue / 60.0;
    let x = c * (1.0 - (sector.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match sector as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = value - c;
    let to_byte = |f: f64| ((f + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    Rgb([to_byte(r), to_byte(g), to_byte(b)])
}

/// Map a flow field onto the usual color wheel: hue encodes direction,
/// saturation encodes magnitude relative to the field's 99th-percentile
/// magnitude, and invalid pixels are medium gray.
pub fn render_flow_image(field: &FlowField) -> RgbImage {
    let mut magnitudes: Vec<f64> = (0..field.valid.len())
        .filter(|&i| field.valid[i])
        .map(|i| ((field.u[i] as f64).powi(2) + (field.v[i] as f64).powi(2)).sqrt())
        .collect();
    magnitudes.sort_by(|a, b| a.total_cmp(b));
    let p99 = if magnitudes.is_empty() {
        0.0
    } else {
        let idx = ((magnitudes.len() - 1) as f64 * 0.99).round() as usize;
        magnitudes[idx]
    };

    let width = field.geometry.width;
    let height = field.geometry.height;
    let mut image = RgbImage::new(width, height);
    for y in 0..height {
        for x in 0..width {
            let i = field.geometry.index(x, y);
            let pixel = if !field.valid[i] {
                INVALID_GRAY
            } else {
                let u = field.u[i] as f64;
                let v = field.v[i] as f64;
                let magnitude = (u * u + v * v).sqrt();
                let saturation = if p99 > 0.0 {
                    (magnitude / p99).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let hue = v.atan2(u).to_degrees().rem_euclid(360.0);
                hsv_to_rgb(hue, saturation, 1.0)
            };
            image.put_pixel(x, y, pixel);
        }
    }
    image
}

pub fn write_flow_png(field: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    render_flow_image(field)
        .save(path.as_ref())
        .map_err(|e| Error::Image(e.to_string()))
}

/// Dump the 8-bit view of a distance surface as a grayscale PNG.
pub fn write_surface_png(surface: &DistanceSurface, path: impl AsRef<Path>) -> Result<()> {
    let image = GrayImage::from_raw(
        surface.geometry.width,
        surface.geometry.height,
        surface.quantized.clone(),
    )
    .expect("quantized grid length matches geometry");
    image
        .save(path.as_ref())
        .map_err(|e| Error::Image(e.to_string()))
}

/// Load a static exclusion mask: any non-zero pixel is excluded.
pub fn load_exclusion_mask(path: impl AsRef<Path>, geometry: SensorGeometry) -> Result<Vec<bool>> {
    let image = image::open(path.as_ref())
        .map_err(|e| Error::Image(e.to_string()))?
        .into_luma8();
    if image.width() != geometry.width || image.height() != geometry.height {
        return Err(Error::GeometryMismatch(format!(
            "exclusion mask is {}x{}, stream is {}",
            image.width(),
            image.height(),
            geometry
        )));
    }
    Ok(image.into_raw().into_iter().map(|v| v != 0).collect())
}

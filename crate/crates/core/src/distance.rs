//! Euclidean distance fields over edge images and the transfer functions
//! that turn them into dense surfaces for the flow stage.
//!
//! The distance transform is the exact two-phase separable algorithm: a
//! per-row nearest-set scan followed by a per-column lower-envelope pass over
//! parabolas, all in integer arithmetic, so squared distances carry no
//! rounding at all.

use crate::accumulator::EdgeImage;
use crate::error::{Error, Result};
use crate::event::SensorGeometry;
use rayon::prelude::*;

/// Exact Euclidean distances to the nearest edge pixel.
///
/// Squared distances are the source of truth; real distances are square
/// roots taken on demand. An image with no edge pixels is flagged instead of
/// holding infinities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceField {
    pub geometry: SensorGeometry,
    /// Row-major exact squared distances in pixels².
    pub squared: Vec<u64>,
    /// True when the source image had no edge pixels; `squared` is then all
    /// zeros and must not be interpreted as distances.
    pub no_edges: bool,
}

impl DistanceField {
    /// Euclidean distance at one pixel.
    #[inline]
    pub fn value(&self, x: u32, y: u32) -> f64 {
        (self.squared[self.geometry.index(x, y)] as f64).sqrt()
    }

    /// The full real-valued grid.
    pub fn values(&self) -> Vec<f64> {
        self.squared.iter().map(|&s| (s as f64).sqrt()).collect()
    }
}

/// Distance values beyond any reachable in-frame distance.
#[inline]
fn row_infinity(geometry: SensorGeometry) -> u32 {
    geometry.width + geometry.height
}

/// Exact Euclidean distance transform of an edge image.
pub fn euclidean_dt(image: &EdgeImage) -> DistanceField {
    let geometry = image.geometry;
    let width = geometry.width as usize;
    let height = geometry.height as usize;
    if image.edge_count() == 0 {
        return DistanceField {
            geometry,
            squared: vec![0; geometry.len()],
            no_edges: true,
        };
    }

    // Phase 1: per-row distance to the nearest set pixel within the row.
    let inf = row_infinity(geometry);
    let mut row_dist = vec![0u32; width * height];
    row_dist
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(y, row)| {
            let bits = &image.bits[y * width..(y + 1) * width];
            let mut d = inf;
            for x in 0..width {
                d = if bits[x] { 0 } else { d.saturating_add(1).min(inf) };
                row[x] = d;
            }
            d = row[width - 1];
            for x in (0..width).rev() {
                d = if bits[x] { 0 } else { (d + 1).min(inf) };
                if d < row[x] {
                    row[x] = d;
                }
                d = row[x];
            }
        });

    // Phase 2: per-column lower envelope of the parabolas
    // f_i(y) = (y - i)² + row_dist(x, i)².
    let columns: Vec<Vec<u64>> = (0..width)
        .into_par_iter()
        .map(|x| {
            let g = |i: usize| -> i64 {
                let v = row_dist[i * width + x] as i64;
                v * v
            };
            let f = |y: i64, i: i64| (y - i) * (y - i) + g(i as usize);
            // index of the parabola that owns each envelope segment
            let mut site = vec![0i64; height];
            // first position where segment q stops being minimal
            let mut boundary = vec![0i64; height + 1];
            let mut q: isize = 0;
            site[0] = 0;
            boundary[0] = 0;
            boundary[1] = i64::MAX;
            for u in 1..height as i64 {
                loop {
                    let i = site[q as usize];
                    // first integer position where parabola u beats parabola i
                    let sep = (u * u - i * i + g(u as usize) - g(i as usize))
                        .div_euclid(2 * (u - i))
                        + 1;
                    if q > 0 && sep <= boundary[q as usize] {
                        q -= 1;
                        continue;
                    }
                    if sep < height as i64 {
                        q += 1;
                        site[q as usize] = u;
                        boundary[q as usize] = sep;
                        boundary[q as usize + 1] = i64::MAX;
                    }
                    break;
                }
            }
            let mut column = vec![0u64; height];
            let mut seg: usize = 0;
            for y in 0..height as i64 {
                while boundary[seg + 1] <= y {
                    seg += 1;
                }
                column[y as usize] = f(y, site[seg]) as u64;
            }
            column
        })
        .collect();

    let mut squared = vec![0u64; width * height];
    for (x, column) in columns.iter().enumerate() {
        for (y, &v) in column.iter().enumerate() {
            squared[y * width + x] = v;
        }
    }

    DistanceField {
        geometry,
        squared,
        no_edges: false,
    }
}

/// Saturation quantization gap of the 8-bit view: one grey level.
pub const QUANT_EPSILON: f64 = 1.0 / 255.0;

/// Spreading parameter giving saturation of the 8-bit inverse exponential
/// view at distance `d_sat`.
pub fn alpha_from_dsat(d_sat: f64) -> Result<f64> {
    if !(d_sat > 0.0) || !d_sat.is_finite() {
        return Err(Error::Parameter(format!(
            "saturation distance must be > 0, got {d_sat}"
        )));
    }
    Ok(d_sat / 255f64.ln())
}

/// Pointwise map from Euclidean distances to surface values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transfer {
    /// 1 − e^(−d/α): saturating, smooth at d = 0.
    InverseExp { alpha: f64 },
    /// Raw distance, unbounded.
    Linear,
    /// min(d, bound): hard cutoff at `bound` pixels.
    LinearBounded { bound: f64 },
    /// ln(d + 1): unbounded but compressive.
    Log,
}

impl Transfer {
    /// Inverse exponential sized so the 8-bit view saturates at `d_sat`.
    pub fn inverse_exp_from_dsat(d_sat: f64) -> Result<Transfer> {
        Ok(Transfer::InverseExp {
            alpha: alpha_from_dsat(d_sat)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Transfer::InverseExp { alpha } if !(alpha > 0.0 && alpha.is_finite()) => Err(
                Error::Parameter(format!("spreading parameter must be > 0, got {alpha}")),
            ),
            Transfer::LinearBounded { bound } if !(bound > 0.0 && bound.is_finite()) => Err(
                Error::Parameter(format!("distance bound must be > 0, got {bound}")),
            ),
            _ => Ok(()),
        }
    }

    /// Raw function value at distance `d`.
    #[inline]
    pub fn apply(&self, d: f64) -> f64 {
        match *self {
            Transfer::InverseExp { alpha } => 1.0 - (-d / alpha).exp(),
            Transfer::Linear => d,
            Transfer::LinearBounded { bound } => d.min(bound),
            Transfer::Log => (d + 1.0).ln(),
        }
    }
}

/// Dense scalar surface fed to the flow stage.
///
/// `values` holds the raw transfer outputs; `normalized` rescales them to
/// [0,1] (inverse exponential values are already there; the bounded variant
/// divides by its bound; linear and log divide by the frame maximum);
/// `quantized` is the 8-bit storage/visualization view of `normalized`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSurface {
    pub geometry: SensorGeometry,
    pub transfer: Transfer,
    pub values: Vec<f32>,
    pub normalized: Vec<f32>,
    pub quantized: Vec<u8>,
}

/// Apply a transfer function to a distance field.
///
/// A no-edges field maps to the fully saturated surface (normalized 1
/// everywhere, 8-bit 255): no information anywhere, rather than infinities.
pub fn apply_transfer(field: &DistanceField, transfer: Transfer) -> Result<DistanceSurface> {
    transfer.validate()?;
    let n = field.geometry.len();
    if field.no_edges {
        return Ok(DistanceSurface {
            geometry: field.geometry,
            transfer,
            values: vec![1.0; n],
            normalized: vec![1.0; n],
            quantized: vec![255; n],
        });
    }

    let raw: Vec<f64> = field
        .squared
        .par_iter()
        .map(|&s| transfer.apply((s as f64).sqrt()))
        .collect();
    let scale = match transfer {
        Transfer::InverseExp { .. } => 1.0,
        Transfer::LinearBounded { bound } => bound,
        Transfer::Linear | Transfer::Log => {
            let max = raw.iter().cloned().fold(0.0f64, f64::max);
            if max > 0.0 {
                max
            } else {
                1.0
            }
        }
    };

    let mut values = vec![0.0f32; n];
    let mut normalized = vec![0.0f32; n];
    let mut quantized = vec![0u8; n];
    for i in 0..n {
        let norm = (raw[i] / scale).clamp(0.0, 1.0);
        values[i] = raw[i] as f32;
        normalized[i] = norm as f32;
        quantized[i] = (255.0 * norm).round().clamp(0.0, 255.0) as u8;
    }

    Ok(DistanceSurface {
        geometry: field.geometry,
        transfer,
        values,
        normalized,
        quantized,
    })
}

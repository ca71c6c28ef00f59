//! Synthetic event scenes with analytic ground-truth flow.
//!
//! A rigid shape translates at constant velocity. Every window emits events
//! on the shape's boundary pixels at several instants inside the window, so
//! fast motion produces realistic intra-window blur; optional uniform noise
//! events are sprinkled on top. Ground truth per window is the constant
//! velocity on every boundary pixel that fired, invalid elsewhere. The seed
//! fully determines the output.

use crate::error::{Error, Result};
use crate::event::{Event, Polarity, SensorGeometry};
use crate::flow::FlowField;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// Hollow square outline of side `shape_size`.
    Square,
    /// 3×3 tile pattern with alternate tiles filled, tile side `shape_size`.
    Checkerboard,
    /// Vertical bar outline, `shape_size` wide and three times as tall.
    Bar,
}

impl std::str::FromStr for Shape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Shape> {
        match s {
            "square" => Ok(Shape::Square),
            "checkerboard" => Ok(Shape::Checkerboard),
            "bar" => Ok(Shape::Bar),
            other => Err(Error::Parameter(format!(
                "unknown shape {other:?}, expected square|checkerboard|bar"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSceneSpec {
    pub geometry: SensorGeometry,
    pub shape: Shape,
    /// Characteristic size in pixels (square side, tile side, bar width).
    pub shape_size: u32,
    /// Pixels per window.
    pub velocity: (f64, f64),
    pub windows: u32,
    /// Boundary sweeps per window; each sweep emits one event per boundary
    /// pixel at that instant.
    pub events_per_edge_pixel: u32,
    /// Spurious uniform events added per window.
    pub noise_events_per_window: u32,
    pub seed: u64,
    /// Window length in microseconds.
    pub dt_us: u64,
    /// Top-left of the shape's bounding box in window 0; None centers the
    /// whole trajectory in the frame.
    pub origin: Option<(f64, f64)>,
}

impl SyntheticSceneSpec {
    fn validate(&self) -> Result<()> {
        let min_side = self.geometry.width.min(self.geometry.height) as f64;
        let speed = (self.velocity.0.powi(2) + self.velocity.1.powi(2)).sqrt();
        if speed > min_side / 4.0 {
            return Err(Error::Parameter(format!(
                "velocity magnitude {speed:.2} exceeds a quarter of the frame side {min_side}"
            )));
        }
        if self.windows == 0 {
            return Err(Error::Parameter("scene needs at least one window".into()));
        }
        if self.events_per_edge_pixel == 0 {
            return Err(Error::Parameter(
                "scene needs at least one event per edge pixel per window".into(),
            ));
        }
        if self.dt_us == 0 {
            return Err(Error::Parameter("window length must be > 0 us".into()));
        }
        if self.shape_size < 2 {
            return Err(Error::Parameter("shape size must be at least 2 px".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub spec: SyntheticSceneSpec,
    /// Time-ordered events of the whole scene.
    pub events: Vec<Event>,
    /// One field per window; valid exactly on fired boundary pixels.
    pub ground_truth: Vec<FlowField>,
}

/// Boundary pixel of the template shape with its outward normal, used to
/// assign contrast polarity under motion.
struct BoundaryPixel {
    dx: i64,
    dy: i64,
    normal: (f64, f64),
}

fn square_outline(ox: i64, oy: i64, side: i64) -> Vec<BoundaryPixel> {
    let c = (side - 1) as f64 / 2.0;
    let mut pixels = Vec::with_capacity(4 * side as usize);
    for d in 0..side {
        pixels.push(BoundaryPixel { dx: ox + d, dy: oy, normal: (0.0, -1.0) });
        pixels.push(BoundaryPixel { dx: ox + d, dy: oy + side - 1, normal: (0.0, 1.0) });
        pixels.push(BoundaryPixel { dx: ox, dy: oy + d, normal: (-1.0, 0.0) });
        pixels.push(BoundaryPixel { dx: ox + side - 1, dy: oy + d, normal: (1.0, 0.0) });
    }
    // corners get diagonal normals
    for pixel in pixels.iter_mut() {
        let along_x = pixel.dx == ox || pixel.dx == ox + side - 1;
        let along_y = pixel.dy == oy || pixel.dy == oy + side - 1;
        if along_x && along_y {
            let nx = (pixel.dx as f64 - ox as f64 - c).signum();
            let ny = (pixel.dy as f64 - oy as f64 - c).signum();
            let len = (nx * nx + ny * ny).sqrt();
            pixel.normal = (nx / len, ny / len);
        }
    }
    pixels
}

fn template(shape: Shape, size: u32) -> Vec<BoundaryPixel> {
    let size = size as i64;
    let mut pixels = Vec::new();
    match shape {
        Shape::Square => pixels = square_outline(0, 0, size),
        Shape::Bar => {
            let height = 3 * size;
            for d in 0..height {
                pixels.push(BoundaryPixel { dx: 0, dy: d, normal: (-1.0, 0.0) });
                pixels.push(BoundaryPixel { dx: size - 1, dy: d, normal: (1.0, 0.0) });
            }
            for d in 0..size {
                pixels.push(BoundaryPixel { dx: d, dy: 0, normal: (0.0, -1.0) });
                pixels.push(BoundaryPixel { dx: d, dy: height - 1, normal: (0.0, 1.0) });
            }
        }
        Shape::Checkerboard => {
            for ty in 0..3i64 {
                for tx in 0..3i64 {
                    if (tx + ty) % 2 == 0 {
                        pixels.extend(square_outline(tx * size, ty * size, size));
                    }
                }
            }
        }
    }
    // deduplicate shared pixels deterministically, first normal wins
    let mut seen = std::collections::HashSet::new();
    pixels.retain(|p| seen.insert((p.dx, p.dy)));
    pixels.sort_by_key(|p| (p.dy, p.dx));
    pixels
}

fn bounding_box(pixels: &[BoundaryPixel]) -> (i64, i64, i64, i64) {
    let min_x = pixels.iter().map(|p| p.dx).min().unwrap();
    let max_x = pixels.iter().map(|p| p.dx).max().unwrap();
    let min_y = pixels.iter().map(|p| p.dy).min().unwrap();
    let max_y = pixels.iter().map(|p| p.dy).max().unwrap();
    (min_x, max_x, min_y, max_y)
}

pub fn generate_synthetic_scene(spec: &SyntheticSceneSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let boundary = template(spec.shape, spec.shape_size);
    let (min_x, max_x, min_y, max_y) = bounding_box(&boundary);
    let shape_w = (max_x - min_x + 1) as f64;
    let shape_h = (max_y - min_y + 1) as f64;
    let w = spec.geometry.width as f64;
    let h = spec.geometry.height as f64;

    let travel = spec.windows as f64;
    let origin = match spec.origin {
        Some(o) => o,
        None => (
            (w - shape_w - spec.velocity.0 * travel) / 2.0,
            (h - shape_h - spec.velocity.1 * travel) / 2.0,
        ),
    };

    let sweeps = spec.events_per_edge_pixel as u64;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let mut events = Vec::new();
    let mut ground_truth = Vec::with_capacity(spec.windows as usize);

    for k in 0..spec.windows {
        let window_start = k as u64 * spec.dt_us;
        let mut gt = FlowField::zeros(spec.geometry, k as u64, false);
        for j in 0..sweeps {
            // event time at the middle of each sub-interval
            let t = window_start + (2 * j + 1) * spec.dt_us / (2 * sweeps);
            let phase = k as f64 + (2 * j + 1) as f64 / (2 * sweeps) as f64;
            let off_x = (origin.0 + spec.velocity.0 * phase).round() as i64;
            let off_y = (origin.1 + spec.velocity.1 * phase).round() as i64;
            for pixel in &boundary {
                let x = pixel.dx + off_x;
                let y = pixel.dy + off_y;
                if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
                    return Err(Error::Generation(format!(
                        "shape leaves the frame at window {k}: boundary pixel ({x}, {y})"
                    )));
                }
                // Contrast sign from the motion: the leading side brightens,
                // the trailing side darkens. Edges tangent to the motion get
                // a constant sign; alternating signs there would cancel
                // under motion compensation and corrupt the warping loss.
                let dot = pixel.normal.0 * spec.velocity.0 + pixel.normal.1 * spec.velocity.1;
                let polarity = if dot < 0.0 {
                    Polarity::Negative
                } else {
                    Polarity::Positive
                };
                events.push(Event {
                    t,
                    x: x as u16,
                    y: y as u16,
                    polarity,
                });
                let idx = spec.geometry.index(x as u32, y as u32);
                gt.valid[idx] = true;
                gt.u[idx] = spec.velocity.0 as f32;
                gt.v[idx] = spec.velocity.1 as f32;
            }
        }
        for _ in 0..spec.noise_events_per_window {
            events.push(Event {
                t: window_start + rng.random_range(0..spec.dt_us),
                x: rng.random_range(0..spec.geometry.width) as u16,
                y: rng.random_range(0..spec.geometry.height) as u16,
                polarity: if rng.random::<bool>() {
                    Polarity::Positive
                } else {
                    Polarity::Negative
                },
            });
        }
        ground_truth.push(gt);
    }

    events.sort_by_key(|e| (e.t, e.y, e.x, e.polarity.as_bit()));
    Ok(SyntheticScene {
        spec: spec.clone(),
        events,
        ground_truth,
    })
}

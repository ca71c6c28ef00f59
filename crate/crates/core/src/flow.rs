//! Pyramidal incremental optical flow over distance surfaces.
//!
//! Each window solves a brightness-constancy problem between the previous
//! and current surfaces. The previous surface is first warped by a
//! prediction (an exponential blend of the upsampled coarser flow and the
//! flow this level held last window), then a Jacobi-relaxed regularized
//! solve estimates the residual motion. Jacobi sweeps read one buffer and
//! write another, so results do not depend on the parallelism degree.
//!
//! Flow vectors are forward motion: a positive `u` means the scene content
//! moved toward larger x between the previous and current window.

use crate::distance::DistanceSurface;
use crate::error::{Error, Result};
use crate::event::SensorGeometry;
use rayon::prelude::*;

/// Dense 2-vector displacement field in pixels per window.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub geometry: SensorGeometry,
    /// Horizontal displacement, row-major.
    pub u: Vec<f32>,
    /// Vertical displacement, row-major.
    pub v: Vec<f32>,
    /// Pixels carrying a meaningful estimate.
    pub valid: Vec<bool>,
    pub window_index: u64,
}

impl FlowField {
    pub fn zeros(geometry: SensorGeometry, window_index: u64, valid: bool) -> FlowField {
        FlowField {
            geometry,
            u: vec![0.0; geometry.len()],
            v: vec![0.0; geometry.len()],
            valid: vec![valid; geometry.len()],
            window_index,
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&b| b).count()
    }

    /// Mean (u, v) over valid pixels; None when nothing is valid.
    pub fn mean_valid(&self) -> Option<(f64, f64)> {
        let mut su = 0.0f64;
        let mut sv = 0.0f64;
        let mut n = 0usize;
        for i in 0..self.valid.len() {
            if self.valid[i] {
                su += self.u[i] as f64;
                sv += self.v[i] as f64;
                n += 1;
            }
        }
        if n == 0 {
            None
        } else {
            Some((su / n as f64, sv / n as f64))
        }
    }
}

/// Pyramid and relaxation parameters.
///
/// `lambda` and `iterations` are ordered from the coarsest level to the
/// finest: the small blurred grids run many lightly-regularized sweeps to
/// settle the large-scale motion, while the full-resolution level applies a
/// few heavily-regularized sweeps on top of the upsampled prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub levels: usize,
    pub lambda: Vec<f32>,
    pub iterations: Vec<usize>,
    /// Memory weight of the temporal blend, in [0,1]: each level's
    /// prediction mixes the upsampled coarser flow (weight 1-gamma) with the
    /// flow the level held in the previous window (weight gamma). 0 disables
    /// the memory; larger values smooth the estimate over time at the cost
    /// of slower reaction to velocity changes.
    pub gamma: f32,
}

impl FlowConfig {
    /// Low-resolution preset.
    pub fn low_res() -> FlowConfig {
        FlowConfig {
            levels: 3,
            lambda: vec![50.0, 250.0, 500.0],
            iterations: vec![50, 25, 5],
            gamma: 0.5,
        }
    }

    /// High-resolution preset.
    pub fn high_res() -> FlowConfig {
        FlowConfig {
            levels: 3,
            lambda: vec![500.0, 500.0, 500.0],
            iterations: vec![20, 20, 20],
            gamma: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::Parameter("pyramid needs at least one level".into()));
        }
        if self.lambda.len() != self.levels || self.iterations.len() != self.levels {
            return Err(Error::Parameter(format!(
                "per-level parameter counts ({} weights, {} iteration counts) must equal the level count {}",
                self.lambda.len(),
                self.iterations.len(),
                self.levels
            )));
        }
        if self.lambda.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(Error::Parameter(
                "regularization weights must be finite and non-negative".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Parameter(format!(
                "temporal decay must lie in [0,1], got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

impl Default for FlowConfig {
    fn default() -> FlowConfig {
        FlowConfig::low_res()
    }
}

/// One pyramid level's scalar grid.
#[derive(Debug, Clone)]
struct Plane {
    w: usize,
    h: usize,
    data: Vec<f32>,
}

impl Plane {
    fn zeros(w: usize, h: usize) -> Plane {
        Plane {
            w,
            h,
            data: vec![0.0; w * h],
        }
    }
}

/// Carry-over between consecutive windows: the previous surface pyramid and
/// the flow each pyramid level settled on in the last estimate.
#[derive(Debug, Clone, Default)]
pub struct FlowState {
    geometry: Option<SensorGeometry>,
    prev: Option<Vec<Plane>>,
    carried: Vec<(Plane, Plane)>,
    next_window: u64,
}

impl FlowState {
    pub fn new() -> FlowState {
        FlowState::default()
    }

    /// True until the first surface has been absorbed.
    pub fn is_fresh(&self) -> bool {
        self.prev.is_none()
    }
}

#[inline]
fn bilinear(data: &[f32], w: usize, h: usize, x: f32, y: f32) -> f32 {
    let x = x.clamp(0.0, (w - 1) as f32);
    let y = y.clamp(0.0, (h - 1) as f32);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = x - x0 as f32;
    let fy = y - y0 as f32;
    let top = data[y0 * w + x0] * (1.0 - fx) + data[y0 * w + x1] * fx;
    let bottom = data[y1 * w + x0] * (1.0 - fx) + data[y1 * w + x1] * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Resample a scalar grid along a flow field: output(p) = I(p + F(p)),
/// sample positions clamped to the frame.
pub fn warp_image(image: &[f32], geometry: SensorGeometry, flow: &FlowField) -> Result<Vec<f32>> {
    if flow.geometry != geometry || image.len() != geometry.len() {
        return Err(Error::GeometryMismatch(format!(
            "warp of a {} grid with a {} flow field",
            geometry, flow.geometry
        )));
    }
    let w = geometry.width as usize;
    let h = geometry.height as usize;
    Ok(warp_planes(image, w, h, &flow.u, &flow.v))
}

fn warp_planes(image: &[f32], w: usize, h: usize, du: &[f32], dv: &[f32]) -> Vec<f32> {
    let mut out = vec![0.0f32; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            let i = y * w + x;
            let dx = du[i];
            let dy = dv[i];
            if dx == 0.0 && dy == 0.0 {
                row[x] = image[i];
            } else {
                row[x] = bilinear(image, w, h, x as f32 + dx, y as f32 + dy);
            }
        }
    });
    out
}

/// Restrict a flow field to the set pixels of an edge image.
pub fn mask_to_edges(flow: &FlowField, edges: &crate::accumulator::EdgeImage) -> Result<FlowField> {
    if flow.geometry != edges.geometry {
        return Err(Error::GeometryMismatch(format!(
            "masking a {} flow field with a {} edge image",
            flow.geometry, edges.geometry
        )));
    }
    let mut out = flow.clone();
    for (valid, &edge) in out.valid.iter_mut().zip(edges.bits.iter()) {
        *valid = *valid && edge;
    }
    Ok(out)
}

// Antialiasing weights for factor-2 averaging. A plain 2x2 box keeps too
// much high-frequency content: the surface has px-scale valleys, and their
// coarse-grid shape would then depend on sub-grid phase, which the solver
// misreads as motion.
const DOWN_KERNEL: [f32; 5] = [0.0625, 0.25, 0.375, 0.25, 0.0625];

fn downsample(p: &Plane) -> Plane {
    let w2 = p.w.div_ceil(2);
    let h2 = p.h.div_ceil(2);
    let mut horizontal = vec![0.0f32; w2 * p.h];
    horizontal
        .par_chunks_mut(w2)
        .enumerate()
        .for_each(|(y, row)| {
            for (x, cell) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (k, &wk) in DOWN_KERNEL.iter().enumerate() {
                    let sx = (2 * x + k).saturating_sub(2).min(p.w - 1);
                    acc += wk * p.data[y * p.w + sx];
                }
                *cell = acc;
            }
        });
    let mut out = Plane::zeros(w2, h2);
    out.data.par_chunks_mut(w2).enumerate().for_each(|(y, row)| {
        for x in 0..w2 {
            let mut acc = 0.0;
            for (k, &wk) in DOWN_KERNEL.iter().enumerate() {
                let sy = (2 * y + k).saturating_sub(2).min(p.h - 1);
                acc += wk * horizontal[sy * w2 + x];
            }
            row[x] = acc;
        }
    });
    out
}

/// Upsample a coarse grid to `(tw, th)`, scaling values by the axis ratio
/// (used for flow components, which are measured in level-local pixels).
fn upsample_scaled(coarse: &Plane, tw: usize, th: usize, value_scale: f32) -> Plane {
    let mut out = Plane::zeros(tw, th);
    let sx = coarse.w as f32 / tw as f32;
    let sy = coarse.h as f32 / th as f32;
    out.data.par_chunks_mut(tw).enumerate().for_each(|(y, row)| {
        let cy = (y as f32 + 0.5) * sy - 0.5;
        for (x, cell) in row.iter_mut().enumerate() {
            let cx = (x as f32 + 0.5) * sx - 0.5;
            *cell = value_scale * bilinear(&coarse.data, coarse.w, coarse.h, cx, cy);
        }
    });
    out
}

/// Separable 5-tap blur with clamped borders, used to condition the solver
/// input: the raw surface has valleys about one pixel wide, too sharp for a
/// finite-difference brightness-constancy linearization at px-scale motion.
fn presmooth(p: &Plane) -> Plane {
    let mut horizontal = vec![0.0f32; p.w * p.h];
    horizontal
        .par_chunks_mut(p.w)
        .enumerate()
        .for_each(|(y, row)| {
            for (x, cell) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (k, &wk) in DOWN_KERNEL.iter().enumerate() {
                    let sx = (x + k).saturating_sub(2).min(p.w - 1);
                    acc += wk * p.data[y * p.w + sx];
                }
                *cell = acc;
            }
        });
    let mut out = Plane::zeros(p.w, p.h);
    out.data.par_chunks_mut(p.w).enumerate().for_each(|(y, row)| {
        for x in 0..p.w {
            let mut acc = 0.0;
            for (k, &wk) in DOWN_KERNEL.iter().enumerate() {
                let sy = (y + k).saturating_sub(2).min(p.h - 1);
                acc += wk * horizontal[sy * p.w + x];
            }
            row[x] = acc;
        }
    });
    out
}

fn build_pyramid(surface: &DistanceSurface, levels: usize) -> Vec<Plane> {
    let w = surface.geometry.width as usize;
    let h = surface.geometry.height as usize;
    // The solver works in the 8-bit value range the regularization weights
    // are calibrated for, but on the smooth real-valued grid.
    let base = Plane {
        w,
        h,
        data: surface.normalized.iter().map(|&v| v * 255.0).collect(),
    };
    let mut pyramid = Vec::with_capacity(levels);
    pyramid.push(presmooth(&base));
    for _ in 1..levels {
        let next = downsample(pyramid.last().unwrap());
        pyramid.push(next);
    }
    pyramid
}

/// One level's regularized incremental solve.
///
/// `prev` is warped by the negated prediction (compensating the predicted
/// motion), gradients and the temporal difference are taken once, then
/// `sweeps` Jacobi iterations relax the residual flow (du, dv).
fn solve_level(
    prev: &Plane,
    curr: &Plane,
    pred_u: &Plane,
    pred_v: &Plane,
    lambda: f32,
    sweeps: usize,
) -> (Plane, Plane) {
    let w = prev.w;
    let h = prev.h;
    let neg_u: Vec<f32> = pred_u.data.iter().map(|&x| -x).collect();
    let neg_v: Vec<f32> = pred_v.data.iter().map(|&x| -x).collect();
    let warped = warp_planes(&prev.data, w, h, &neg_u, &neg_v);

    // Gradients are averaged over both frames: centering the linearization
    // between the warped previous surface and the current one keeps the
    // normal-flow estimate unbiased for displacements up to the valley width.
    let mut ix = vec![0.0f32; w * h];
    let mut iy = vec![0.0f32; w * h];
    let mut it = vec![0.0f32; w * h];
    ix.par_chunks_mut(w)
        .zip(iy.par_chunks_mut(w))
        .zip(it.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, ((ix_row, iy_row), it_row))| {
            let dx = |img: &[f32], i: usize, x: usize| -> f32 {
                if w == 1 {
                    0.0
                } else if x == 0 {
                    img[i + 1] - img[i]
                } else if x == w - 1 {
                    img[i] - img[i - 1]
                } else {
                    0.5 * (img[i + 1] - img[i - 1])
                }
            };
            let dy = |img: &[f32], i: usize| -> f32 {
                if h == 1 {
                    0.0
                } else if y == 0 {
                    img[i + w] - img[i]
                } else if y == h - 1 {
                    img[i] - img[i - w]
                } else {
                    0.5 * (img[i + w] - img[i - w])
                }
            };
            for x in 0..w {
                let i = y * w + x;
                ix_row[x] = 0.5 * (dx(&warped, i, x) + dx(&curr.data, i, x));
                iy_row[x] = 0.5 * (dy(&warped, i) + dy(&curr.data, i));
                it_row[x] = curr.data[i] - warped[i];
            }
        });

    let mut du = vec![0.0f32; w * h];
    let mut dv = vec![0.0f32; w * h];
    let mut du_next = vec![0.0f32; w * h];
    let mut dv_next = vec![0.0f32; w * h];
    for _ in 0..sweeps {
        du_next
            .par_chunks_mut(w)
            .zip(dv_next.par_chunks_mut(w))
            .enumerate()
            .for_each(|(y, (du_row, dv_row))| {
                for x in 0..w {
                    let i = y * w + x;
                    let mut su = 0.0f32;
                    let mut sv = 0.0f32;
                    let mut n = 0.0f32;
                    if x > 0 {
                        su += du[i - 1];
                        sv += dv[i - 1];
                        n += 1.0;
                    }
                    if x + 1 < w {
                        su += du[i + 1];
                        sv += dv[i + 1];
                        n += 1.0;
                    }
                    if y > 0 {
                        su += du[i - w];
                        sv += dv[i - w];
                        n += 1.0;
                    }
                    if y + 1 < h {
                        su += du[i + w];
                        sv += dv[i + w];
                        n += 1.0;
                    }
                    let (ubar, vbar) = if n > 0.0 {
                        (su / n, sv / n)
                    } else {
                        (du[i], dv[i])
                    };
                    let gx = ix[i];
                    let gy = iy[i];
                    let denom = lambda + gx * gx + gy * gy;
                    if denom <= 1e-12 {
                        du_row[x] = ubar;
                        dv_row[x] = vbar;
                    } else {
                        let t = (gx * ubar + gy * vbar + it[i]) / denom;
                        du_row[x] = ubar - gx * t;
                        dv_row[x] = vbar - gy * t;
                    }
                }
            });
        std::mem::swap(&mut du, &mut du_next);
        std::mem::swap(&mut dv, &mut dv_next);
    }

    (Plane { w, h, data: du }, Plane { w, h, data: dv })
}

/// Estimate the flow between the surface stored in `state` and `surface`.
///
/// The first call on a fresh state only absorbs the surface and returns the
/// zero field with an all-false validity mask; subsequent calls return dense
/// fields valid everywhere (masking to edge pixels is a separate step).
pub fn estimate_flow(
    state: &mut FlowState,
    surface: &DistanceSurface,
    cfg: &FlowConfig,
) -> Result<FlowField> {
    cfg.validate()?;
    if let Some(geometry) = state.geometry {
        if geometry != surface.geometry {
            return Err(Error::GeometryMismatch(format!(
                "flow state built for {}, surface is {}",
                geometry, surface.geometry
            )));
        }
    } else {
        state.geometry = Some(surface.geometry);
    }

    let levels = cfg.levels;
    let pyramid = build_pyramid(surface, levels);
    let window_index = state.next_window;
    state.next_window += 1;

    let prev = match state.prev.take() {
        Some(prev) => prev,
        None => {
            state.carried = pyramid
                .iter()
                .map(|p| (Plane::zeros(p.w, p.h), Plane::zeros(p.w, p.h)))
                .collect();
            state.prev = Some(pyramid);
            return Ok(FlowField::zeros(surface.geometry, window_index, false));
        }
    };

    let mut flow_u: Option<Plane> = None;
    let mut flow_v: Option<Plane> = None;
    let mut new_carried: Vec<(Plane, Plane)> = Vec::with_capacity(levels);
    new_carried.resize_with(levels, || (Plane::zeros(0, 0), Plane::zeros(0, 0)));

    for level in (0..levels).rev() {
        let p = &prev[level];
        let c = &pyramid[level];
        // parameter lists are coarsest-first; `level` counts from the finest
        let cfg_idx = levels - 1 - level;
        let lambda = cfg.lambda[cfg_idx];
        let sweeps = cfg.iterations[cfg_idx];

        let (spatial_u, spatial_v) = match (&flow_u, &flow_v) {
            (Some(fu), Some(fv)) => (
                upsample_scaled(fu, c.w, c.h, c.w as f32 / fu.w as f32),
                upsample_scaled(fv, c.w, c.h, c.h as f32 / fv.h as f32),
            ),
            _ => (Plane::zeros(c.w, c.h), Plane::zeros(c.w, c.h)),
        };

        // Exponential temporal blend: the fresh spatial estimate is mixed
        // with what this level settled on last window, so per-window noise
        // is averaged away while sustained motion still passes through.
        let (cu, cv) = &state.carried[level];
        let mut pred_u = spatial_u;
        let mut pred_v = spatial_v;
        for i in 0..pred_u.data.len() {
            pred_u.data[i] = (1.0 - cfg.gamma) * pred_u.data[i] + cfg.gamma * cu.data[i];
            pred_v.data[i] = (1.0 - cfg.gamma) * pred_v.data[i] + cfg.gamma * cv.data[i];
        }

        let (du, dv) = solve_level(p, c, &pred_u, &pred_v, lambda, sweeps);

        let mut fu = pred_u;
        let mut fv = pred_v;
        for i in 0..fu.data.len() {
            fu.data[i] += du.data[i];
            fv.data[i] += dv.data[i];
        }
        new_carried[level] = (fu.clone(), fv.clone());
        flow_u = Some(fu);
        flow_v = Some(fv);
    }

    state.prev = Some(pyramid);
    state.carried = new_carried;

    let fu = flow_u.unwrap();
    let fv = flow_v.unwrap();
    Ok(FlowField {
        geometry: surface.geometry,
        u: fu.data,
        v: fv.data,
        valid: vec![true; surface.geometry.len()],
        window_index,
    })
}

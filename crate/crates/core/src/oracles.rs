//! Brute-force reference implementations for tests.
//!
//! Everything here trades speed for obviousness: exhaustive scans and
//! single-threaded double loops, sharing no code with the production paths
//! they check. Inputs are capped so an accidental large case cannot stall
//! the test suite.

use crate::accumulator::EdgeImage;
use crate::distance::DistanceField;
use crate::error::{Error, Result};
use crate::event::Event;
use crate::flow::FlowField;

/// Input caps for every oracle.
#[derive(Debug, Clone, Copy)]
pub struct OracleBudget {
    pub max_area: usize,
    pub max_events: usize,
}

impl Default for OracleBudget {
    fn default() -> OracleBudget {
        OracleBudget {
            max_area: 64 * 64,
            max_events: 10_000,
        }
    }
}

fn check_area(area: usize) -> Result<()> {
    let budget = OracleBudget::default();
    if area > budget.max_area {
        return Err(Error::BudgetExceeded(format!(
            "oracle grid area {area} exceeds the {} pixel cap",
            budget.max_area
        )));
    }
    Ok(())
}

fn check_events(count: usize) -> Result<()> {
    let budget = OracleBudget::default();
    if count > budget.max_events {
        return Err(Error::BudgetExceeded(format!(
            "oracle event count {count} exceeds the {} cap",
            budget.max_events
        )));
    }
    Ok(())
}

/// Exhaustive nearest-edge scan: for every pixel, the minimum squared
/// distance over all edge pixels.
pub fn brute_force_dt(image: &EdgeImage) -> Result<DistanceField> {
    check_area(image.geometry.len())?;
    let w = image.geometry.width as i64;
    let h = image.geometry.height as i64;
    let mut edges = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if image.get(x as u32, y as u32) {
                edges.push((x, y));
            }
        }
    }
    if edges.is_empty() {
        return Ok(DistanceField {
            geometry: image.geometry,
            squared: vec![0; image.geometry.len()],
            no_edges: true,
        });
    }
    let mut squared = Vec::with_capacity(image.geometry.len());
    for y in 0..h {
        for x in 0..w {
            let mut best = u64::MAX;
            for &(ex, ey) in &edges {
                let d = ((x - ex) * (x - ex) + (y - ey) * (y - ey)) as u64;
                if d < best {
                    best = d;
                }
            }
            squared.push(best);
        }
    }
    Ok(DistanceField {
        geometry: image.geometry,
        squared,
        no_edges: false,
    })
}

/// Straight per-pixel endpoint-error mean over jointly valid pixels.
pub fn naive_aee(est: &FlowField, gt: &FlowField) -> Result<f64> {
    check_area(est.geometry.len())?;
    if est.geometry != gt.geometry {
        return Err(Error::GeometryMismatch("oracle field sizes differ".into()));
    }
    let mut errors = Vec::new();
    for i in 0..est.valid.len() {
        if !est.valid[i] || !gt.valid[i] {
            continue;
        }
        let du = est.u[i] as f64 - gt.u[i] as f64;
        let dv = est.v[i] as f64 - gt.v[i] as f64;
        errors.push((du * du + dv * dv).sqrt());
    }
    if errors.is_empty() {
        return Err(Error::UndefinedMetric("oracle evaluation set is empty".into()));
    }
    Ok(errors.iter().sum::<f64>() / errors.len() as f64)
}

/// Straight outlier percentage over jointly valid pixels.
pub fn naive_outlier_pct(est: &FlowField, gt: &FlowField) -> Result<f64> {
    check_area(est.geometry.len())?;
    if est.geometry != gt.geometry {
        return Err(Error::GeometryMismatch("oracle field sizes differ".into()));
    }
    let mut n = 0usize;
    let mut outliers = 0usize;
    for i in 0..est.valid.len() {
        if !est.valid[i] || !gt.valid[i] {
            continue;
        }
        let du = est.u[i] as f64 - gt.u[i] as f64;
        let dv = est.v[i] as f64 - gt.v[i] as f64;
        let ee = (du * du + dv * dv).sqrt();
        let gm = ((gt.u[i] as f64).powi(2) + (gt.v[i] as f64).powi(2)).sqrt();
        if ee > 3.0 && ee > 0.05 * gm {
            outliers += 1;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::UndefinedMetric("oracle evaluation set is empty".into()));
    }
    Ok(100.0 * outliers as f64 / n as f64)
}

fn naive_splat(
    events: &[Event],
    flow: &FlowField,
    t_ref: u64,
    dt: u64,
    search_radius: f64,
    use_flow: bool,
) -> Vec<f64> {
    let w = flow.geometry.width as i64;
    let h = flow.geometry.height as i64;
    let mut grid = vec![0.0f64; (w * h) as usize];
    for event in events {
        let mut fu = 0.0f64;
        let mut fv = 0.0f64;
        if use_flow {
            // nearest valid pixel by full scan; ties go to the earliest in
            // row-major order, matching the production lookup
            let mut best: Option<(i64, usize)> = None;
            for y in 0..h {
                for x in 0..w {
                    let i = (y * w + x) as usize;
                    if !flow.valid[i] {
                        continue;
                    }
                    let dx = x - event.x as i64;
                    let dy = y - event.y as i64;
                    let d2 = dx * dx + dy * dy;
                    if best.map_or(true, |(bd, _)| d2 < bd) {
                        best = Some((d2, i));
                    }
                }
            }
            if let Some((d2, i)) = best {
                let own = flow.valid[(event.y as i64 * w + event.x as i64) as usize];
                if own || (d2 as f64) <= search_radius * search_radius {
                    fu = flow.u[i] as f64;
                    fv = flow.v[i] as f64;
                }
            }
        }
        let s = (t_ref as f64 - event.t as f64) / dt as f64;
        let px = event.x as f64 + fu * s;
        let py = event.y as f64 + fv * s;
        let x0 = px.floor() as i64;
        let y0 = py.floor() as i64;
        let fx = px - x0 as f64;
        let fy = py - y0 as f64;
        for (cx, cy, weight) in [
            (x0, y0, (1.0 - fx) * (1.0 - fy)),
            (x0 + 1, y0, fx * (1.0 - fy)),
            (x0, y0 + 1, (1.0 - fx) * fy),
            (x0 + 1, y0 + 1, fx * fy),
        ] {
            if weight == 0.0 || cx < 0 || cy < 0 || cx >= w || cy >= h {
                continue;
            }
            grid[(cy * w + cx) as usize] += event.polarity.sign() as f64 * weight;
        }
    }
    grid
}

fn two_pass_variance(grid: &[f64]) -> f64 {
    let n = grid.len() as f64;
    let mean = grid.iter().sum::<f64>() / n;
    grid.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Double-loop splat and two-pass variance ratio.
pub fn brute_force_fwl(
    events: &[Event],
    flow: &FlowField,
    t_ref: u64,
    dt: u64,
    search_radius: f64,
) -> Result<f64> {
    check_area(flow.geometry.len())?;
    check_events(events.len())?;
    if events.is_empty() {
        return Err(Error::UndefinedMetric(
            "warping loss of an empty event window".into(),
        ));
    }
    let compensated = naive_splat(events, flow, t_ref, dt, search_radius, true);
    let uncompensated = naive_splat(events, flow, t_ref, dt, search_radius, false);
    let baseline = two_pass_variance(&uncompensated);
    if baseline == 0.0 {
        return Err(Error::UndefinedMetric(
            "zero variance in the uncompensated event image".into(),
        ));
    }
    Ok(two_pass_variance(&compensated) / baseline)
}

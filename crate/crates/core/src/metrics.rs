//! Flow evaluation: endpoint error, outlier percentage, and the warping
//! loss built from motion-compensated event images.

use crate::error::{Error, Result};
use crate::event::Event;
use crate::flow::FlowField;
use serde::{Deserialize, Serialize};

/// Signed, bilinearly splatted event mass per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct EventImage {
    pub geometry: crate::event::SensorGeometry,
    pub accumulation: Vec<f64>,
}

impl EventImage {
    /// Population variance over every pixel.
    pub fn variance(&self) -> f64 {
        let n = self.accumulation.len() as f64;
        let mean = self.accumulation.iter().sum::<f64>() / n;
        self.accumulation
            .iter()
            .map(|&v| (v - mean) * (v - mean))
            .sum::<f64>()
            / n
    }

    pub fn total_signed_mass(&self) -> f64 {
        self.accumulation.iter().sum()
    }
}

/// Aggregate scores of one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Mean endpoint error over evaluated pixels, in pixels.
    pub aee: f64,
    /// Share of evaluated pixels counted as outliers, in percent.
    pub outlier_pct: f64,
    /// Mean variance ratio of compensated to uncompensated event images;
    /// absent when no window had events.
    pub fwl: Option<f64>,
    /// Pixels that entered the endpoint-error pool.
    pub valid_pixel_count: usize,
}

impl MetricReport {
    /// Line-oriented `metric=value` form.
    pub fn to_text(&self) -> String {
        let fwl = match self.fwl {
            Some(v) => format!("{v:.6}"),
            None => "undefined".into(),
        };
        format!(
            "aee={:.6}\noutlier_pct={:.6}\nfwl={}\nvalid_pixel_count={}\n",
            self.aee, self.outlier_pct, fwl, self.valid_pixel_count
        )
    }
}

fn evaluation_pairs<'a>(
    est: &'a FlowField,
    gt: &'a FlowField,
) -> Result<impl Iterator<Item = (f64, f64)> + 'a> {
    if est.geometry != gt.geometry {
        return Err(Error::GeometryMismatch(format!(
            "comparing a {} field against {} ground truth",
            est.geometry, gt.geometry
        )));
    }
    Ok((0..est.valid.len())
        .filter(|&i| est.valid[i] && gt.valid[i])
        .map(|i| {
            let du = est.u[i] as f64 - gt.u[i] as f64;
            let dv = est.v[i] as f64 - gt.v[i] as f64;
            let gm = ((gt.u[i] as f64).powi(2) + (gt.v[i] as f64).powi(2)).sqrt();
            ((du * du + dv * dv).sqrt(), gm)
        }))
}

/// Mean endpoint error over pixels valid in both fields.
pub fn aee(est: &FlowField, gt: &FlowField) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (ee, _) in evaluation_pairs(est, gt)? {
        sum += ee;
        n += 1;
    }
    if n == 0 {
        return Err(Error::UndefinedMetric(
            "endpoint error over an empty evaluation set".into(),
        ));
    }
    Ok(sum / n as f64)
}

/// Whether one endpoint error counts as an outlier against its ground truth.
#[inline]
pub fn is_outlier(endpoint_error: f64, gt_magnitude: f64) -> bool {
    endpoint_error > 3.0 && endpoint_error > 0.05 * gt_magnitude
}

/// Percentage of evaluation pixels with large endpoint error.
pub fn outlier_pct(est: &FlowField, gt: &FlowField) -> Result<f64> {
    let mut outliers = 0usize;
    let mut n = 0usize;
    for (ee, gm) in evaluation_pairs(est, gt)? {
        if is_outlier(ee, gm) {
            outliers += 1;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::UndefinedMetric(
            "outlier share over an empty evaluation set".into(),
        ));
    }
    Ok(100.0 * outliers as f64 / n as f64)
}

/// Flow to apply at an event's pixel: the local estimate when valid, else
/// the nearest valid pixel within `search_radius`, else no displacement.
fn flow_at(flow: &FlowField, x: u32, y: u32, search_radius: f64) -> (f64, f64) {
    let idx = flow.geometry.index(x, y);
    if flow.valid[idx] {
        return (flow.u[idx] as f64, flow.v[idx] as f64);
    }
    let r = search_radius.floor() as i64;
    if r <= 0 {
        return (0.0, 0.0);
    }
    let w = flow.geometry.width as i64;
    let h = flow.geometry.height as i64;
    let (cx, cy) = (x as i64, y as i64);
    let max_sq = search_radius * search_radius;
    let mut best: Option<(i64, usize)> = None;
    for ny in (cy - r).max(0)..=(cy + r).min(h - 1) {
        for nx in (cx - r).max(0)..=(cx + r).min(w - 1) {
            let i = (ny * w + nx) as usize;
            if !flow.valid[i] {
                continue;
            }
            let d2 = (nx - cx) * (nx - cx) + (ny - cy) * (ny - cy);
            if d2 as f64 > max_sq {
                continue;
            }
            // row-major scan order breaks distance ties deterministically
            if best.map_or(true, |(bd, _)| d2 < bd) {
                best = Some((d2, i));
            }
        }
    }
    match best {
        Some((_, i)) => (flow.u[i] as f64, flow.v[i] as f64),
        None => (0.0, 0.0),
    }
}

/// Splat every event at its flow-displaced position at time `t_ref`.
///
/// Each event deposits ±1 of mass, split bilinearly over the four cells
/// around `(x, y) + F(x, y)·(t_ref − t)/ΔT`; weight falling outside the
/// frame is dropped.
pub fn compensate_events(
    events: &[Event],
    flow: &FlowField,
    t_ref: u64,
    dt: u64,
    search_radius: f64,
) -> Result<EventImage> {
    if dt == 0 {
        return Err(Error::Parameter("compensation window must be > 0 us".into()));
    }
    let geometry = flow.geometry;
    let w = geometry.width as usize;
    let h = geometry.height as usize;
    let mut accumulation = vec![0.0f64; w * h];
    for event in events {
        let (fu, fv) = flow_at(flow, event.x as u32, event.y as u32, search_radius);
        let scale = (t_ref as f64 - event.t as f64) / dt as f64;
        let px = event.x as f64 + fu * scale;
        let py = event.y as f64 + fv * scale;
        let sign = event.polarity.sign() as f64;
        let x0 = px.floor();
        let y0 = py.floor();
        let fx = px - x0;
        let fy = py - y0;
        for (dx, dy, weight) in [
            (0.0, 0.0, (1.0 - fx) * (1.0 - fy)),
            (1.0, 0.0, fx * (1.0 - fy)),
            (0.0, 1.0, (1.0 - fx) * fy),
            (1.0, 1.0, fx * fy),
        ] {
            let cx = x0 + dx;
            let cy = y0 + dy;
            if weight == 0.0 || cx < 0.0 || cy < 0.0 || cx >= w as f64 || cy >= h as f64 {
                continue;
            }
            accumulation[cy as usize * w + cx as usize] += sign * weight;
        }
    }
    Ok(EventImage {
        geometry,
        accumulation,
    })
}

/// Variance ratio of the flow-compensated event image to the uncompensated
/// one; above 1 means the flow sharpened the events.
pub fn fwl(
    events: &[Event],
    flow: &FlowField,
    t_ref: u64,
    dt: u64,
    search_radius: f64,
) -> Result<f64> {
    if events.is_empty() {
        return Err(Error::UndefinedMetric(
            "warping loss of an empty event window".into(),
        ));
    }
    let compensated = compensate_events(events, flow, t_ref, dt, search_radius)?;
    let zero = FlowField::zeros(flow.geometry, flow.window_index, true);
    let uncompensated = compensate_events(events, &zero, t_ref, dt, search_radius)?;
    let baseline = uncompensated.variance();
    if baseline == 0.0 {
        return Err(Error::UndefinedMetric(
            "zero variance in the uncompensated event image".into(),
        ));
    }
    Ok(compensated.variance() / baseline)
}

/// Clear validity wherever the exclusion mask is set (true = excluded).
pub fn apply_exclusion(flow: &mut FlowField, excluded: &[bool]) -> Result<()> {
    if excluded.len() != flow.valid.len() {
        return Err(Error::GeometryMismatch(format!(
            "exclusion mask holds {} pixels, field holds {}",
            excluded.len(),
            flow.valid.len()
        )));
    }
    for (valid, &cut) in flow.valid.iter_mut().zip(excluded) {
        *valid = *valid && !cut;
    }
    Ok(())
}

/// Pools endpoint errors over windows (weighted by valid-pixel count) and
/// averages the warping loss over the windows where it is defined.
#[derive(Debug, Default, Clone)]
pub struct EvalAccumulator {
    sum_ee: f64,
    outliers: usize,
    pixels: usize,
    fwl_sum: f64,
    fwl_windows: usize,
}

impl EvalAccumulator {
    pub fn new() -> EvalAccumulator {
        EvalAccumulator::default()
    }

    pub fn add_pair(&mut self, est: &FlowField, gt: &FlowField) -> Result<()> {
        for (ee, gm) in evaluation_pairs(est, gt)? {
            self.sum_ee += ee;
            if is_outlier(ee, gm) {
                self.outliers += 1;
            }
            self.pixels += 1;
        }
        Ok(())
    }

    pub fn add_fwl(&mut self, value: f64) {
        self.fwl_sum += value;
        self.fwl_windows += 1;
    }

    pub fn pixels(&self) -> usize {
        self.pixels
    }

    pub fn finish(&self) -> Result<MetricReport> {
        if self.pixels == 0 {
            return Err(Error::UndefinedMetric(
                "no valid pixel pairs across the whole run".into(),
            ));
        }
        Ok(MetricReport {
            aee: self.sum_ee / self.pixels as f64,
            outlier_pct: 100.0 * self.outliers as f64 / self.pixels as f64,
            fwl: (self.fwl_windows > 0).then(|| self.fwl_sum / self.fwl_windows as f64),
            valid_pixel_count: self.pixels,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{Polarity, SensorGeometry};

    fn field(geometry: SensorGeometry, u: f32, v: f32) -> FlowField {
        FlowField {
            geometry,
            u: vec![u; geometry.len()],
            v: vec![v; geometry.len()],
            valid: vec![true; geometry.len()],
            window_index: 0,
        }
    }

    fn ev(t: u64, x: u16, y: u16, positive: bool) -> Event {
        Event {
            t,
            x,
            y,
            polarity: if positive {
                Polarity::Positive
            } else {
                Polarity::Negative
            },
        }
    }

    #[test]
    fn aee_of_identical_fields_is_zero() {
        let geometry = SensorGeometry::new(4, 4);
        let f = field(geometry, 0.7, -0.3);
        assert_eq!(aee(&f, &f).unwrap(), 0.0);
        assert_eq!(outlier_pct(&f, &f).unwrap(), 0.0);
    }

    #[test]
    fn unit_error_on_single_pixel() {
        let geometry = SensorGeometry::new(1, 1);
        let est = field(geometry, 1.0, 0.0);
        let gt = field(geometry, 0.0, 0.0);
        assert!((aee(&est, &gt).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn outlier_needs_both_conditions() {
        assert!(!is_outlier(2.0, 0.0));
        assert!(is_outlier(4.0, 10.0));
        // large error but within 5% of a huge ground-truth magnitude
        assert!(!is_outlier(4.0, 100.0));
        assert!(is_outlier(3.5, 60.0));
    }

    #[test]
    fn empty_evaluation_set_is_an_error() {
        let geometry = SensorGeometry::new(3, 3);
        let mut est = field(geometry, 0.0, 0.0);
        let gt = field(geometry, 0.0, 0.0);
        est.valid.iter_mut().for_each(|v| *v = false);
        assert!(matches!(aee(&est, &gt), Err(Error::UndefinedMetric(_))));
        assert!(matches!(
            outlier_pct(&est, &gt),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn invalid_pixels_do_not_shift_the_mean() {
        let geometry = SensorGeometry::new(3, 1);
        let mut est = field(geometry, 1.0, 0.0);
        let gt = field(geometry, 0.0, 0.0);
        est.u[2] = 100.0;
        est.valid[2] = false;
        assert!((aee(&est, &gt).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_flow_compensation_is_plain_accumulation() {
        let geometry = SensorGeometry::new(8, 8);
        let flow = field(geometry, 0.0, 0.0);
        let events = vec![ev(0, 2, 3, true), ev(400, 2, 3, false), ev(900, 5, 5, true)];
        let image = compensate_events(&events, &flow, 1000, 1000, 6.0).unwrap();
        assert_eq!(image.accumulation[3 * 8 + 2], 0.0);
        assert_eq!(image.accumulation[5 * 8 + 5], 1.0);
    }

    #[test]
    fn full_window_displacement_moves_one_pixel() {
        let geometry = SensorGeometry::new(8, 8);
        let flow = field(geometry, 1.0, 0.0);
        let events = vec![ev(0, 5, 5, true)];
        let image = compensate_events(&events, &flow, 1000, 1000, 6.0).unwrap();
        assert_eq!(image.accumulation[5 * 8 + 6], 1.0);
        assert_eq!(image.accumulation[5 * 8 + 5], 0.0);
    }

    #[test]
    fn fractional_displacement_splits_mass() {
        let geometry = SensorGeometry::new(8, 8);
        let flow = field(geometry, 1.0, 0.0);
        let events = vec![ev(500, 2, 2, true)];
        let image = compensate_events(&events, &flow, 1000, 1000, 6.0).unwrap();
        assert!((image.accumulation[2 * 8 + 2] - 0.5).abs() < 1e-12);
        assert!((image.accumulation[2 * 8 + 3] - 0.5).abs() < 1e-12);
        assert!((image.total_signed_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn off_frame_mass_is_dropped() {
        let geometry = SensorGeometry::new(4, 4);
        let flow = field(geometry, 2.0, 0.0);
        let events = vec![ev(0, 3, 1, true)];
        let image = compensate_events(&events, &flow, 1000, 1000, 6.0).unwrap();
        assert_eq!(image.total_signed_mass(), 0.0);
    }

    #[test]
    fn compensation_sharpens_a_moving_bar() {
        // bar sweeping right at 4 px per window, events at quarter-window steps
        let geometry = SensorGeometry::new(20, 8);
        let gt = field(geometry, 4.0, 0.0);
        let mut events = Vec::new();
        for j in 0..4u64 {
            let x = 5 + j as u16;
            for y in 2..6u16 {
                events.push(ev(j * 250, x, y, true));
            }
        }
        let comp = compensate_events(&events, &gt, 1000, 1000, 6.0).unwrap();
        let zero = field(geometry, 0.0, 0.0);
        let uncomp = compensate_events(&events, &zero, 1000, 1000, 6.0).unwrap();
        let max = |img: &EventImage| img.accumulation.iter().cloned().fold(0.0, f64::max);
        assert!(max(&comp) > max(&uncomp));
        assert!(fwl(&events, &gt, 1000, 1000, 6.0).unwrap() > 1.0);
    }

    #[test]
    fn zero_flow_fwl_is_exactly_one() {
        let geometry = SensorGeometry::new(10, 10);
        let flow = field(geometry, 0.0, 0.0);
        let events = vec![
            ev(0, 1, 1, true),
            ev(100, 4, 7, false),
            ev(350, 4, 7, true),
            ev(999, 9, 0, true),
        ];
        assert_eq!(fwl(&events, &flow, 1000, 1000, 6.0).unwrap(), 1.0);
    }

    #[test]
    fn empty_window_fwl_is_undefined() {
        let geometry = SensorGeometry::new(4, 4);
        let flow = field(geometry, 0.0, 0.0);
        assert!(matches!(
            fwl(&[], &flow, 1000, 1000, 6.0),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn invalid_pixels_borrow_the_nearest_flow() {
        let geometry = SensorGeometry::new(10, 10);
        let mut flow = field(geometry, 0.0, 0.0);
        flow.valid.iter_mut().for_each(|v| *v = false);
        let i = geometry.index(4, 4);
        flow.u[i] = 2.0;
        flow.valid[i] = true;
        // event two pixels from the only valid estimate
        let events = vec![ev(0, 6, 4, true)];
        let image = compensate_events(&events, &flow, 1000, 1000, 6.0).unwrap();
        assert_eq!(image.accumulation[4 * 10 + 8], 1.0);
        // out of search range: stays put
        let far = vec![ev(0, 4, 0, true)];
        let image = compensate_events(&far, &flow, 1000, 1000, 3.0).unwrap();
        assert_eq!(image.accumulation[4], 1.0);
    }

    #[test]
    fn exclusion_mask_clears_validity() {
        let geometry = SensorGeometry::new(3, 1);
        let mut flow = field(geometry, 1.0, 0.0);
        apply_exclusion(&mut flow, &[true, false, true]).unwrap();
        assert_eq!(flow.valid, vec![false, true, false]);
        assert!(apply_exclusion(&mut flow, &[true; 4]).is_err());
    }

    #[test]
    fn accumulator_pools_by_pixel_count() {
        let geometry = SensorGeometry::new(2, 1);
        let gt = field(geometry, 0.0, 0.0);
        let mut acc = EvalAccumulator::new();
        acc.add_pair(&field(geometry, 1.0, 0.0), &gt).unwrap();
        // second window with one valid pixel of error 4 (outlier)
        let mut est = field(geometry, 4.0, 0.0);
        est.valid[1] = false;
        acc.add_pair(&est, &gt).unwrap();
        let report = acc.finish().unwrap();
        assert_eq!(report.valid_pixel_count, 3);
        assert!((report.aee - (1.0 + 1.0 + 4.0) / 3.0).abs() < 1e-15);
        assert!((report.outlier_pct - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(report.fwl, None);
    }

    #[test]
    fn report_text_lists_every_metric() {
        let report = MetricReport {
            aee: 0.25,
            outlier_pct: 1.5,
            fwl: Some(1.21),
            valid_pixel_count: 42,
        };
        let text = report.to_text();
        assert!(text.contains("aee=0.25"));
        assert!(text.contains("outlier_pct=1.5"));
        assert!(text.contains("fwl=1.21"));
        assert!(text.contains("valid_pixel_count=42"));
        let json = serde_json::to_string(&report).unwrap();
        let back: MetricReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn true_flow_concentrates_event_mass() {
        use crate::io::synth::{generate_synthetic_scene, Shape, SyntheticSceneSpec};
        // Diagonal motion: the two boundary sweeps of a window land on
        // different rows, so without compensation every cell holds at most
        // one event, while compensation stacks each pixel's events.
        let spec = SyntheticSceneSpec {
            geometry: SensorGeometry::new(48, 32),
            shape: Shape::Square,
            shape_size: 6,
            velocity: (4.0, 4.0),
            windows: 4,
            events_per_edge_pixel: 2,
            noise_events_per_window: 0,
            seed: 1,
            dt_us: 1000,
            origin: Some((4.0, 4.0)),
        };
        let scene = generate_synthetic_scene(&spec).unwrap();
        let (start, end) = (spec.dt_us, 2 * spec.dt_us);
        let window: Vec<Event> = scene
            .events
            .iter()
            .filter(|e| e.t >= start && e.t < end)
            .copied()
            .collect();
        let max_mass = |flow: &FlowField| {
            compensate_events(&window, flow, end, spec.dt_us, 6.0)
                .unwrap()
                .accumulation
                .iter()
                .fold(0.0f64, |a, &m| a.max(m.abs()))
        };
        let compensated = max_mass(&scene.ground_truth[1]);
        let uncompensated = max_mass(&FlowField::zeros(spec.geometry, 1, true));
        assert!(
            compensated > uncompensated,
            "per-pixel mass maxima: {compensated} compensated vs {uncompensated} uncompensated"
        );
    }
}

//! Staged concurrent pipeline: accumulate, filter, surface, flow.
//!
//! The four stages run as independent threads connected by bounded FIFO
//! queues, giving pipelined throughput with back-pressure and a bounded
//! memory footprint. Every per-pixel transform inside a stage is
//! deterministic regardless of worker-thread count, and windows flow through
//! the queues strictly in order, so the produced flow fields are
//! byte-identical to the sequential composition of the same steps.
//!
//! Per-stage compute time is measured inside each stage with a monotonic
//! clock and excludes queue wait; the per-window total is the sum of the
//! four stage times.

use crate::accumulator::{Accumulator, EdgeImage};
use crate::config::PipelineConfig;
use crate::distance::{apply_transfer, euclidean_dt, DistanceSurface};
use crate::error::Result;
use crate::event::Event;
use crate::filtering::{denoise, fill};
use crate::flow::{estimate_flow, mask_to_edges, FlowField, FlowState};
use serde::Serialize;
use std::sync::mpsc;
use std::time::Instant;

/// Everything the pipeline knows about one finished window.
#[derive(Debug, Clone)]
pub struct WindowOutput {
    pub window_index: u64,
    /// Window start / length in microseconds.
    pub window_start: u64,
    pub window_length: u64,
    /// Edge image after denoising only; flow validity is masked to its set
    /// pixels.
    pub denoised: EdgeImage,
    /// Edge image after denoising and filling; input of the surface stage.
    pub filled: EdgeImage,
    pub surface: DistanceSurface,
    /// Dense flow restricted to denoised edge pixels.
    pub flow: FlowField,
}

/// Mean and standard deviation of one stage's per-window compute time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageStat {
    pub mean_ms: f64,
    pub std_ms: f64,
}

impl StageStat {
    fn from_samples(samples: &[f64]) -> StageStat {
        if samples.is_empty() {
            return StageStat {
                mean_ms: 0.0,
                std_ms: 0.0,
            };
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
        StageStat {
            mean_ms: mean,
            std_ms: var.sqrt(),
        }
    }
}

/// Per-stage timing table of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTimings {
    pub accumulation: StageStat,
    pub filtering: StageStat,
    pub distance: StageStat,
    pub flow: StageStat,
    pub total: StageStat,
}

impl StageTimings {
    fn from_samples(samples: &TimingSamples) -> StageTimings {
        StageTimings {
            accumulation: StageStat::from_samples(&samples.accumulation),
            filtering: StageStat::from_samples(&samples.filtering),
            distance: StageStat::from_samples(&samples.distance),
            flow: StageStat::from_samples(&samples.flow),
            total: StageStat::from_samples(&samples.total),
        }
    }

    /// Aligned text table: one row per stage, mean ± standard deviation.
    pub fn to_table(&self) -> String {
        let rows = [
            ("Edge image", &self.accumulation),
            ("Denoising & filling", &self.filtering),
            ("Distance transform", &self.distance),
            ("Optical flow", &self.flow),
            ("Total", &self.total),
        ];
        let mut out = String::from("stage                 time per window (ms)\n");
        for (name, stat) in rows {
            out.push_str(&format!(
                "{name:<22}{:>8.3} ± {:.3}\n",
                stat.mean_ms, stat.std_ms
            ));
        }
        out
    }
}

#[derive(Default)]
struct TimingSamples {
    accumulation: Vec<f64>,
    filtering: Vec<f64>,
    distance: Vec<f64>,
    flow: Vec<f64>,
    total: Vec<f64>,
}

/// What a finished run reports.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub windows: u64,
    pub timings: StageTimings,
}

struct AccumulatedWindow {
    image: EdgeImage,
    acc_ms: f64,
}

struct FilteredWindow {
    denoised: EdgeImage,
    filled: EdgeImage,
    acc_ms: f64,
    filter_ms: f64,
}

struct SurfacedWindow {
    denoised: EdgeImage,
    filled: EdgeImage,
    surface: DistanceSurface,
    acc_ms: f64,
    filter_ms: f64,
    distance_ms: f64,
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Run the staged pipeline over an ordered event source.
///
/// `on_window` is invoked once per window, in window order, from the flow
/// stage; its error aborts the run. Events arrive as `Result` so that a
/// streaming source can surface its own failures mid-run.
pub fn run_pipeline<I>(
    cfg: &PipelineConfig,
    events: I,
    mut on_window: impl FnMut(&WindowOutput) -> Result<()>,
) -> Result<RunSummary>
where
    I: IntoIterator<Item = Result<Event>>,
    I::IntoIter: Send,
{
    cfg.validate()?;
    let transfer = cfg.transfer()?;
    let mut accumulator = Accumulator::new(cfg.geometry, cfg.dt_us)?;
    let filter = cfg.filter;
    let capacity = cfg.queue_capacity;
    let events = events.into_iter();

    let (tx_acc, rx_acc) = mpsc::sync_channel::<Result<AccumulatedWindow>>(capacity);
    let (tx_fil, rx_fil) = mpsc::sync_channel::<Result<FilteredWindow>>(capacity);
    let (tx_sur, rx_sur) = mpsc::sync_channel::<Result<SurfacedWindow>>(capacity);

    std::thread::scope(|scope| {
        scope.spawn(move || {
            let mut pending_ms = 0.0f64;
            for event in events {
                let event = match event {
                    Ok(event) => event,
                    Err(e) => {
                        let _ = tx_acc.send(Err(e));
                        return;
                    }
                };
                let start = Instant::now();
                let emitted = accumulator.push(event);
                pending_ms += ms_since(start);
                match emitted {
                    Ok(windows) => {
                        for image in windows {
                            let acc_ms = std::mem::take(&mut pending_ms);
                            if tx_acc.send(Ok(AccumulatedWindow { image, acc_ms })).is_err() {
                                return;
                            }
                        }
                    }
                    Err(e) => {
                        let _ = tx_acc.send(Err(e));
                        return;
                    }
                }
            }
            if let Some(image) = accumulator.finish() {
                let _ = tx_acc.send(Ok(AccumulatedWindow {
                    image,
                    acc_ms: pending_ms,
                }));
            }
        });

        scope.spawn(move || {
            for item in rx_acc {
                match item {
                    Ok(AccumulatedWindow { image, acc_ms }) => {
                        let start = Instant::now();
                        let denoised = denoise(&image, filter.n_d);
                        let filled = fill(&denoised, filter.n_f);
                        let filter_ms = ms_since(start);
                        let out = FilteredWindow {
                            denoised,
                            filled,
                            acc_ms,
                            filter_ms,
                        };
                        if tx_fil.send(Ok(out)).is_err() {
                            return;
                        }
                    }
                    Err(e) => {
                        let _ = tx_fil.send(Err(e));
                        return;
                    }
                }
            }
        });

        scope.spawn(move || {
            for item in rx_fil {
                match item {
                    Ok(win) => {
                        let start = Instant::now();
                        let field = euclidean_dt(&win.filled);
                        let surface = match apply_transfer(&field, transfer) {
                            Ok(surface) => surface,
                            Err(e) => {
                                let _ = tx_sur.send(Err(e));
                                return;
                            }
                        };
                        let distance_ms = ms_since(start);
                        let out = SurfacedWindow {
                            denoised: win.denoised,
                            filled: win.filled,
                            surface,
                            acc_ms: win.acc_ms,
                            filter_ms: win.filter_ms,
                            distance_ms,
                        };
                        if tx_sur.send(Ok(out)).is_err() {
                            return;
                        }
                    }
                    Err(e) => {
                        let _ = tx_sur.send(Err(e));
                        return;
                    }
                }
            }
        });

        // flow stage, on the caller thread: the only stateful stage
        let mut state = FlowState::new();
        let mut samples = TimingSamples::default();
        let mut windows = 0u64;
        for item in rx_sur {
            let win = item?;
            let start = Instant::now();
            let dense = estimate_flow(&mut state, &win.surface, &cfg.flow)?;
            let flow = mask_to_edges(&dense, &win.denoised)?;
            let flow_ms = ms_since(start);

            let output = WindowOutput {
                window_index: win.denoised.window_index,
                window_start: win.denoised.window_start,
                window_length: win.denoised.window_length,
                denoised: win.denoised,
                filled: win.filled,
                surface: win.surface,
                flow,
            };
            on_window(&output)?;
            windows += 1;
            samples.accumulation.push(win.acc_ms);
            samples.filtering.push(win.filter_ms);
            samples.distance.push(win.distance_ms);
            samples.flow.push(flow_ms);
            samples
                .total
                .push(win.acc_ms + win.filter_ms + win.distance_ms + flow_ms);
        }
        Ok(RunSummary {
            windows,
            timings: StageTimings::from_samples(&samples),
        })
    })
}

/// Single-threaded reference composition of the same steps, for determinism
/// comparisons and environments without spare threads.
pub fn run_sequential<I>(
    cfg: &PipelineConfig,
    events: I,
    mut on_window: impl FnMut(&WindowOutput) -> Result<()>,
) -> Result<RunSummary>
where
    I: IntoIterator<Item = Result<Event>>,
{
    cfg.validate()?;
    let transfer = cfg.transfer()?;
    let mut accumulator = Accumulator::new(cfg.geometry, cfg.dt_us)?;
    let mut state = FlowState::new();
    let mut samples = TimingSamples::default();
    let mut windows = 0u64;
    let mut pending_ms = 0.0f64;

    let process = |image: EdgeImage,
                       acc_ms: f64,
                       state: &mut FlowState,
                       samples: &mut TimingSamples,
                       windows: &mut u64,
                       on_window: &mut dyn FnMut(&WindowOutput) -> Result<()>|
     -> Result<()> {
        let start = Instant::now();
        let denoised = denoise(&image, cfg.filter.n_d);
        let filled = fill(&denoised, cfg.filter.n_f);
        let filter_ms = ms_since(start);

        let start = Instant::now();
        let field = euclidean_dt(&filled);
        let surface = apply_transfer(&field, transfer)?;
        let distance_ms = ms_since(start);

        let start = Instant::now();
        let dense = estimate_flow(state, &surface, &cfg.flow)?;
        let flow = mask_to_edges(&dense, &denoised)?;
        let flow_ms = ms_since(start);

        let output = WindowOutput {
            window_index: denoised.window_index,
            window_start: denoised.window_start,
            window_length: denoised.window_length,
            denoised,
            filled,
            surface,
            flow,
        };
        on_window(&output)?;
        *windows += 1;
        samples.accumulation.push(acc_ms);
        samples.filtering.push(filter_ms);
        samples.distance.push(distance_ms);
        samples.flow.push(flow_ms);
        samples
            .total
            .push(acc_ms + filter_ms + distance_ms + flow_ms);
        Ok(())
    };

    for event in events {
        let event = event?;
        let start = Instant::now();
        let emitted = accumulator.push(event)?;
        pending_ms += ms_since(start);
        for image in emitted {
            let acc_ms = std::mem::take(&mut pending_ms);
            process(
                image,
                acc_ms,
                &mut state,
                &mut samples,
                &mut windows,
                &mut on_window,
            )?;
        }
    }
    if let Some(image) = accumulator.finish() {
        process(
            image,
            pending_ms,
            &mut state,
            &mut samples,
            &mut windows,
            &mut on_window,
        )?;
    }
    Ok(RunSummary {
        windows,
        timings: StageTimings::from_samples(&samples),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PipelineConfig;
    use crate::error::Error;
    use crate::event::{Polarity, SensorGeometry};
    use crate::io::flow_file::write_flow;
    use crate::io::synth::{generate_synthetic_scene, Shape, SyntheticSceneSpec};

    fn test_config() -> PipelineConfig {
        PipelineConfig::from_text("width = 48\nheight = 40\ndt_us = 1000\n").unwrap()
    }

    fn test_scene() -> Vec<Event> {
        let spec = SyntheticSceneSpec {
            geometry: SensorGeometry::new(48, 40),
            shape: Shape::Square,
            shape_size: 10,
            velocity: (1.0, 0.0),
            windows: 12,
            events_per_edge_pixel: 2,
            noise_events_per_window: 10,
            seed: 7,
            dt_us: 1000,
            origin: None,
        };
        generate_synthetic_scene(&spec).unwrap().events
    }

    fn flow_bytes(outputs: &[WindowOutput]) -> Vec<u8> {
        let mut bytes = Vec::new();
        for out in outputs {
            write_flow(&out.flow, &mut bytes).unwrap();
        }
        bytes
    }

    fn run_collect(cfg: &PipelineConfig, events: &[Event], concurrent: bool) -> (Vec<WindowOutput>, RunSummary) {
        let mut outputs = Vec::new();
        let sink = |out: &WindowOutput| {
            outputs.push(out.clone());
            Ok(())
        };
        let items = events.iter().copied().map(Ok);
        let summary = if concurrent {
            run_pipeline(cfg, items, sink).unwrap()
        } else {
            run_sequential(cfg, items, sink).unwrap()
        };
        (outputs, summary)
    }

    #[test]
    fn pipeline_matches_sequential_bit_for_bit() {
        let cfg = test_config();
        let events = test_scene();
        let (seq, seq_summary) = run_collect(&cfg, &events, false);
        let (conc, conc_summary) = run_collect(&cfg, &events, true);
        assert_eq!(seq_summary.windows, 12);
        assert_eq!(conc_summary.windows, 12);
        assert_eq!(flow_bytes(&seq), flow_bytes(&conc));
    }

    #[test]
    fn queue_capacity_does_not_change_output() {
        let mut cfg = test_config();
        let events = test_scene();
        cfg.queue_capacity = 1;
        let (one, _) = run_collect(&cfg, &events, true);
        cfg.queue_capacity = 4;
        let (four, _) = run_collect(&cfg, &events, true);
        assert_eq!(flow_bytes(&one), flow_bytes(&four));
    }

    #[test]
    fn windows_arrive_in_order_with_metadata() {
        let cfg = test_config();
        let events = test_scene();
        let (outputs, summary) = run_collect(&cfg, &events, true);
        assert_eq!(outputs.len(), summary.windows as usize);
        for (i, out) in outputs.iter().enumerate() {
            assert_eq!(out.window_index, i as u64);
            assert_eq!(out.flow.window_index, i as u64);
            assert_eq!(out.window_length, 1000);
        }
    }

    #[test]
    fn total_is_the_sum_of_stages() {
        let cfg = test_config();
        let events = test_scene();
        let (_, summary) = run_collect(&cfg, &events, true);
        let t = &summary.timings;
        let sum = t.accumulation.mean_ms + t.filtering.mean_ms + t.distance.mean_ms + t.flow.mean_ms;
        assert!((t.total.mean_ms - sum).abs() < 1e-9);
        assert!(t.total.mean_ms > 0.0);
    }

    #[test]
    fn source_error_aborts_the_run() {
        let cfg = test_config();
        let events = test_scene();
        let items = events
            .iter()
            .copied()
            .map(Ok)
            .take(40)
            .chain(std::iter::once(Err(Error::Parse {
                line: 41,
                msg: "synthetic failure".into(),
            })));
        let result = run_pipeline(&cfg, items, |_| Ok(()));
        assert!(matches!(result, Err(Error::Parse { line: 41, .. })));
    }

    #[test]
    fn sink_error_aborts_cleanly() {
        let cfg = test_config();
        let events = test_scene();
        let mut seen = 0;
        let result = run_pipeline(&cfg, events.iter().copied().map(Ok), |_| {
            seen += 1;
            if seen == 3 {
                Err(Error::Config("sink full".into()))
            } else {
                Ok(())
            }
        });
        assert!(matches!(result, Err(Error::Config(_))));
        assert_eq!(seen, 3);
    }

    #[test]
    fn event_gaps_produce_empty_windows_in_sequence() {
        let cfg = test_config();
        // events at t=100 and t=3600 leave windows 1 and 2 empty
        let events = vec![
            Event { t: 100, x: 5, y: 5, polarity: Polarity::Positive },
            Event { t: 3600, x: 9, y: 9, polarity: Polarity::Negative },
        ];
        let (outputs, summary) = run_collect(&cfg, &events, true);
        assert_eq!(summary.windows, 4);
        assert_eq!(outputs[1].filled.edge_count(), 0);
        assert_eq!(outputs[2].filled.edge_count(), 0);
        assert_eq!(outputs[1].flow.valid_count(), 0);
    }

    #[test]
    fn timing_table_lists_every_stage() {
        let cfg = test_config();
        let events = test_scene();
        let (_, summary) = run_collect(&cfg, &events, false);
        let table = summary.timings.to_table();
        for name in [
            "Edge image",
            "Denoising & filling",
            "Distance transform",
            "Optical flow",
            "Total",
        ] {
            assert!(table.contains(name), "missing row {name:?} in:\n{table}");
        }
        assert!(table.contains('±'));
    }

    #[test]
    fn empty_source_yields_empty_run() {
        let cfg = test_config();
        let summary = run_pipeline(&cfg, std::iter::empty(), |_| Ok(())).unwrap();
        assert_eq!(summary.windows, 0);
        assert_eq!(summary.timings.total.mean_ms, 0.0);
    }
}

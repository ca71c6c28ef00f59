//! `eval`: score a directory of estimated flow fields against ground truth,
//! pooling endpoint errors over all windows and, when the event stream is
//! supplied, adding the per-window warping loss.

use crate::overrides::PipelineOverrides;
use crate::util::{flow_files_in, load_events, read_flow_file, window_index_of};
use anyhow::Context;
use clap::Args;
use ebof_core::io::flow_png::load_exclusion_mask;
use ebof_core::metrics::{apply_exclusion, fwl, EvalAccumulator};
use std::fs;
use std::path::PathBuf;

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Directory of estimated flow fields (flow_*.flo).
    #[arg(long, value_name = "DIR")]
    pub est: PathBuf,
    /// Directory of ground-truth flow fields.
    #[arg(long, value_name = "DIR")]
    pub gt: PathBuf,
    /// Grayscale image of pixels to exclude (non-zero = excluded).
    #[arg(long, value_name = "PATH")]
    pub mask: Option<PathBuf>,
    /// Event stream; enables the warping-loss metric (needs a config or
    /// flags for geometry, dt_us, and dsat).
    #[arg(long, value_name = "PATH")]
    pub events: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineOverrides,
    /// Report file (default: metrics.txt inside the estimate directory).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

pub fn execute(args: EvalArgs) -> anyhow::Result<()> {
    let est_files = flow_files_in(&args.est)?;
    let gt_files = flow_files_in(&args.gt)?;
    anyhow::ensure!(
        est_files.len() == gt_files.len(),
        "window count mismatch: {} estimated fields in {}, {} ground-truth fields in {}",
        est_files.len(),
        args.est.display(),
        gt_files.len(),
        args.gt.display()
    );
    anyhow::ensure!(!est_files.is_empty(), "no flow fields to evaluate");

    // The warping loss needs the raw events, the window length, and the
    // nearest-flow search radius; all come from the pipeline configuration.
    let fwl_input = match &args.events {
        Some(path) => {
            let cfg = args.pipeline.resolve()?;
            let events = load_events(path, cfg.geometry)?;
            anyhow::ensure!(!events.is_empty(), "event stream {} is empty", path.display());
            Some((events, cfg))
        }
        None => None,
    };

    let mut pool = EvalAccumulator::new();
    let mut fwl_lines = String::new();
    let mut mask = None;
    for (position, (est_path, gt_path)) in est_files.iter().zip(&gt_files).enumerate() {
        let mut est = read_flow_file(est_path)?;
        let gt = read_flow_file(gt_path)?;
        if let Some(path) = &args.mask {
            let mask = match &mask {
                Some(mask) => mask,
                None => mask.insert(load_exclusion_mask(path, est.geometry)?),
            };
            apply_exclusion(&mut est, mask)?;
        }
        pool.add_pair(&est, &gt)
            .with_context(|| format!("scoring {}", est_path.display()))?;

        if let Some((events, cfg)) = &fwl_input {
            let index = window_index_of(est_path).unwrap_or(position as u64);
            let t0 = events[0].t;
            let start = t0 + index * cfg.dt_us;
            let end = start + cfg.dt_us;
            let window: Vec<_> = events
                .iter()
                .filter(|e| e.t >= start && e.t < end)
                .copied()
                .collect();
            if !window.is_empty() {
                let value = fwl(&window, &est, end, cfg.dt_us, cfg.dsat)?;
                pool.add_fwl(value);
                fwl_lines.push_str(&format!("fwl[{index:06}]={value:.6}\n"));
            }
        }
    }

    let report = pool.finish()?;
    let mut text = report.to_text();
    text.push_str(&fwl_lines);
    print!("{text}");
    let out = args.out.unwrap_or_else(|| args.est.join("metrics.txt"));
    fs::write(&out, &text).with_context(|| format!("writing report {}", out.display()))?;
    Ok(())
}

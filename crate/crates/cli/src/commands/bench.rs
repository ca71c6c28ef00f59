//! `bench`: replay a recorded stream through the full pipeline, discarding
//! outputs, and report per-stage compute times.

use crate::overrides::PipelineOverrides;
use crate::util::load_events;
use anyhow::Context;
use clap::Args;
use ebof_core::pipeline::run_pipeline;
use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Event stream to replay.
    pub events: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineOverrides,
    /// Pace the replay by event timestamps instead of running at full speed.
    #[arg(long)]
    pub realtime: bool,
    /// Directory for timing.txt and summary.json (default: print only).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

pub fn execute(args: BenchArgs) -> anyhow::Result<()> {
    let cfg = args.pipeline.resolve()?;
    let events = load_events(&args.events, cfg.geometry)?;

    let started = Instant::now();
    let summary = if args.realtime {
        let t0 = events.first().map(|e| e.t);
        let clock = Instant::now();
        run_pipeline(
            &cfg,
            events.iter().copied().map(move |event| {
                let due = Duration::from_micros(event.t - t0.unwrap());
                let elapsed = clock.elapsed();
                if due > elapsed {
                    std::thread::sleep(due - elapsed);
                }
                Ok(event)
            }),
            |_| Ok(()),
        )?
    } else {
        run_pipeline(&cfg, events.iter().copied().map(Ok), |_| Ok(()))?
    };
    let wall = started.elapsed().as_secs_f64();

    let table = summary.timings.to_table();
    print!("{table}");
    let rate = if wall > 0.0 {
        summary.windows as f64 / wall
    } else {
        f64::INFINITY
    };
    println!(
        "windows={} wall_s={wall:.3} windows_per_s={rate:.1}",
        summary.windows
    );
    if let Some(out) = &args.out {
        fs::create_dir_all(out)
            .with_context(|| format!("creating output directory {}", out.display()))?;
        fs::write(out.join("timing.txt"), &table)?;
        fs::write(
            out.join("summary.json"),
            serde_json::to_string_pretty(&summary)?,
        )?;
    }
    Ok(())
}

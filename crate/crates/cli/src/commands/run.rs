//! `run`: feed an event stream through the staged pipeline, writing one
//! flow field per window plus a timing report.

use crate::overrides::PipelineOverrides;
use crate::util::load_events;
use anyhow::Context;
use clap::Args;
use ebof_core::io::flow_file::{window_flow_filename, write_flow};
use ebof_core::io::flow_png::{load_exclusion_mask, write_flow_png};
use ebof_core::metrics::apply_exclusion;
use ebof_core::pipeline::{run_pipeline, run_sequential};
use std::fs;
use std::io::BufWriter;
use std::path::PathBuf;

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Event stream to process (`t_us,x,y,polarity` lines).
    pub events: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineOverrides,
    /// Output directory for flow fields and reports.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Also render one color-wheel PNG per window.
    #[arg(long)]
    pub png: bool,
    /// Grayscale image of pixels to exclude (non-zero = excluded).
    #[arg(long, value_name = "PATH")]
    pub mask: Option<PathBuf>,
    /// Run the stages one after another instead of as a concurrent
    /// pipeline; outputs are identical either way.
    #[arg(long)]
    pub sequential: bool,
}

pub fn execute(args: RunArgs) -> anyhow::Result<()> {
    let cfg = args.pipeline.resolve()?;
    let events = load_events(&args.events, cfg.geometry)?;
    let mask = args
        .mask
        .as_ref()
        .map(|path| load_exclusion_mask(path, cfg.geometry))
        .transpose()?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;

    let on_window = |window: &ebof_core::pipeline::WindowOutput| {
        let mut flow = window.flow.clone();
        if let Some(mask) = &mask {
            apply_exclusion(&mut flow, mask)?;
        }
        let path = args.out.join(window_flow_filename(flow.window_index));
        write_flow(&flow, BufWriter::new(fs::File::create(&path)?))?;
        if args.png {
            write_flow_png(&flow, path.with_extension("png"))?;
        }
        Ok(())
    };
    let source = events.iter().copied().map(Ok);
    let summary = if args.sequential {
        run_sequential(&cfg, source, on_window)?
    } else {
        run_pipeline(&cfg, source, on_window)?
    };

    let table = summary.timings.to_table();
    fs::write(args.out.join("timing.txt"), &table)?;
    fs::write(
        args.out.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    print!("{table}");
    println!("windows={}", summary.windows);
    Ok(())
}

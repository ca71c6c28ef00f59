//! `viz`: render flow fields to color-wheel PNGs (hue = direction,
//! saturation = relative magnitude, gray = no estimate).

use crate::util::{flow_files_in, read_flow_file};
use anyhow::Context;
use clap::Args;
use ebof_core::io::flow_png::write_flow_png;
use std::fs;
use std::path::PathBuf;

#[derive(Args, Debug)]
pub struct VizArgs {
    /// A flow field file or a directory of flow_*.flo files.
    pub flows: PathBuf,
    /// Output directory for the rendered images.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

pub fn execute(args: VizArgs) -> anyhow::Result<()> {
    let files = if args.flows.is_dir() {
        let files = flow_files_in(&args.flows)?;
        anyhow::ensure!(
            !files.is_empty(),
            "no flow_*.flo files in {}",
            args.flows.display()
        );
        files
    } else {
        vec![args.flows.clone()]
    };
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;
    for path in &files {
        let flow = read_flow_file(path)?;
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("flow");
        write_flow_png(&flow, args.out.join(format!("{stem}.png")))?;
    }
    println!("rendered={}", files.len());
    Ok(())
}

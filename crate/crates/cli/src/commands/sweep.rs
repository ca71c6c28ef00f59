//! `sweep`: replay one scene across a (nd, nf, dsat) parameter grid and
//! tabulate the endpoint error of each cell against ground truth.

use crate::overrides::PipelineOverrides;
use crate::util::{flow_files_in, load_events, read_flow_file};
use anyhow::Context;
use clap::Args;
use ebof_core::config::{parse_list, PipelineConfig};
use ebof_core::event::Event;
use ebof_core::flow::FlowField;
use ebof_core::metrics::EvalAccumulator;
use ebof_core::pipeline::run_sequential;
use serde::Serialize;
use std::fs;
use std::path::PathBuf;

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Event stream replayed once per grid cell.
    pub events: PathBuf,
    /// Ground-truth flow directory for scoring.
    #[arg(long, value_name = "DIR")]
    pub gt: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineOverrides,
    /// Denoise thresholds to try.
    #[arg(long = "nd-list", value_name = "N,N,...", default_value = "0,1,2,3,4")]
    pub nd_list: String,
    /// Fill thresholds to try.
    #[arg(long = "nf-list", value_name = "N,N,...", default_value = "1,2,3,4,5")]
    pub nf_list: String,
    /// Saturation distances to try.
    #[arg(long = "dsat-list", value_name = "D,D,...", default_value = "3,6,9,12")]
    pub dsat_list: String,
    /// Directory for sweep.txt and sweep.json (default: print only).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Cell {
    nd: u8,
    nf: u8,
    dsat: f64,
    aee: Option<f64>,
    error: Option<String>,
}

pub fn execute(args: SweepArgs) -> anyhow::Result<()> {
    let base = args.pipeline.resolve()?;
    let nd_list = parse_list::<u8>(&args.nd_list, "nd-list")?;
    let nf_list = parse_list::<u8>(&args.nf_list, "nf-list")?;
    let dsat_list = parse_list::<f64>(&args.dsat_list, "dsat-list")?;
    let events = load_events(&args.events, base.geometry)?;
    let gt: Vec<FlowField> = flow_files_in(&args.gt)?
        .iter()
        .map(|path| read_flow_file(path))
        .collect::<anyhow::Result<_>>()?;
    anyhow::ensure!(!gt.is_empty(), "no ground-truth fields in {}", args.gt.display());

    let mut cells = Vec::new();
    for &nd in &nd_list {
        for &nf in &nf_list {
            for &dsat in &dsat_list {
                let aee = run_cell(&base, &events, &gt, nd, nf, dsat);
                cells.push(Cell {
                    nd,
                    nf,
                    dsat,
                    aee: aee.as_ref().ok().copied(),
                    error: aee.err().map(|e| e.to_string()),
                });
            }
        }
    }

    let mut table = String::from("  nd  nf   dsat        aee\n");
    for cell in &cells {
        let value = match (&cell.aee, &cell.error) {
            (Some(aee), _) => format!("{aee:10.6}"),
            (None, Some(err)) => format!("error: {err}"),
            (None, None) => unreachable!(),
        };
        table.push_str(&format!(
            "{:>4}{:>4}{:>7.1}  {}\n",
            cell.nd, cell.nf, cell.dsat, value
        ));
    }
    let best = cells
        .iter()
        .filter_map(|c| c.aee.map(|aee| (c, aee)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    if let Some((cell, aee)) = best {
        table.push_str(&format!(
            "best: nd={} nf={} dsat={} aee={aee:.6}\n",
            cell.nd, cell.nf, cell.dsat
        ));
    }
    print!("{table}");

    if let Some(out) = &args.out {
        fs::create_dir_all(out)
            .with_context(|| format!("creating output directory {}", out.display()))?;
        fs::write(out.join("sweep.txt"), &table)?;
        fs::write(out.join("sweep.json"), serde_json::to_string_pretty(&cells)?)?;
    }
    Ok(())
}

/// One pipeline replay with the cell's parameters, scored against ground
/// truth; any failure is reported as the cell's result without ending the
/// sweep.
fn run_cell(
    base: &PipelineConfig,
    events: &[Event],
    gt: &[FlowField],
    nd: u8,
    nf: u8,
    dsat: f64,
) -> anyhow::Result<f64> {
    let mut cfg = base.clone();
    cfg.filter = ebof_core::filtering::FilterParams::new(nd, nf)?;
    cfg.dsat = dsat;
    let mut pool = EvalAccumulator::new();
    let mut produced = 0usize;
    run_sequential(&cfg, events.iter().copied().map(Ok), |window| {
        let index = window.window_index as usize;
        if index >= gt.len() {
            return Err(ebof_core::error::Error::Config(format!(
                "window {index} has no ground-truth field ({} available)",
                gt.len()
            )));
        }
        produced += 1;
        pool.add_pair(&window.flow, &gt[index])
    })?;
    anyhow::ensure!(
        produced == gt.len(),
        "stream produced {produced} windows, ground truth holds {}",
        gt.len()
    );
    Ok(pool.finish()?.aee)
}

//! Shared file plumbing for the subcommands.

use anyhow::Context;
use ebof_core::event::{Event, SensorGeometry};
use ebof_core::flow::FlowField;
use ebof_core::io::event_csv::parse_event_stream;
use ebof_core::io::flow_file::read_flow;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

pub fn load_events(path: &Path, geometry: SensorGeometry) -> anyhow::Result<Vec<Event>> {
    let file =
        File::open(path).with_context(|| format!("opening event stream {}", path.display()))?;
    let events = parse_event_stream(BufReader::new(file), geometry)
        .with_context(|| format!("parsing event stream {}", path.display()))?;
    Ok(events)
}

/// All `flow_*.flo` files directly under `dir`, in window order.
pub fn flow_files_in(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir)
        .with_context(|| format!("listing flow directory {}", dir.display()))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry?.path();
        let name = match path.file_name().and_then(|n| n.to_str()) {
            Some(name) => name,
            None => continue,
        };
        if name.starts_with("flow_") && name.ends_with(".flo") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn read_flow_file(path: &Path) -> anyhow::Result<FlowField> {
    let file =
        File::open(path).with_context(|| format!("opening flow field {}", path.display()))?;
    let flow = read_flow(BufReader::new(file))
        .with_context(|| format!("reading flow field {}", path.display()))?;
    Ok(flow)
}

/// Window index encoded in a `flow_NNNNNN.flo` filename.
pub fn window_index_of(path: &Path) -> Option<u64> {
    path.file_stem()?
        .to_str()?
        .strip_prefix("flow_")?
        .parse()
        .ok()
}

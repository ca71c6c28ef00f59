//! `synth`: generate a seeded synthetic event scene with analytic
//! ground-truth flow, laid out so `run` and `eval` consume it directly.

use anyhow::Context;
use clap::Args;
use ebof_core::config::{parse_list, PipelineConfig};
use ebof_core::event::SensorGeometry;
use ebof_core::io::event_csv::write_event_stream;
use ebof_core::io::flow_file::{window_flow_filename, write_flow};
use ebof_core::io::synth::{generate_synthetic_scene, Shape, SyntheticSceneSpec};
use std::fs;
use std::io::BufWriter;
use std::path::PathBuf;

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output directory (events.csv, scene.cfg, gt/ flow fields).
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Sensor width in pixels.
    #[arg(long, default_value_t = 120)]
    pub width: u32,
    /// Sensor height in pixels.
    #[arg(long, default_value_t = 90)]
    pub height: u32,
    /// Moving shape: square|checkerboard|bar.
    #[arg(long, default_value = "square")]
    pub shape: String,
    /// Shape size in pixels (square side, tile side, bar width).
    #[arg(long = "shape-size", default_value_t = 12)]
    pub shape_size: u32,
    /// Velocity in px/window as "vx,vy".
    #[arg(long, default_value = "1,0", value_name = "VX,VY")]
    pub velocity: String,
    /// Number of accumulation windows.
    #[arg(long, default_value_t = 50)]
    pub windows: u32,
    /// Boundary sweeps per window (events per edge pixel).
    #[arg(long = "events-per-pixel", default_value_t = 2)]
    pub events_per_pixel: u32,
    /// Spurious uniform events added per window.
    #[arg(long, default_value_t = 0)]
    pub noise: u32,
    /// Noise generator seed.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Window length in microseconds.
    #[arg(long = "dt-us", default_value_t = 1000)]
    pub dt_us: u64,
}

pub fn execute(args: SynthArgs) -> anyhow::Result<()> {
    let velocity = parse_list::<f64>(&args.velocity, "velocity")?;
    anyhow::ensure!(
        velocity.len() == 2,
        "velocity must be two comma-separated numbers, got {:?}",
        args.velocity
    );
    let geometry = SensorGeometry::new(args.width, args.height);
    let spec = SyntheticSceneSpec {
        geometry,
        shape: args.shape.parse::<Shape>()?,
        shape_size: args.shape_size,
        velocity: (velocity[0], velocity[1]),
        windows: args.windows,
        events_per_edge_pixel: args.events_per_pixel,
        noise_events_per_window: args.noise,
        seed: args.seed,
        dt_us: args.dt_us,
        origin: None,
    };
    let scene = generate_synthetic_scene(&spec)?;

    let gt_dir = args.out.join("gt");
    fs::create_dir_all(&gt_dir)
        .with_context(|| format!("creating output directory {}", gt_dir.display()))?;

    let events_path = args.out.join("events.csv");
    write_event_stream(
        &scene.events,
        BufWriter::new(fs::File::create(&events_path)?),
    )?;
    for field in &scene.ground_truth {
        let path = gt_dir.join(window_flow_filename(field.window_index));
        write_flow(field, BufWriter::new(fs::File::create(&path)?))?;
    }

    // A ready-to-use pipeline configuration matching the scene's geometry
    // and window length, with default processing parameters.
    let mut cfg_map = std::collections::BTreeMap::new();
    cfg_map.insert("width".to_string(), geometry.width.to_string());
    cfg_map.insert("height".to_string(), geometry.height.to_string());
    cfg_map.insert("dt_us".to_string(), args.dt_us.to_string());
    let cfg = PipelineConfig::from_map(&cfg_map)?;
    fs::write(args.out.join("scene.cfg"), cfg.to_text())?;

    println!(
        "events={} windows={} out={}",
        scene.events.len(),
        scene.ground_truth.len(),
        args.out.display()
    );
    Ok(())
}

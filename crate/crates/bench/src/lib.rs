//! Shared scene and configuration builders for the stage benchmarks, kept
//! here so every benchmark measures the same workloads.

use ebof_core::config::{PipelineConfig, TransferKind};
use ebof_core::event::SensorGeometry;
use ebof_core::filtering::FilterParams;
use ebof_core::flow::FlowConfig;
use ebof_core::io::synth::{generate_synthetic_scene, Shape, SyntheticScene, SyntheticSceneSpec};

/// A benchmark workload: a generated scene plus the configuration used to
/// replay it.
pub struct Workload {
    pub name: &'static str,
    pub scene: SyntheticScene,
    pub config: PipelineConfig,
}

fn workload(
    name: &'static str,
    width: u32,
    height: u32,
    shape_size: u32,
    velocity: (f64, f64),
    windows: u32,
    noise: u32,
    flow: FlowConfig,
) -> Workload {
    let geometry = SensorGeometry::new(width, height);
    let scene = generate_synthetic_scene(&SyntheticSceneSpec {
        geometry,
        shape: Shape::Square,
        shape_size,
        velocity,
        windows,
        events_per_edge_pixel: 2,
        noise_events_per_window: noise,
        seed: 5,
        dt_us: 1000,
        origin: None,
    })
    .expect("benchmark scene generation");
    let config = PipelineConfig {
        geometry,
        dt_us: 1000,
        filter: FilterParams::new(1, 4).expect("filter parameters"),
        dsat: 6.0,
        transfer_kind: TransferKind::InvExp,
        bound: 6.0,
        flow,
        queue_capacity: 2,
    };
    Workload {
        name,
        scene,
        config,
    }
}

/// Low-resolution sensor workload (346x260, 30 windows).
pub fn low_res() -> Workload {
    workload(
        "346x260",
        346,
        260,
        60,
        (2.0, 1.0),
        30,
        50,
        FlowConfig::low_res(),
    )
}

/// High-resolution sensor workload (1280x720, 8 windows).
pub fn high_res() -> Workload {
    workload(
        "1280x720",
        1280,
        720,
        120,
        (3.0, 2.0),
        8,
        100,
        FlowConfig::high_res(),
    )
}

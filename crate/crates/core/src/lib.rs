//! Real-time optical flow from event-camera streams.
//!
//! The processing chain turns a raw event stream into per-window flow
//! fields: events are accumulated into binary edge images, denoised and
//! filled, converted to a smooth distance-based surface, and fed to a
//! pyramidal incremental flow estimator. Everything is deterministic for a
//! given input and configuration, independent of thread count.

pub mod accumulator;
pub mod config;
pub mod distance;
pub mod error;
pub mod event;
pub mod filtering;
pub mod flow;
pub mod io;
pub mod metrics;
pub mod oracles;
pub mod pipeline;

pub use accumulator::{accumulate, Accumulator, EdgeImage};
pub use config::{PipelineConfig, TransferKind};
pub use distance::{
    alpha_from_dsat, apply_transfer, euclidean_dt, DistanceField, DistanceSurface, Transfer,
};
pub use error::{Error, Result};
pub use event::{Event, Polarity, SensorGeometry};
pub use filtering::{denoise, denoise_fill, fill, FilterParams};
pub use flow::{estimate_flow, mask_to_edges, warp_image, FlowConfig, FlowField, FlowState};
pub use metrics::{
    aee, compensate_events, fwl, outlier_pct, EvalAccumulator, EventImage, MetricReport,
};
pub use pipeline::{run_pipeline, run_sequential, RunSummary, StageTimings, WindowOutput};

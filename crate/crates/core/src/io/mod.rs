//! Readers, writers, and the synthetic scene generator.

pub mod event_csv;
pub mod flow_file;
pub mod flow_png;
pub mod synth;

pub use event_csv::{parse_event_stream, write_event_stream};
pub use flow_file::{read_flow, window_flow_filename, write_flow};
pub use flow_png::{load_exclusion_mask, render_flow_image, write_flow_png, write_surface_png};
pub use synth::{generate_synthetic_scene, Shape, SyntheticScene, SyntheticSceneSpec};

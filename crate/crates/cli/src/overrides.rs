//! Pipeline parameters as command-line flags. Every flag mirrors one
//! config-file key; a flag given on the command line replaces the file's
//! value for that key.

use anyhow::Context;
use clap::Args;
use ebof_core::config::{parse_key_values, PipelineConfig};
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Args, Debug, Clone, Default)]
pub struct PipelineOverrides {
    /// Key-value configuration file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Sensor width in pixels [key: width].
    #[arg(long)]
    pub width: Option<u32>,
    /// Sensor height in pixels [key: height].
    #[arg(long)]
    pub height: Option<u32>,
    /// Accumulation window length in microseconds [key: dt_us].
    #[arg(long = "dt-us", value_name = "US")]
    pub dt_us: Option<u64>,
    /// Denoise neighbor threshold, 0 disables [key: nd].
    #[arg(long)]
    pub nd: Option<u8>,
    /// Fill neighbor threshold, 5 disables [key: nf].
    #[arg(long)]
    pub nf: Option<u8>,
    /// Saturation distance of the inverse exponential transfer, in pixels
    /// [key: dsat].
    #[arg(long)]
    pub dsat: Option<f64>,
    /// Distance-to-surface mapping: invexp|linear|bounded|log
    /// [key: transfer].
    #[arg(long, value_name = "KIND")]
    pub transfer: Option<String>,
    /// Clip distance of the bounded transfer, in pixels [key: bound].
    #[arg(long)]
    pub bound: Option<f64>,
    /// Pyramid depth [key: levels].
    #[arg(long)]
    pub levels: Option<usize>,
    /// Per-level regularization weights, coarsest first [key: lambda].
    #[arg(long, value_name = "L1,L2,...")]
    pub lambda: Option<String>,
    /// Per-level relaxation sweep counts, coarsest first [key: iters].
    #[arg(long, value_name = "I1,I2,...")]
    pub iters: Option<String>,
    /// Temporal blend weight in [0,1] [key: gamma].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Stage hand-off queue capacity, in windows [key: queue].
    #[arg(long)]
    pub queue: Option<usize>,
}

impl PipelineOverrides {
    /// Merge the config file (when given) with the flag overrides and build
    /// the pipeline configuration.
    pub fn resolve(&self) -> anyhow::Result<PipelineConfig> {
        let mut map = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                parse_key_values(&text)?
            }
            None => BTreeMap::new(),
        };
        self.overlay(&mut map);
        Ok(PipelineConfig::from_map(&map)?)
    }

    fn overlay(&self, map: &mut BTreeMap<String, String>) {
        fn put(map: &mut BTreeMap<String, String>, key: &str, value: Option<impl ToString>) {
            if let Some(value) = value {
                map.insert(key.to_string(), value.to_string());
            }
        }
        put(map, "width", self.width);
        put(map, "height", self.height);
        put(map, "dt_us", self.dt_us);
        put(map, "nd", self.nd);
        put(map, "nf", self.nf);
        put(map, "dsat", self.dsat);
        put(map, "transfer", self.transfer.as_ref());
        put(map, "bound", self.bound);
        put(map, "levels", self.levels);
        put(map, "lambda", self.lambda.as_ref());
        put(map, "iters", self.iters.as_ref());
        put(map, "gamma", self.gamma);
        put(map, "queue", self.queue);
    }
}

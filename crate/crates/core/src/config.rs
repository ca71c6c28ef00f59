//! Pipeline configuration: a flat `key = value` text format plus the typed
//! bundle handed to the pipeline.
//!
//! The same keys are accepted as command-line overrides, with the flag
//! winning over the file. `width`, `height`, and `dt_us` are required;
//! everything else has a default.

use crate::distance::Transfer;
use crate::error::{Error, Result};
use crate::event::SensorGeometry;
use crate::filtering::FilterParams;
use crate::flow::FlowConfig;
use std::collections::BTreeMap;

/// Which distance-to-surface mapping the pipeline applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferKind {
    /// Inverse exponential, saturating at `dsat` (the default).
    InvExp,
    /// Raw distance, normalized per frame.
    Linear,
    /// Distance clipped at `bound`.
    Bounded,
    /// Logarithmic compression, normalized per frame.
    Log,
}

impl std::str::FromStr for TransferKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<TransferKind> {
        match s {
            "invexp" => Ok(TransferKind::InvExp),
            "linear" => Ok(TransferKind::Linear),
            "bounded" | "linear_bounded" => Ok(TransferKind::Bounded),
            "log" => Ok(TransferKind::Log),
            other => Err(Error::Config(format!(
                "unknown transfer {other:?}, expected invexp|linear|bounded|log"
            ))),
        }
    }
}

impl TransferKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TransferKind::InvExp => "invexp",
            TransferKind::Linear => "linear",
            TransferKind::Bounded => "bounded",
            TransferKind::Log => "log",
        }
    }
}

/// Every tunable of a pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub geometry: SensorGeometry,
    /// Accumulation window length in microseconds.
    pub dt_us: u64,
    pub filter: FilterParams,
    /// Saturation distance of the inverse exponential transfer, in pixels.
    /// Also the search radius for nearest-valid flow lookups in metrics.
    pub dsat: f64,
    pub transfer_kind: TransferKind,
    /// Clip distance of the bounded transfer variant, in pixels.
    pub bound: f64,
    pub flow: FlowConfig,
    /// Bounded hand-off queue capacity between pipeline stages, in windows.
    pub queue_capacity: usize,
}

impl PipelineConfig {
    /// The concrete transfer the configuration selects.
    pub fn transfer(&self) -> Result<Transfer> {
        let t = match self.transfer_kind {
            TransferKind::InvExp => Transfer::inverse_exp_from_dsat(self.dsat)?,
            TransferKind::Linear => Transfer::Linear,
            TransferKind::Bounded => Transfer::LinearBounded { bound: self.bound },
            TransferKind::Log => Transfer::Log,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dt_us == 0 {
            return Err(Error::Config("dt_us must be positive".into()));
        }
        if self.queue_capacity == 0 {
            return Err(Error::Config("queue capacity must be at least 1".into()));
        }
        FilterParams::new(self.filter.n_d, self.filter.n_f)?;
        self.flow.validate()?;
        self.transfer()?;
        Ok(())
    }

    /// Build from string key-value pairs, applying defaults for absent keys.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<PipelineConfig> {
        for key in map.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("unknown config key {key:?}")));
            }
        }
        let width: u32 = require(map, "width")?;
        let height: u32 = require(map, "height")?;
        if width == 0 || height == 0 {
            return Err(Error::Config("width and height must be positive".into()));
        }
        let cfg = PipelineConfig {
            geometry: SensorGeometry::new(width, height),
            dt_us: require(map, "dt_us")?,
            filter: FilterParams {
                n_d: optional(map, "nd")?.unwrap_or(1),
                n_f: optional(map, "nf")?.unwrap_or(4),
            },
            dsat: optional(map, "dsat")?.unwrap_or(6.0),
            transfer_kind: match map.get("transfer") {
                Some(s) => s.parse()?,
                None => TransferKind::InvExp,
            },
            bound: optional(map, "bound")?.unwrap_or(6.0),
            flow: FlowConfig {
                levels: optional(map, "levels")?.unwrap_or(3),
                lambda: match map.get("lambda") {
                    Some(s) => parse_list(s, "lambda")?,
                    None => vec![50.0, 250.0, 500.0],
                },
                iterations: match map.get("iters") {
                    Some(s) => parse_list(s, "iters")?,
                    None => vec![50, 25, 5],
                },
                gamma: optional(map, "gamma")?.unwrap_or(0.5),
            },
            queue_capacity: optional(map, "queue")?.unwrap_or(2),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse the `key = value` text format (# starts a comment).
    pub fn from_text(text: &str) -> Result<PipelineConfig> {
        PipelineConfig::from_map(&parse_key_values(text)?)
    }

    /// Render as config text that round-trips through `from_text`.
    pub fn to_text(&self) -> String {
        let join_f32 = |v: &[f32]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let iters = self
            .flow
            .iterations
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "width = {}\nheight = {}\ndt_us = {}\nnd = {}\nnf = {}\ndsat = {}\n\
             transfer = {}\nbound = {}\nlevels = {}\nlambda = {}\niters = {}\n\
             gamma = {}\nqueue = {}\n",
            self.geometry.width,
            self.geometry.height,
            self.dt_us,
            self.filter.n_d,
            self.filter.n_f,
            self.dsat,
            self.transfer_kind.as_str(),
            self.bound,
            self.flow.levels,
            join_f32(&self.flow.lambda),
            iters,
            self.flow.gamma,
            self.queue_capacity,
        )
    }
}

const KNOWN_KEYS: [&str; 13] = [
    "width", "height", "dt_us", "nd", "nf", "dsat", "transfer", "bound", "levels", "lambda",
    "iters", "gamma", "queue",
];

/// Parse config text into a key map without applying defaults, so overrides
/// can be layered before `from_map`.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = match raw.split_once('#') {
            Some((before, _)) => before.trim(),
            None => raw.trim(),
        };
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config(format!(
            "line {}: expected `key = value`, got {raw:?}",
            line_no + 1
        )))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(Error::Config(format!(
                "line {}: empty key or value in {raw:?}",
                line_no + 1
            )));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(Error::Config(format!(
                "line {}: duplicate key {key:?}",
                line_no + 1
            )));
        }
    }
    Ok(map)
}

fn require<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T> {
    match map.get(key) {
        Some(raw) => raw
            .parse()
            .map_err(|_| Error::Config(format!("invalid value {raw:?} for key {key:?}"))),
        None => Err(Error::MissingField(key.to_string())),
    }
}

fn optional<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    match map.get(key) {
        Some(raw) => raw
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("invalid value {raw:?} for key {key:?}"))),
        None => Ok(None),
    }
}

/// Comma-separated list, used by the per-level flow parameters.
pub fn parse_list<T: std::str::FromStr>(raw: &str, key: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(|piece| {
            piece
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("invalid list element {piece:?} for key {key:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        "width = 64\nheight = 48\ndt_us = 1000\n"
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = PipelineConfig::from_text(minimal()).unwrap();
        assert_eq!(cfg.geometry, SensorGeometry::new(64, 48));
        assert_eq!(cfg.dt_us, 1000);
        assert_eq!(cfg.filter, FilterParams { n_d: 1, n_f: 4 });
        assert_eq!(cfg.dsat, 6.0);
        assert_eq!(cfg.transfer_kind, TransferKind::InvExp);
        assert_eq!(cfg.flow.levels, 3);
        assert_eq!(cfg.flow.lambda, vec![50.0, 250.0, 500.0]);
        assert_eq!(cfg.flow.iterations, vec![50, 25, 5]);
        assert_eq!(cfg.flow.gamma, 0.5);
        assert_eq!(cfg.queue_capacity, 2);
    }

    #[test]
    fn missing_required_key_is_named() {
        let err = PipelineConfig::from_text("width = 64\nheight = 48\n").unwrap_err();
        match err {
            Error::MissingField(key) => assert_eq!(key, "dt_us"),
            other => panic!("expected missing field, got {other:?}"),
        }
        let err = PipelineConfig::from_text("height = 48\ndt_us = 10\n").unwrap_err();
        assert!(matches!(err, Error::MissingField(k) if k == "width"));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# pipeline setup\nwidth = 32 # columns\n\nheight = 32\ndt_us = 500\n";
        let cfg = PipelineConfig::from_text(text).unwrap();
        assert_eq!(cfg.geometry.width, 32);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = "width = 64\nheight = 48\ndt_us = 1000\nwindow = 5\n";
        let err = PipelineConfig::from_text(text).unwrap_err();
        assert!(matches!(err, Error::Config(msg) if msg.contains("window")));
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let text = "width = 64\nwidth = 32\nheight = 48\ndt_us = 1000\n";
        assert!(PipelineConfig::from_text(text).is_err());
    }

    #[test]
    fn lists_and_variants_parse() {
        let text = "width = 64\nheight = 48\ndt_us = 1000\ntransfer = bounded\nbound = 4\n\
                    levels = 2\nlambda = 100,200\niters = 10,20\ngamma = 0.25\nqueue = 5\n";
        let cfg = PipelineConfig::from_text(text).unwrap();
        assert_eq!(cfg.transfer_kind, TransferKind::Bounded);
        assert_eq!(cfg.bound, 4.0);
        assert_eq!(cfg.flow.lambda, vec![100.0, 200.0]);
        assert_eq!(cfg.flow.iterations, vec![10, 20]);
        assert_eq!(cfg.queue_capacity, 5);
        assert!(matches!(
            cfg.transfer().unwrap(),
            Transfer::LinearBounded { bound } if bound == 4.0
        ));
    }

    #[test]
    fn mismatched_level_lists_fail_validation() {
        let text = "width = 64\nheight = 48\ndt_us = 1000\nlevels = 2\n";
        assert!(PipelineConfig::from_text(text).is_err());
    }

    #[test]
    fn config_text_round_trips() {
        let cfg = PipelineConfig::from_text(minimal()).unwrap();
        let again = PipelineConfig::from_text(&cfg.to_text()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn overrides_win_over_file_keys() {
        let mut map = parse_key_values(minimal()).unwrap();
        map.insert("nd".into(), "3".into());
        map.insert("dt_us".into(), "2000".into());
        let cfg = PipelineConfig::from_map(&map).unwrap();
        assert_eq!(cfg.filter.n_d, 3);
        assert_eq!(cfg.dt_us, 2000);
    }

    #[test]
    fn invalid_values_name_the_key() {
        let text = "width = sixty\nheight = 48\ndt_us = 1000\n";
        let err = PipelineConfig::from_text(text).unwrap_err();
        assert!(matches!(err, Error::Config(msg) if msg.contains("width")));
        let text = "width = 64\nheight = 48\ndt_us = 1000\nlambda = 1,two,3\n";
        let err = PipelineConfig::from_text(text).unwrap_err();
        assert!(matches!(err, Error::Config(msg) if msg.contains("lambda")));
    }
}

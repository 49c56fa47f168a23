//! The scenario document: network, intersection geometry, demand and run
//! settings in one TOML file.
//!
//! ```toml
//! [[nodes]]
//! id = "C"
//! x = 0.0
//! y = 0.0
//!
//! [[links]]
//! id = "S-C"
//! from = "S"
//! to = "C"
//! length_m = 250.0
//! vmax_mps = 13.89
//! lanes = 3
//! section_m = 500.0
//!
//! [[intersections]]
//! node = "C"
//! tile_size_m = 0.25
//! lane_width_m = 3.0
//!
//! [[demand]]
//! origin = "S"
//! destination = "N"
//! count = 120        # optional; absent means "share of the Poisson stream"
//!
//! [run]
//! mode = "fcfs"
//! lambda_per_min = 15.0
//! ```
//!
//! Every field of `[run]` is optional and falls back to [`RunConfig::default`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::RunConfig;
use crate::error::{Error, Result};
use crate::isect::GeometrySpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDoc {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length_m: f64,
    pub vmax_mps: f64,
    #[serde(default = "one_lane")]
    pub lanes: u32,
    #[serde(default = "default_section")]
    pub section_m: f64,
}

fn one_lane() -> u32 {
    1
}

fn default_section() -> f64 {
    500.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntersectionDoc {
    pub node: String,
    #[serde(flatten)]
    pub geometry: GeometrySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandDoc {
    pub origin: String,
    pub destination: String,
    /// Expected number of vehicles over the spawn window, released as a
    /// Poisson stream.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u32>,
    /// Per-pair Poisson rate in vehicles per minute.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_per_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_geometry: Option<GeometrySpec>,
    pub nodes: Vec<NodeDoc>,
    pub links: Vec<LinkDoc>,
    #[serde(default)]
    pub intersections: Vec<IntersectionDoc>,
    #[serde(default)]
    pub demand: Vec<DemandDoc>,
    #[serde(default)]
    pub run: RunConfig,
}

impl ScenarioDoc {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Applies `key=value` overrides to the `[run]` table. Values are parsed as
    /// TOML literals, falling back to a bare string.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        if overrides.is_empty() {
            return Ok(());
        }
        let mut table = toml::Table::try_from(&self.run)?;
        let known = toml::Table::try_from(RunConfig::default())?;
        for raw in overrides {
            let raw = raw.as_ref();
            let (key, value) = raw
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{raw}` is not key=value")))?;
            let key = key.trim();
            if !known.contains_key(key) {
                return Err(Error::Config(format!("unknown config key `{key}`")));
            }
            table.insert(key.to_string(), parse_literal(value.trim()));
        }
        self.run = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Ok(())
    }
}

fn parse_literal(text: &str) -> toml::Value {
    let probe = format!("v = {text}");
    match probe.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(text.to_string())),
        Err(_) => toml::Value::String(text.to_string()),
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ev_scenario::{GenerationOptions, SessionBins, DEFAULT_FAN_LEVELS};
use crate::ingest::{EvSchema, FluviusSchema, PvSchema, WeatherSchema};
use crate::pv_scenario::DEFAULT_PV_LEVELS;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "GRIDSCEN_CONFIG";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub ev: Option<PathBuf>,
    pub pv: Option<PathBuf>,
    pub load: Option<PathBuf>,
    pub weather: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schemas {
    pub ev: EvSchema,
    pub pv: PvSchema,
    pub load: FluviusSchema,
    pub weather: WeatherSchema,
}

/// Everything a run depends on. Command-line flags override single fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub year: i32,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub inputs: Inputs,
    pub schemas: Schemas,
    pub bins: SessionBins,
    pub generation: GenerationOptions,
    /// Scenarios per `generate` call.
    pub scenarios: usize,
    /// Power profile resolution in minutes.
    pub resolution_min: u32,
    /// Fold the overnight part of each profile onto the arrival day.
    pub fold_profiles: bool,
    pub fan_levels: Vec<f64>,
    pub pv_levels: Vec<f64>,
    pub pv_month: u32,
    pub kwp_dist: String,
    pub daylight_only: bool,
    pub window_days: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            year: 2022,
            seed: 0,
            output_dir: PathBuf::from("gridscen-out"),
            inputs: Inputs::default(),
            schemas: Schemas::default(),
            bins: SessionBins::default(),
            generation: GenerationOptions::default(),
            scenarios: 1000,
            resolution_min: 15,
            fold_profiles: true,
            fan_levels: DEFAULT_FAN_LEVELS.to_vec(),
            pv_levels: DEFAULT_PV_LEVELS.to_vec(),
            pv_month: 6,
            kwp_dist: "tri:2,5,10".into(),
            daylight_only: false,
            window_days: 7,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingInput(format!("config file {}", path.display()))
            } else {
                Error::io(path, e)
            }
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn calendar(&self) -> crate::calendar::Calendar {
        crate::calendar::Calendar::new(self.year)
    }
}

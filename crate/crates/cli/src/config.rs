//! Generator configuration: one JSON document, every field optional.

use std::path::Path;

use editforge_core::chain::ComposerConfig;
use editforge_core::render::RenderConfig;
use editforge_core::scene::SceneConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Fraction of catalog labels reserved for unseen-object benchmarks.
pub const DEFAULT_HOLDOUT_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub scene: SceneConfig,
    pub composer: ComposerConfig,
    pub render: RenderConfig,
    pub holdout_fraction: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            scene: SceneConfig::default(),
            composer: ComposerConfig::default(),
            render: RenderConfig::default(),
            holdout_fraction: DEFAULT_HOLDOUT_FRACTION,
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Config, CliError> {
        let cfg = match path {
            None => Config::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.composer.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.render.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(CliError::Config(format!("holdout_fraction must lie in [0, 1), got {}", self.holdout_fraction)));
        }
        if self.scene.max_objects == 0 {
            return Err(CliError::Config("scene.max_objects must be at least 1".into()));
        }
        Ok(())
    }
}

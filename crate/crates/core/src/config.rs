//! TOML run configuration shared by every subcommand.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::StePolicy;
use crate::continuity::Thresholds;
use crate::losses::{ArgLoss, CostMatrix, LossWeights};
use crate::metrics::{Sampling, DEFAULT_SAMPLES_PER_SEGMENT};
use crate::raster::{FillRule, ViewBox, MIN_RESOLUTION};
use crate::refine::DEFAULT_CONFIDENCE;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("invalid config field `{field}`: {message}")]
    Field { field: &'static str, message: String },
}

fn field(field: &'static str, message: impl ToString) -> ConfigError {
    ConfigError::Field { field, message: message.to_string() }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RasterConfig {
    pub resolution: usize,
    pub view_box: ViewBox,
    pub fill_rule: FillRule,
}

impl Default for RasterConfig {
    fn default() -> Self {
        RasterConfig { resolution: 128, view_box: ViewBox::default(), fill_rule: FillRule::NonZero }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChamferConfig {
    pub n_per_segment: usize,
    pub sampling: Sampling,
}

impl Default for ChamferConfig {
    fn default() -> Self {
        ChamferConfig { n_per_segment: DEFAULT_SAMPLES_PER_SEGMENT, sampling: Sampling::Parameter }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub thresholds: Thresholds,
    /// Minimum argmax probability (exclusive) for a prediction to be applied.
    pub confidence: f64,
    pub cost_matrix: CostMatrix,
    pub loss_weights: LossWeights,
    pub arg_loss: ArgLoss,
    pub raster: RasterConfig,
    pub chamfer: ChamferConfig,
    pub ste: StePolicy,
    /// Decimal places used when writing path data.
    pub precision: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            thresholds: Thresholds::default(),
            confidence: DEFAULT_CONFIDENCE,
            cost_matrix: CostMatrix::default(),
            loss_weights: LossWeights::default(),
            arg_loss: ArgLoss::default(),
            raster: RasterConfig::default(),
            chamfer: ChamferConfig::default(),
            ste: StePolicy::default(),
            precision: 9,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.thresholds.validate().map_err(|e| field("thresholds", e))?;
        if !(self.confidence >= 0.0 && self.confidence < 1.0) {
            return Err(field("confidence", "must lie in [0, 1)"));
        }
        self.loss_weights.validate().map_err(|e| field("loss_weights", e))?;
        if self.raster.resolution < MIN_RESOLUTION {
            return Err(field("raster.resolution", format!("must be at least {MIN_RESOLUTION}")));
        }
        self.raster.view_box.validate().map_err(|e| field("raster.view_box", e))?;
        if self.chamfer.n_per_segment < 2 {
            return Err(field("chamfer.n_per_segment", "must be at least 2"));
        }
        if !(self.ste.temperature > 0.0 && self.ste.temperature.is_finite()) {
            return Err(field("ste.temperature", "must be positive"));
        }
        if self.precision > 17 {
            return Err(field("precision", "at most 17 decimal places"));
        }
        Ok(())
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{GridConfig, SimSetup, VariantExperimentConfig};
use crate::rnnpb::{ConstraintKind, OnlineConfig, StateLayout, TrainConfig};
use crate::seqcore::NetworkPreset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckConfig {
    /// Central-difference step.
    pub h: f64,
    pub tolerance: f64,
    /// Length of the random sequence the loss is evaluated on.
    pub steps: usize,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            h: 1e-6,
            tolerance: 1e-5,
            steps: 5,
        }
    }
}

/// Everything a pipeline run needs. Every field has a default, so `{}` is a
/// complete configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub preset: NetworkPreset,
    pub p_dim: usize,
    pub grid: GridConfig,
    pub sim: SimSetup,
    pub train: TrainConfig,
    /// Offline adaptation experiment.
    pub adapt: VariantExperimentConfig,
    /// Online adaptation experiment.
    pub online: VariantExperimentConfig,
    pub buffer: OnlineConfig,
    pub gradcheck: GradcheckConfig,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            preset: NetworkPreset::Desk,
            p_dim: 2,
            grid: GridConfig::default(),
            sim: SimSetup::default(),
            train: TrainConfig::default(),
            adapt: VariantExperimentConfig::default(),
            online: VariantExperimentConfig {
                constraint: ConstraintKind::JointVelocity,
                ..Default::default()
            },
            buffer: OnlineConfig::default(),
            gradcheck: GradcheckConfig::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn layout(&self) -> StateLayout {
        StateLayout::tendon_arm(self.p_dim)
    }

    /// Training settings with the run's seed and network preset applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            preset: self.preset,
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let key = |k: &str, e: Error| Error::Config {
            key: k.to_string(),
            message: e.to_string(),
        };
        self.layout().validate().map_err(|e| key("p_dim", e))?;
        self.grid.validate().map_err(|e| key("grid", e))?;
        self.sim
            .geometry
            .validate()
            .map_err(|e| key("sim.geometry", e))?;
        self.sim
            .muscle
            .validate()
            .map_err(|e| key("sim.muscle", e))?;
        if !(self.train.learning_rate > 0.0) {
            return Err(Error::Config {
                key: "train.learning_rate".into(),
                message: "must be positive".into(),
            });
        }
        for (name, exp) in [("adapt", &self.adapt), ("online", &self.online)] {
            if exp.steps < 2 {
                return Err(Error::Config {
                    key: format!("{name}.steps"),
                    message: "must be at least 2".into(),
                });
            }
            exp.base
                .validate()
                .map_err(|e| key(&format!("{name}.base"), e))?;
        }
        if self.buffer.threshold == 0 || self.buffer.capacity < self.buffer.threshold {
            return Err(Error::Config {
                key: "buffer".into(),
                message: "needs 0 < threshold <= capacity".into(),
            });
        }
        Ok(())
    }
}

/// Parses a JSON configuration; errors name the offending key path.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
        key: e.path().to_string(),
        message: e.into_inner().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        assert_eq!(parse_config_str("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_key_is_named() {
        match parse_config_str(r#"{"gird": {}}"#) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "gird"),
            other => panic!("unexpected {other:?}"),
        }
        match parse_config_str(r#"{"grid": {"r_valuez": [0.03]}}"#) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "grid.r_valuez"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn type_mismatch_is_named() {
        match parse_config_str(r#"{"train": {"max_epochs": "many"}}"#) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "train.max_epochs"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn adaptation_defaults() {
        let cfg = parse_config_str(r#"{"preset": "paper"}"#).unwrap();
        assert_eq!(cfg.preset, NetworkPreset::Full);
        assert_eq!(cfg.adapt.base.learning_rate, 0.01);
        assert_eq!(cfg.adapt.base.epochs, 30);
        assert_eq!(cfg.train_config().preset, NetworkPreset::Full);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(parse_config_str(r#"{"grid": {"steps_per_demo": 1}}"#).is_err());
        assert!(parse_config_str(r#"{"buffer": {"threshold": 30}}"#).is_err());
        assert!(parse_config(Path::new("/nonexistent/cfg.json")).is_err());
    }
}
